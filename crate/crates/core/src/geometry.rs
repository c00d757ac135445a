//! Dimension-generic vectors, lattice indices, balls and rays.
//!
//! Everything here is a pure function of its inputs. Identity comparisons go
//! through the named tolerances in [`crate::scalar::tol`].

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{tol, Scalar};

/// A point or direction in R^m.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VecN<T>(pub Vec<T>);

impl<T: Scalar> VecN<T> {
    pub fn new(coords: Vec<T>) -> Self {
        VecN(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        VecN(vec![T::zero(); dim])
    }

    /// The `axis`-th standard basis vector.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[axis] = T::one();
        v
    }

    pub fn from_f64s(coords: &[f64]) -> Self {
        VecN(coords.iter().map(|&x| T::lit(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        VecN(self.0.iter().map(|&a| a * s).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        VecN(self.0.iter().zip(&other.0).map(|(&a, &b)| a + s * b).collect())
    }

    /// Unit vector in the direction of `self`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.to_f64_lossy()).collect()
    }
}

impl<T> Index<usize> for VecN<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for VecN<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Scalar> Add for &VecN<T> {
    type Output = VecN<T>;
    fn add(self, rhs: &VecN<T>) -> VecN<T> {
        VecN(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a + b).collect())
    }
}

impl<T: Scalar> Sub for &VecN<T> {
    type Output = VecN<T>;
    fn sub(self, rhs: &VecN<T>) -> VecN<T> {
        VecN(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a - b).collect())
    }
}

impl<T: Scalar> Add for VecN<T> {
    type Output = VecN<T>;
    fn add(self, rhs: VecN<T>) -> VecN<T> {
        &self + &rhs
    }
}

impl<T: Scalar> Sub for VecN<T> {
    type Output = VecN<T>;
    fn sub(self, rhs: VecN<T>) -> VecN<T> {
        &self - &rhs
    }
}

impl<T: Scalar> Mul<T> for &VecN<T> {
    type Output = VecN<T>;
    fn mul(self, s: T) -> VecN<T> {
        self.scale(s)
    }
}

impl<T: Scalar> Neg for &VecN<T> {
    type Output = VecN<T>;
    fn neg(self) -> VecN<T> {
        VecN(self.0.iter().map(|&a| -a).collect())
    }
}

/// An index into Z^m. Ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeIndex(pub Vec<i64>);

impl LatticeIndex {
    pub fn new(components: Vec<i64>) -> Self {
        LatticeIndex(components)
    }

    pub fn zero(dim: usize) -> Self {
        LatticeIndex(vec![0; dim])
    }

    /// Signed unit vector `sign * e_axis`.
    pub fn unit(dim: usize, axis: usize, sign: i64) -> Self {
        let mut v = vec![0; dim];
        v[axis] = sign;
        LatticeIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn dot(&self, other: &Self) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> i64 {
        self.dot(self)
    }

    pub fn norm<T: Scalar>(&self) -> T {
        T::from_int(self.norm_sq()).sqrt()
    }

    pub fn inf_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn to_vec<T: Scalar>(&self) -> VecN<T> {
        VecN(self.0.iter().map(|&c| T::from_int(c)).collect())
    }

    pub fn scale(&self, s: i64) -> Self {
        LatticeIndex(self.0.iter().map(|c| c * s).collect())
    }

    /// True when every component is divisible by two.
    pub fn is_even(&self) -> bool {
        self.0.iter().all(|c| c.rem_euclid(2) == 0)
    }

    /// Greatest common divisor of the components; `0` for the zero vector.
    pub fn content(&self) -> i64 {
        self.0.iter().fold(0, |g, &c| gcd(g, c.abs()))
    }

    pub fn is_primitive(&self) -> bool {
        self.content() == 1
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &LatticeIndex {
    type Output = LatticeIndex;
    fn add(self, rhs: &LatticeIndex) -> LatticeIndex {
        LatticeIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticeIndex {
    type Output = LatticeIndex;
    fn sub(self, rhs: &LatticeIndex) -> LatticeIndex {
        LatticeIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticeIndex {
    type Output = LatticeIndex;
    fn neg(self) -> LatticeIndex {
        LatticeIndex(self.0.iter().map(|a| -a).collect())
    }
}

/// A closed ball; every obstacle in the crate is one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball<T> {
    pub center: VecN<T>,
    pub radius: T,
}

impl<T: Scalar> Ball<T> {
    pub fn new(center: VecN<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    /// Outward unit normal at a boundary point.
    pub fn normal_at(&self, p: &VecN<T>) -> VecN<T> {
        (p - &self.center).scale(T::one() / self.radius)
    }
}

/// A half-line with unit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray<T> {
    pub origin: VecN<T>,
    pub direction: VecN<T>,
}

impl<T: Scalar> Ray<T> {
    /// Checks that `direction` has unit norm within the geometric tolerance.
    pub fn new(origin: VecN<T>, direction: VecN<T>) -> Result<Self> {
        check_unit(&direction)?;
        Ok(Ray { origin, direction })
    }

    pub fn at(&self, t: T) -> VecN<T> {
        self.origin.axpy(t, &self.direction)
    }
}

fn check_unit<T: Scalar>(v: &VecN<T>) -> Result<()> {
    let n = v.norm();
    if (n - T::one()).abs() > T::tol(tol::GEOM) {
        return Err(Error::NotUnit(n.to_f64_lossy()));
    }
    Ok(())
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance<T: Scalar>(p: &VecN<T>, a: &VecN<T>, b: &VecN<T>) -> Result<T> {
    if a == b {
        return Err(Error::InvalidSegment);
    }
    Ok(segment_distance_unchecked(p, a, b))
}

/// Symmetric in the endpoints to the last bit: the endpoints are put in a
/// canonical (lexicographic) order before any arithmetic happens.
pub(crate) fn segment_distance_unchecked<T: Scalar>(p: &VecN<T>, a: &VecN<T>, b: &VecN<T>) -> T {
    let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == T::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(&ab) / len_sq).max(T::zero()).min(T::one());
    p.dist(&a.axpy(t, &ab))
}

fn lex_less<T: Scalar>(x: &VecN<T>, y: &VecN<T>) -> bool {
    for (a, b) in x.0.iter().zip(&y.0) {
        if a < b {
            return true;
        }
        if a > b {
            return false;
        }
    }
    false
}

/// Specular reflection `v - 2<v,n>n` of a unit direction about a unit normal.
pub fn reflect_direction<T: Scalar>(v: &VecN<T>, n: &VecN<T>) -> Result<VecN<T>> {
    check_unit(v)?;
    check_unit(n)?;
    Ok(reflect_unchecked(v, n))
}

pub(crate) fn reflect_unchecked<T: Scalar>(v: &VecN<T>, n: &VecN<T>) -> VecN<T> {
    let two = T::lit(2.0);
    v.axpy(-two * v.dot(n), n)
}

/// Smallest `t > tol::HIT` where the ray meets the sphere, if any.
///
/// A ray whose origin lies on the sphere (within [`tol::INSIDE`]) is treated as
/// outside, so a freshly reflected ray does not re-hit its own obstacle.
pub fn ray_ball_intersect<T: Scalar>(ray: &Ray<T>, ball: &Ball<T>) -> Result<Option<T>> {
    let oc = &ray.origin - &ball.center;
    let dist = oc.norm();
    if dist < ball.radius - T::tol(tol::INSIDE) {
        return Err(Error::InsideObstacle {
            distance: dist.to_f64_lossy(),
            radius: ball.radius.to_f64_lossy(),
        });
    }
    Ok(ray_sphere_roots(&oc, &ray.direction, ball.radius))
}

/// Smallest root `t > tol::HIT` of `|oc + t d|^2 = r^2`, with `d` unit.
pub(crate) fn ray_sphere_roots<T: Scalar>(oc: &VecN<T>, d: &VecN<T>, radius: T) -> Option<T> {
    let b = oc.dot(d);
    let c = oc.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < T::zero() {
        return None;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = if b > T::zero() { -(b + sq) } else { -b + sq };
    let t1 = if q == T::zero() { -b } else { q.min(c / q) };
    if t1 > T::tol(tol::HIT) {
        Some(t1)
    } else {
        None
    }
}

/// Angle in `[0, pi]` between two nonzero vectors; the cosine is clamped.
pub fn angle_between<T: Scalar>(u: &VecN<T>, v: &VecN<T>) -> Result<T> {
    let nu = u.norm();
    let nv = v.norm();
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::InvalidInput("angle with a zero vector".into()));
    }
    // 2 atan2(|a - b|, |a + b|) keeps full relative accuracy near 0 and pi,
    // where acos of the cosine loses half the digits.
    let (a, b) = (u.scale(T::one() / nu), v.scale(T::one() / nv));
    Ok(T::lit(2.0) * (&a - &b).norm().atan2((&a + &b).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> VecN<f64> {
        VecN::from_f64s(c)
    }

    #[test]
    fn segment_distance_examples() {
        let d = point_segment_distance(&v(&[1., 0.]), &v(&[0., 0.]), &v(&[2., 0.])).unwrap();
        assert_eq!(d, 0.0);
        let d = point_segment_distance(&v(&[1., 0.]), &v(&[0., 0.]), &v(&[1., 1.])).unwrap();
        assert_abs_diff_eq!(d, 0.7071067811865476, epsilon = 1e-15);
        let d = point_segment_distance(&v(&[1., 1.]), &v(&[0., 0.]), &v(&[2., 1.])).unwrap();
        assert_abs_diff_eq!(d, 0.4472135954999579, epsilon = 1e-15);
    }

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let d = point_segment_distance(&v(&[-3., 4.]), &v(&[0., 0.]), &v(&[1., 0.])).unwrap();
        assert_abs_diff_eq!(d, 5.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_segment_is_rejected() {
        let e = point_segment_distance(&v(&[1., 0.]), &v(&[0., 0.]), &v(&[0., 0.]));
        assert_eq!(e, Err(Error::InvalidSegment));
    }

    #[test]
    fn reflect_examples() {
        let r = reflect_direction(&v(&[1., 0.]), &v(&[1., 0.])).unwrap();
        assert_eq!(r, v(&[-1., 0.]));
        let r = reflect_direction(&v(&[1., 0.]), &v(&[0., 1.])).unwrap();
        assert_eq!(r, v(&[1., 0.]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = reflect_direction(&v(&[h, -h]), &v(&[0., 1.])).unwrap();
        assert_abs_diff_eq!(r[0], h, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], h, epsilon = 1e-15);
    }

    #[test]
    fn reflect_rejects_non_unit() {
        assert!(matches!(
            reflect_direction(&v(&[2., 0.]), &v(&[1., 0.])),
            Err(Error::NotUnit(_))
        ));
    }

    #[test]
    fn ray_ball_examples() {
        let ball = Ball::new(v(&[1., 0.]), 0.2).unwrap();
        let ray = Ray::new(v(&[0., 0.]), v(&[1., 0.])).unwrap();
        assert_abs_diff_eq!(ray_ball_intersect(&ray, &ball).unwrap().unwrap(), 0.8, epsilon = 1e-15);
        let ray = Ray::new(v(&[0., 0.]), v(&[0., 1.])).unwrap();
        assert_eq!(ray_ball_intersect(&ray, &ball).unwrap(), None);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ball = Ball::new(v(&[1., 1.]), 0.2).unwrap();
        let ray = Ray::new(v(&[0., 0.]), v(&[h, h])).unwrap();
        let t = ray_ball_intersect(&ray, &ball).unwrap().unwrap();
        assert_abs_diff_eq!(t, 2f64.sqrt() - 0.2, epsilon = 1e-14);
    }

    #[test]
    fn ray_from_inside_is_an_error() {
        let ball = Ball::new(v(&[0., 0.]), 0.2).unwrap();
        let ray = Ray::new(v(&[0.05, 0.]), v(&[1., 0.])).unwrap();
        assert!(matches!(
            ray_ball_intersect(&ray, &ball),
            Err(Error::InsideObstacle { .. })
        ));
    }

    #[test]
    fn ray_leaving_sphere_does_not_rehit() {
        let ball = Ball::new(v(&[0., 0.]), 0.2).unwrap();
        let ray = Ray::new(v(&[0.2, 0.]), v(&[1., 0.])).unwrap();
        assert_eq!(ray_ball_intersect(&ray, &ball).unwrap(), None);
    }

    #[test]
    fn angle_examples() {
        use std::f64::consts::FRAC_PI_2;
        assert_abs_diff_eq!(angle_between(&v(&[1., 0.]), &v(&[0., 1.])).unwrap(), FRAC_PI_2);
        assert_eq!(angle_between(&v(&[1., 0.]), &v(&[1., 0.])).unwrap(), 0.0);
        let a = angle_between(&v(&[1., 1., 1.]), &v(&[1., 1., 0.])).unwrap();
        assert_abs_diff_eq!(a, (2.0 / 6f64.sqrt()).acos(), epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.6154797087, epsilon = 1e-10);
        assert!(angle_between(&v(&[0., 0.]), &v(&[1., 0.])).is_err());
    }

    #[test]
    fn single_precision_smoke() {
        let p = VecN::<f32>::from_f64s(&[1., 0.]);
        let a = VecN::<f32>::from_f64s(&[0., 0.]);
        let b = VecN::<f32>::from_f64s(&[1., 1.]);
        let d = point_segment_distance(&p, &a, &b).unwrap();
        assert!((d - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        let r = reflect_direction(&VecN::<f32>::from_f64s(&[1., 0.]), &VecN::<f32>::from_f64s(&[1., 0.]))
            .unwrap();
        assert_eq!(r.0, vec![-1.0f32, 0.0]);
    }

    #[test]
    fn lattice_helpers() {
        let k = LatticeIndex::new(vec![4, -6]);
        assert_eq!(k.content(), 2);
        assert!(!k.is_primitive());
        assert!(k.is_even());
        assert_eq!(k.to_string(), "(4,-6)");
        assert_eq!(k.inf_norm(), 6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit2() -> impl Strategy<Value = VecN<f64>> {
            (0.0..std::f64::consts::TAU).prop_map(|a| VecN(vec![a.cos(), a.sin()]))
        }

        fn unit3() -> impl Strategy<Value = VecN<f64>> {
            (0.0..std::f64::consts::TAU, -1.0f64..1.0).prop_map(|(a, z)| {
                let s = (1.0 - z * z).sqrt();
                VecN(vec![s * a.cos(), s * a.sin(), z])
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(10_000))]
            #[test]
            fn reflection_is_norm_preserving_involution(v in unit3(), n in unit3()) {
                let r = reflect_direction(&v, &n).unwrap();
                prop_assert!((r.norm() - 1.0).abs() < 1e-12);
                let back = reflect_direction(&r, &n).unwrap();
                prop_assert!(back.max_abs_diff(&v) < 1e-12);
            }
        }

        proptest! {
            #[test]
            fn segment_distance_is_symmetric(
                p in prop::array::uniform2(-5.0f64..5.0),
                a in prop::array::uniform2(-5.0f64..5.0),
                b in prop::array::uniform2(-5.0f64..5.0),
            ) {
                let (p, a, b) = (VecN(p.to_vec()), VecN(a.to_vec()), VecN(b.to_vec()));
                prop_assume!(a != b);
                let d1 = point_segment_distance(&p, &a, &b).unwrap();
                let d2 = point_segment_distance(&p, &b, &a).unwrap();
                prop_assert_eq!(d1.to_bits(), d2.to_bits());
            }

            #[test]
            fn ray_hit_lies_on_sphere(
                o in prop::array::uniform2(-3.0f64..3.0),
                d in unit2(),
                c in prop::array::uniform2(-3.0f64..3.0),
                r in 0.05f64..0.5,
            ) {
                let origin = VecN(o.to_vec());
                let center = VecN(c.to_vec());
                prop_assume!(origin.dist(&center) > r + 1e-6);
                let ball = Ball::new(center.clone(), r).unwrap();
                let ray = Ray::new(origin, d).unwrap();
                if let Some(t) = ray_ball_intersect(&ray, &ball).unwrap() {
                    let hit = ray.at(t);
                    prop_assert!((hit.dist(&center) - r).abs() < 1e-10);
                }
            }
        }
    }
}
