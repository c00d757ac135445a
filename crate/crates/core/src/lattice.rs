//! Periodic obstacle configurations and the betweenness predicate.
//!
//! Two geometries are supported. In the torus lifting the obstacle `O_k` is the
//! ball of radius `r` centered at `k`. In the square unfolding the plane is
//! tiled by reflected copies of `[-1/2, 1/2]^2`, so the obstacle in the cell
//! `k = (p, q)` is centered at `(p + (-1)^p c_x, q + (-1)^q c_y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_distance_unchecked, Ball, LatticeIndex, VecN};
use crate::scalar::{tol, Scalar};

/// `sqrt(2)/4`, the radius bound for a small obstacle.
pub const SMALL_OBSTACLE_BOUND: f64 = std::f64::consts::SQRT_2 / 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    /// Translated copies at Z^m.
    #[serde(rename = "torus")]
    TorusLift,
    /// Reflected copies of the unit square, m = 2.
    #[serde(rename = "square")]
    SquareUnfold,
}

/// The on-disk configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub geometry: GeometryKind,
    pub dim: usize,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilliardConfig<T> {
    pub dim: usize,
    pub radius: T,
    /// Obstacle center inside the fundamental cell; always zero for the torus.
    pub center: VecN<T>,
    pub geometry: GeometryKind,
}

impl<T: Scalar> BilliardConfig<T> {
    pub fn torus(dim: usize, radius: T) -> Result<Self> {
        let cfg = BilliardConfig {
            dim,
            radius,
            center: VecN::zeros(dim),
            geometry: GeometryKind::TorusLift,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn square(radius: T, center: [T; 2]) -> Result<Self> {
        let cfg = BilliardConfig {
            dim: 2,
            radius,
            center: VecN(center.to_vec()),
            geometry: GeometryKind::SquareUnfold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_doc(doc: &ConfigDoc) -> Result<Self> {
        let radius = T::lit(doc.radius);
        match doc.geometry {
            GeometryKind::TorusLift => {
                if let Some(c) = &doc.center {
                    if c.iter().any(|&x| x != 0.0) {
                        return Err(Error::Config(
                            "torus obstacle is centered at the lattice; center must be omitted or zero"
                                .into(),
                        ));
                    }
                }
                Self::torus(doc.dim, radius)
            }
            GeometryKind::SquareUnfold => {
                if doc.dim != 2 {
                    return Err(Error::Config(format!(
                        "square geometry requires dim = 2, got {}",
                        doc.dim
                    )));
                }
                let c = doc.center.clone().unwrap_or_else(|| vec![0.0, 0.0]);
                if c.len() != 2 {
                    return Err(Error::Config(format!(
                        "square center needs 2 coordinates, got {}",
                        c.len()
                    )));
                }
                Self::square(radius, [T::lit(c[0]), T::lit(c[1])])
            }
        }
    }

    pub fn to_doc(&self) -> ConfigDoc {
        ConfigDoc {
            geometry: self.geometry,
            dim: self.dim,
            radius: self.radius.to_f64_lossy(),
            center: match self.geometry {
                GeometryKind::TorusLift => None,
                GeometryKind::SquareUnfold => Some(self.center.to_f64()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bound = T::lit(SMALL_OBSTACLE_BOUND);
        if self.dim < 2 {
            return Err(Error::Config(format!("dimension must be at least 2, got {}", self.dim)));
        }
        if !(self.radius > T::zero()) || !self.radius.is_finite() {
            return Err(Error::Config(format!("radius must be positive, got {}", self.radius)));
        }
        if self.radius >= bound {
            return Err(Error::Config(format!(
                "small obstacle violation: radius {} must be < sqrt(2)/4 = {SMALL_OBSTACLE_BOUND}",
                self.radius
            )));
        }
        if self.center.dim() != self.dim || !self.center.is_finite() {
            return Err(Error::Config("center has the wrong dimension".into()));
        }
        if self.geometry == GeometryKind::SquareUnfold {
            if self.dim != 2 {
                return Err(Error::Config("square geometry requires dim = 2".into()));
            }
            if self.center.norm() + self.radius >= bound {
                return Err(Error::Config(format!(
                    "small obstacle violation: |center| + radius = {} must be < sqrt(2)/4",
                    self.center.norm() + self.radius
                )));
            }
        } else if self.center.iter().any(|&x| x != T::zero()) {
            return Err(Error::Config("torus obstacle must be centered at the lattice".into()));
        }
        Ok(())
    }

    pub fn is_square(&self) -> bool {
        self.geometry == GeometryKind::SquareUnfold
    }

    /// Obstacle diameter, `c = 2r`.
    pub fn diameter(&self) -> T {
        self.radius + self.radius
    }

    pub fn origin(&self) -> LatticeIndex {
        LatticeIndex::zero(self.dim)
    }

    pub fn obstacle_center(&self, k: &LatticeIndex) -> VecN<T> {
        let mut x = k.to_vec::<T>();
        if self.is_square() {
            for (i, &ki) in k.0.iter().enumerate() {
                if ki.rem_euclid(2) == 0 {
                    x[i] += self.center[i];
                } else {
                    x[i] -= self.center[i];
                }
            }
        }
        x
    }

    pub fn obstacle(&self, k: &LatticeIndex) -> Ball<T> {
        Ball {
            center: self.obstacle_center(k),
            radius: self.radius,
        }
    }

    /// Whether `O_k` meets the convex hull of `O_i` and `O_j`.
    ///
    /// For equal balls the hull is the radius-`r` capsule around the center
    /// segment, so the test is `dist(center_k, [center_i, center_j]) <= 2r`.
    /// Tangency counts as between.
    pub fn is_between(&self, k: &LatticeIndex, i: &LatticeIndex, j: &LatticeIndex) -> Result<bool> {
        if k == i || k == j {
            return Err(Error::InvalidArguments(format!(
                "{k} must differ from both endpoints {i} and {j}"
            )));
        }
        if i == j {
            return Err(Error::InvalidArguments(format!("endpoints coincide: {i}")));
        }
        Ok(self.between_unchecked(k, i, j))
    }

    pub(crate) fn between_unchecked(&self, k: &LatticeIndex, i: &LatticeIndex, j: &LatticeIndex) -> bool {
        let ck = self.obstacle_center(k);
        let ci = self.obstacle_center(i);
        let cj = self.obstacle_center(j);
        let d = segment_distance_unchecked(&ck, &ci, &cj);
        d <= self.diameter() + T::tol(tol::BETWEEN)
    }

    /// Every lattice point within `2r + 1` of the center segment `[c_i, c_j]`,
    /// excluding `i` and `j`. A superset of the obstacles that can be between.
    pub fn candidate_blockers(&self, i: &LatticeIndex, j: &LatticeIndex) -> Vec<LatticeIndex> {
        let ci = self.obstacle_center(i);
        let cj = self.obstacle_center(j);
        let reach = self.diameter() + T::one();
        let lo: Vec<i64> = (0..self.dim)
            .map(|d| (ci[d].min(cj[d]) - reach).floor().to_i64().unwrap_or(0))
            .collect();
        let hi: Vec<i64> = (0..self.dim)
            .map(|d| (ci[d].max(cj[d]) + reach).ceil().to_i64().unwrap_or(0))
            .collect();
        let mut out = Vec::new();
        for_each_in_box(&lo, &hi, |k| {
            if &k == i || &k == j {
                return;
            }
            let d = segment_distance_unchecked(&k.to_vec::<T>(), &ci, &cj);
            if d <= reach {
                out.push(k);
            }
        });
        out
    }

    /// True when some obstacle is between `O_i` and `O_j`.
    pub fn is_blocked(&self, i: &LatticeIndex, j: &LatticeIndex) -> bool {
        self.candidate_blockers(i, j)
            .iter()
            .any(|k| self.between_unchecked(k, i, j))
    }
}

/// Parity class of a planar lattice index: `zeta(k)` with `k - zeta(k)` even.
pub fn zeta(k: &LatticeIndex) -> Result<LatticeIndex> {
    if k.dim() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: k.dim(),
        });
    }
    Ok(parity(k))
}

pub(crate) fn parity(k: &LatticeIndex) -> LatticeIndex {
    LatticeIndex(k.0.iter().map(|c| c.rem_euclid(2)).collect())
}

/// The four parity classes `Q`, in lexicographic order.
pub fn parity_classes() -> [LatticeIndex; 4] {
    [
        LatticeIndex(vec![0, 0]),
        LatticeIndex(vec![0, 1]),
        LatticeIndex(vec![1, 0]),
        LatticeIndex(vec![1, 1]),
    ]
}

/// Visits every lattice point of the box `lo..=hi` in lexicographic order.
pub(crate) fn for_each_in_box(lo: &[i64], hi: &[i64], mut f: impl FnMut(LatticeIndex)) {
    let dim = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut cur = lo.to_vec();
    loop {
        f(LatticeIndex(cur.clone()));
        let mut axis = dim;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                for a in axis + 1..dim {
                    cur[a] = lo[a];
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn li(c: &[i64]) -> LatticeIndex {
        LatticeIndex(c.to_vec())
    }

    fn torus(r: f64) -> BilliardConfig<f64> {
        BilliardConfig::torus(2, r).unwrap()
    }

    #[test]
    fn obstacle_center_examples() {
        assert_eq!(torus(0.2).obstacle_center(&li(&[2, -1])).0, vec![2.0, -1.0]);
        let sq = BilliardConfig::<f64>::square(0.1, [0.1, 0.05]).unwrap();
        let c = sq.obstacle_center(&li(&[1, 0]));
        assert!((c[0] - 0.9).abs() < 1e-15 && (c[1] - 0.05).abs() < 1e-15);
        let c = sq.obstacle_center(&li(&[1, 1]));
        assert!((c[0] - 0.9).abs() < 1e-15 && (c[1] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(&li(&[4, 6])).unwrap(), li(&[0, 0]));
        assert_eq!(zeta(&li(&[3, 6])).unwrap(), li(&[1, 0]));
        assert_eq!(zeta(&li(&[-1, -3])).unwrap(), li(&[1, 1]));
        assert!(matches!(zeta(&li(&[1, 2, 3])), Err(Error::WrongDimension { .. })));
    }

    #[test]
    fn betweenness_examples() {
        let t = torus(0.2);
        assert!(t.is_between(&li(&[1, 0]), &li(&[0, 0]), &li(&[2, 0])).unwrap());
        assert!(!t.is_between(&li(&[1, 0]), &li(&[0, 0]), &li(&[1, 1])).unwrap());
        assert!(!t.is_between(&li(&[1, 1]), &li(&[0, 0]), &li(&[2, 1])).unwrap());
        assert!(torus(0.23).is_between(&li(&[1, 1]), &li(&[0, 0]), &li(&[2, 1])).unwrap());
        assert!(matches!(
            t.is_between(&li(&[0, 0]), &li(&[0, 0]), &li(&[2, 0])),
            Err(Error::InvalidArguments(_))
        ));
    }

    #[test]
    fn candidate_blocker_examples() {
        let t = torus(0.2);
        let c = t.candidate_blockers(&li(&[0, 0]), &li(&[1, 0]));
        assert!(!c.contains(&li(&[0, 0])) && !c.contains(&li(&[1, 0])));
        assert!(c.iter().all(|k| !t.between_unchecked(k, &li(&[0, 0]), &li(&[1, 0]))));
        let c = t.candidate_blockers(&li(&[0, 0]), &li(&[2, 0]));
        assert!(c.contains(&li(&[1, 0])));
        let c = t.candidate_blockers(&li(&[0, 0]), &li(&[3, 2]));
        assert!(c.contains(&li(&[1, 1])) && c.contains(&li(&[2, 1])));
    }

    #[test]
    fn candidate_blockers_cover_brute_force() {
        for &r in &[0.1, 0.2, 0.3] {
            let t = torus(r);
            let i = li(&[0, 0]);
            for a in -4..=4 {
                for b in -4..=4 {
                    let j = li(&[a, b]);
                    if j == i {
                        continue;
                    }
                    let cands = t.candidate_blockers(&i, &j);
                    for x in -8..=8 {
                        for y in -8..=8 {
                            let k = li(&[x, y]);
                            if k != i && k != j && t.between_unchecked(&k, &i, &j) {
                                assert!(cands.contains(&k), "{k} missing for {j} at r={r}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn config_gates() {
        assert!(BilliardConfig::<f64>::torus(2, 0.36).is_err());
        assert!(BilliardConfig::<f64>::torus(1, 0.2).is_err());
        assert!(BilliardConfig::<f64>::square(0.3, [0.1, 0.0]).is_err());
        let doc: ConfigDoc =
            serde_json::from_str(r#"{"geometry":"square","dim":2,"radius":0.2,"center":[0.05,0]}"#)
                .unwrap();
        let cfg = BilliardConfig::<f64>::from_doc(&doc).unwrap();
        assert!(cfg.is_square());
        assert_eq!(cfg.to_doc(), doc);
        let doc: ConfigDoc = serde_json::from_str(r#"{"geometry":"torus","dim":3,"radius":0.1}"#).unwrap();
        assert_eq!(BilliardConfig::<f64>::from_doc(&doc).unwrap().dim, 3);
    }

    fn all_in_window(n: i64) -> Vec<LatticeIndex> {
        let mut v = Vec::new();
        for_each_in_box(&[-n, -n], &[n, n], |k| v.push(k));
        v
    }

    #[test]
    fn torus_symmetries() {
        let pts = all_in_window(3);
        for &r in &[0.1, 0.2, 0.3] {
            let t = torus(r);
            let shift = li(&[2, -1]);
            for i in &pts {
                for j in &pts {
                    if i == j {
                        continue;
                    }
                    for k in &pts {
                        if k == i || k == j {
                            continue;
                        }
                        let b = t.between_unchecked(k, i, j);
                        assert_eq!(b, t.between_unchecked(k, j, i));
                        assert_eq!(b, t.between_unchecked(&(k + &shift), &(i + &shift), &(j + &shift)));
                    }
                }
            }
        }
    }

    #[test]
    fn central_symmetry_of_betweenness() {
        let pts = all_in_window(4);
        let o = li(&[0, 0]);
        for &r in &[0.1, 0.2, 0.3] {
            let t = torus(r);
            for k in &pts {
                for j in &pts {
                    let s = k + j;
                    if k.is_zero() || j.is_zero() || s.is_zero() || k == &s || j == &s {
                        continue;
                    }
                    assert_eq!(
                        t.between_unchecked(k, &o, &s),
                        t.between_unchecked(j, &o, &s),
                        "k={k} j={j} r={r}"
                    );
                }
            }
        }
    }

    #[test]
    fn sine_bound_for_blockers() {
        let pts = all_in_window(4);
        let o = li(&[0, 0]);
        for &r in &[0.1, 0.2, 0.3] {
            let t = torus(r);
            for k in &pts {
                for l in &pts {
                    if k.is_zero() || l.is_zero() || k == l {
                        continue;
                    }
                    if t.between_unchecked(l, &o, k) {
                        let theta = crate::geometry::angle_between(&k.to_vec::<f64>(), &l.to_vec()).unwrap();
                        assert!(theta.sin() <= 2.0 * r / l.norm::<f64>() + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn nonpositive_scalar_product_never_blocks() {
        let pts = all_in_window(3);
        let o = li(&[0, 0]);
        for &r in &[0.1, 0.2, 0.3, 0.35] {
            let t = torus(r);
            for k in &pts {
                for l in &pts {
                    let s = k + l;
                    if k.is_zero() || l.is_zero() || s.is_zero() || k.dot(l) > 0 {
                        continue;
                    }
                    assert!(!t.between_unchecked(k, &o, &s), "k={k} l={l}");
                }
            }
        }
    }

    #[test]
    fn centered_square_matches_torus() {
        let pts = all_in_window(4);
        let t = torus(0.2);
        let s = BilliardConfig::square(0.2, [0.0, 0.0]).unwrap();
        for i in &pts {
            for j in &pts {
                if i == j {
                    continue;
                }
                for k in pts.iter().filter(|k| k.inf_norm() <= 2) {
                    if k == i || k == j {
                        continue;
                    }
                    assert_eq!(t.between_unchecked(k, i, j), s.between_unchecked(k, i, j));
                }
            }
        }
    }
}
