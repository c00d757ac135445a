//! Convex hulls in the plane and in space, and the radius of the largest ball
//! about the origin that fits inside.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::VecN;
use crate::scalar::Scalar;

/// Degeneracy tolerance for coplanar and collinear points.
pub const HULL_EPS: f64 = 1e-10;

/// A supporting hyperplane `<normal, x> = offset`, `normal` unit and outward.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet<T> {
    pub normal: VecN<T>,
    pub offset: T,
    /// Indices of the input points spanning the facet.
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hull<T> {
    /// Indices into the input of the extreme points, ascending.
    pub vertices: Vec<usize>,
    pub facets: Vec<Facet<T>>,
}

impl<T: Scalar> Hull<T> {
    /// Distance from the origin to the nearest facet plane; negative when the
    /// origin is outside.
    pub fn inscribed_radius(&self) -> T {
        self.facets
            .iter()
            .map(|f| f.offset)
            .fold(T::infinity(), T::min)
    }

    /// Smallest slack `offset - <normal, x>`; positive inside, zero on the boundary.
    pub fn margin(&self, x: &VecN<T>) -> (T, Option<&Facet<T>>) {
        let mut best = (T::infinity(), None);
        for f in &self.facets {
            let s = f.offset - f.normal.dot(x);
            if s < best.0 {
                best = (s, Some(f));
            }
        }
        best
    }
}

pub fn convex_hull<T: Scalar>(points: &[VecN<T>]) -> Result<Hull<T>> {
    let dim = points.first().ok_or(Error::EmptySequence)?.dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::InvalidInput("points of mixed dimension".into()));
    }
    match dim {
        2 => hull_2d(points),
        3 => hull_3d(points),
        d => Err(Error::NotImplemented(format!("convex hull in dimension {d}"))),
    }
}

fn cross2<T: Scalar>(o: &VecN<T>, a: &VecN<T>, b: &VecN<T>) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear boundary points are dropped.
fn hull_2d<T: Scalar>(points: &[VecN<T>]) -> Result<Hull<T>> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p[0].partial_cmp(&q[0])
            .expect("finite")
            .then(p[1].partial_cmp(&q[1]).expect("finite"))
    });
    idx.dedup_by(|a, b| points[*a].max_abs_diff(&points[*b]) <= T::lit(HULL_EPS));
    if idx.len() < 3 {
        return Err(Error::InvalidInput("hull needs three affinely independent points".into()));
    }
    let eps = T::lit(HULL_EPS);
    let mut chain: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = chain.len();
        let seq: Vec<usize> = if pass == 0 { idx.clone() } else { idx.iter().rev().copied().collect() };
        for &i in &seq {
            while chain.len() >= start + 2
                && cross2(&points[chain[chain.len() - 2]], &points[chain[chain.len() - 1]], &points[i]) <= eps
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain.pop();
    }
    if chain.len() < 3 {
        return Err(Error::InvalidInput("points are collinear".into()));
    }
    let n = chain.len();
    let facets = (0..n)
        .map(|e| {
            let (a, b) = (&points[chain[e]], &points[chain[(e + 1) % n]]);
            let d = b - a;
            // Counterclockwise order: the outward normal is the edge turned clockwise.
            let normal = VecN(vec![d[1], -d[0]]).normalized().expect("distinct hull points");
            Facet {
                offset: normal.dot(a),
                normal,
                vertices: vec![chain[e], chain[(e + 1) % n]],
            }
        })
        .collect();
    let mut vertices = chain;
    vertices.sort_unstable();
    Ok(Hull { vertices, facets })
}

fn cross3<T: Scalar>(a: &VecN<T>, b: &VecN<T>) -> VecN<T> {
    VecN(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

struct Tri<T> {
    v: [usize; 3],
    normal: VecN<T>,
    offset: T,
    alive: bool,
}

fn make_tri<T: Scalar>(points: &[VecN<T>], v: [usize; 3], inside: &VecN<T>) -> Tri<T> {
    let (a, b, c) = (&points[v[0]], &points[v[1]], &points[v[2]]);
    let n = cross3(&(b - a), &(c - a));
    let n = n.normalized().unwrap_or_else(|| VecN::zeros(3));
    let mut t = Tri {
        v,
        offset: n.dot(a),
        normal: n,
        alive: true,
    };
    if t.normal.dot(inside) > t.offset {
        t.v.swap(1, 2);
        t.normal = -&t.normal;
        t.offset = -t.offset;
    }
    t
}

/// Incremental (beneath-beyond) hull; points within `HULL_EPS` of a facet
/// plane are treated as not beyond it.
fn hull_3d<T: Scalar>(points: &[VecN<T>]) -> Result<Hull<T>> {
    let eps = T::lit(HULL_EPS);
    let n = points.len();
    let degenerate = || Error::InvalidInput("hull needs four affinely independent points".into());
    let i0 = 0;
    let far = |from: &dyn Fn(&VecN<T>) -> T| {
        (0..n)
            .map(|i| (i, from(&points[i])))
            .fold((0, T::neg_infinity()), |b, x| if x.1 > b.1 { x } else { b })
    };
    let (i1, d1) = far(&|p| p.dist(&points[i0]));
    if d1 <= eps {
        return Err(degenerate());
    }
    let axis = (&points[i1] - &points[i0]).normalized().ok_or_else(degenerate)?;
    let (i2, d2) = far(&|p| {
        let w = p - &points[i0];
        w.axpy(-w.dot(&axis), &axis).norm()
    });
    if d2 <= eps {
        return Err(degenerate());
    }
    let plane_n = cross3(&(&points[i1] - &points[i0]), &(&points[i2] - &points[i0]))
        .normalized()
        .ok_or_else(degenerate)?;
    let (i3, d3) = far(&|p| (p - &points[i0]).dot(&plane_n).abs());
    if d3 <= eps {
        return Err(degenerate());
    }
    let inside = (&(&points[i0] + &points[i1]) + &(&points[i2] + &points[i3])).scale(T::lit(0.25));
    let mut tris: Vec<Tri<T>> = vec![
        make_tri(points, [i0, i1, i2], &inside),
        make_tri(points, [i0, i1, i3], &inside),
        make_tri(points, [i0, i2, i3], &inside),
        make_tri(points, [i1, i2, i3], &inside),
    ];
    let seed = [i0, i1, i2, i3];
    for p in 0..n {
        if seed.contains(&p) {
            continue;
        }
        let x = &points[p];
        let visible: Vec<usize> = (0..tris.len())
            .filter(|&t| tris[t].alive && tris[t].normal.dot(x) - tris[t].offset > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        for &t in &visible {
            let v = tris[t].v;
            for e in 0..3 {
                edges.insert((v[e], v[(e + 1) % 3]));
            }
            tris[t].alive = false;
        }
        let mut horizon: Vec<(usize, usize)> =
            edges.iter().filter(|(a, b)| !edges.contains(&(*b, *a))).copied().collect();
        horizon.sort_unstable();
        for (a, b) in horizon {
            tris.push(make_tri(points, [a, b, p], &inside));
        }
    }
    let facets: Vec<Facet<T>> = tris
        .into_iter()
        .filter(|t| t.alive)
        .map(|t| Facet {
            normal: t.normal,
            offset: t.offset,
            vertices: t.v.to_vec(),
        })
        .collect();
    let mut vertices: Vec<usize> = facets.iter().flat_map(|f| f.vertices.iter().copied()).collect();
    vertices.sort_unstable();
    vertices.dedup();
    Ok(Hull { vertices, facets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> VecN<f64> {
        VecN(c.to_vec())
    }

    #[test]
    fn square_in_plane() {
        let pts = vec![v(&[1., 0.]), v(&[0., 1.]), v(&[-1., 0.]), v(&[0., -1.]), v(&[0.1, 0.1]), v(&[0.5, 0.5])];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices, vec![0, 1, 2, 3]);
        assert!((h.inscribed_radius() - 0.5f64.sqrt()).abs() < 1e-12);
        let (m, _) = h.margin(&v(&[0.0, 0.0]));
        assert!(m > 0.7);
    }

    #[test]
    fn cube_in_space() {
        let mut pts = Vec::new();
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    pts.push(v(&[x, y, z]));
                }
            }
        }
        pts.push(v(&[0.2, 0.3, -0.1]));
        pts.push(v(&[1.0, 0.0, 0.0]));
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices, (0..8).collect::<Vec<_>>());
        assert!((h.inscribed_radius() - 1.0).abs() < 1e-12);
        for p in &pts {
            assert!(h.margin(p).0 >= -1e-12);
        }
    }

    #[test]
    fn octahedron_radius() {
        let mut pts = Vec::new();
        for i in 0..3 {
            for s in [-1.0, 1.0] {
                let mut c = vec![0.0; 3];
                c[i] = s;
                pts.push(v(&c));
            }
        }
        let h = convex_hull(&pts).unwrap();
        assert!((h.inscribed_radius() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(convex_hull(&[v(&[0., 0.]), v(&[1., 1.]), v(&[2., 2.])]).is_err());
        assert!(convex_hull(&[v(&[0., 0., 0.]), v(&[1., 0., 0.]), v(&[0., 1., 0.]), v(&[1., 1., 0.])]).is_err());
        assert!(convex_hull::<f64>(&[]).is_err());
    }
}
