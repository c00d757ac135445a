//! Closed-form and enumerated constants bounding the admissible rotation set.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{angle_between, ray_sphere_roots, reflect_unchecked, LatticeIndex, VecN};
use crate::graph::TorusGraph;
use crate::lattice::{BilliardConfig, GeometryKind, SMALL_OBSTACLE_BOUND};
use crate::scalar::Scalar;

/// `eta(r) = sum_{n >= 0} arcsin(r / 2^(n-1))`, to within `eps`.
///
/// The tail after `N` terms is at most `(pi/2) sum_{n >= N} r/2^(n-1) = pi r / 2^(N-1)`.
pub fn eta<T: Scalar>(r: T, eps: T) -> Result<T> {
    check_radius(r)?;
    if !(eps > T::zero()) {
        return Err(Error::InvalidArguments(format!("eps must be positive, got {eps}")));
    }
    let mut sum = T::zero();
    let mut x = r + r;
    let mut tail = T::PI() * r * T::lit(2.0);
    while tail >= eps && x > T::zero() {
        sum += x.asin();
        x = x * T::lit(0.5);
        tail = tail * T::lit(0.5);
    }
    Ok(sum)
}

/// Partial sum of the first `terms` terms of the `eta` series.
pub fn eta_terms<T: Scalar>(r: T, terms: usize) -> Result<T> {
    check_radius(r)?;
    let mut sum = T::zero();
    let mut x = r + r;
    for _ in 0..terms {
        sum += x.asin();
        x = x * T::lit(0.5);
    }
    Ok(sum)
}

fn check_radius<T: Scalar>(r: T) -> Result<()> {
    if !(r > T::zero()) || r > T::lit(SMALL_OBSTACLE_BOUND) {
        return Err(Error::OutOfRange(format!("radius {r} must lie in (0, sqrt(2)/4]")));
    }
    Ok(())
}

/// Smallest positive angle between vectors of `Z^dim` with norm `< n`.
///
/// Up to signed permutations the first vector is a sorted multiset of
/// nonnegative components; for each such `u` a dynamic program over the
/// coordinates of `v` collects every reachable `(|v|^2, <u,v>)`. Candidate
/// cosines are compared exactly in integers.
pub fn beta(n: u32, dim: usize) -> Result<f64> {
    if n > 3 {
        return Err(Error::NotImplemented(format!("beta({n}) needs n <= 3")));
    }
    if n < 2 || dim < 2 {
        return Err(Error::InvalidArguments(format!("beta needs n >= 2 and dim >= 2, got n={n}, dim={dim}")));
    }
    let max_sq = (n * n - 1) as i64;
    let bound = (max_sq as f64).sqrt().floor() as i64;
    // Best cosine so far as (dot^2, |u|^2 |v|^2) with positive dot.
    let mut best: Option<(i128, i128)> = None;
    let mut u = Vec::new();
    multisets(dim, bound, max_sq, &mut u, &mut |u: &[i64]| {
        let nu: i64 = u.iter().map(|x| x * x).sum();
        if nu == 0 {
            return;
        }
        let mut states: HashSet<(i64, i64)> = HashSet::from([(0, 0)]);
        for &ui in u {
            let mut next = HashSet::new();
            for &(nv, d) in &states {
                for vi in -bound..=bound {
                    let nv2 = nv + vi * vi;
                    if nv2 <= max_sq {
                        next.insert((nv2, d + ui * vi));
                    }
                }
            }
            states = next;
        }
        for (nv, d) in states {
            if nv == 0 || d <= 0 {
                continue;
            }
            let (num, den) = ((d * d) as i128, (nu * nv) as i128);
            if num >= den {
                continue;
            }
            if best.map_or(true, |(bn, bd)| num * bd > bn * den) {
                best = Some((num, den));
            }
        }
    });
    let (num, den) = best.expect("two independent short vectors exist for dim >= 2");
    Ok(((num as f64) / (den as f64)).sqrt().acos())
}

fn multisets(dim: usize, bound: i64, max_sq: i64, cur: &mut Vec<i64>, f: &mut dyn FnMut(&[i64])) {
    if cur.len() == dim {
        f(cur);
        return;
    }
    let lo = cur.last().copied().unwrap_or(0);
    let used: i64 = cur.iter().map(|x| x * x).sum();
    for x in lo..=bound {
        if used + x * x > max_sq {
            break;
        }
        cur.push(x);
        multisets(dim, bound, max_sq, cur, f);
        cur.pop();
    }
}

/// Largest `N` in `{2, 3}` with `eta(r) < beta(N, min(m, 2N^2 - 2)) / 2`.
pub fn n_of_r(r: f64, m: usize) -> Result<Option<u32>> {
    let e = eta(r, 1e-12)?;
    let mut out = None;
    for n in 2..=3u32 {
        let dim = m.min((2 * n * n - 2) as usize);
        if e < beta(n, dim)? / 2.0 {
            out = Some(n);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBounds {
    /// `sqrt(2 / (ln m + 5))`.
    pub dim_bound: f64,
    /// `(1 - sqrt(2)/2) cos(eta(r))`.
    pub st10: f64,
    /// `((N-1)/(N+1)) cos(2 eta(r))`, when `N(r)` is defined.
    pub st13: Option<f64>,
    pub n_of_r: Option<u32>,
    pub eta: f64,
    pub best: f64,
}

pub fn analytic_lower_bounds<T: Scalar>(cfg: &BilliardConfig<T>) -> Result<LowerBounds> {
    if cfg.geometry != GeometryKind::TorusLift {
        return Err(Error::Config("analytic bounds are stated for the torus".into()));
    }
    let r = cfg.radius.to_f64_lossy();
    let m = cfg.dim;
    let e = eta(r, 1e-12)?;
    let dim_bound = (2.0 / ((m as f64).ln() + 5.0)).sqrt();
    let st10 = (1.0 - std::f64::consts::SQRT_2 / 2.0) * e.cos();
    let n = n_of_r(r, m)?;
    let st13 = n.map(|n| ((n as f64 - 1.0) / (n as f64 + 1.0)) * (2.0 * e).cos());
    let best = st13.unwrap_or(f64::NEG_INFINITY).max(dim_bound).max(st10);
    Ok(LowerBounds {
        dim_bound,
        st10,
        st13,
        n_of_r: n,
        eta: e,
        best,
    })
}

/// Sampled estimate of the open-ball upper bound; not a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct St15Estimate {
    /// Shortest possible free flight between reflections, `min |l| - 2r`.
    pub c1: f64,
    /// Longest possible free flight, `max |l| + 2r`.
    pub c2: f64,
    /// Smallest turn found at a reflection.
    pub alpha_est: f64,
    pub a: f64,
    /// Boundary points per obstacle in the starting grid.
    pub grid: usize,
}

/// Turn angle at `x` for a ray coming from `y` and reflecting into `O_i`, if
/// the configuration is realizable.
fn turn_angle<T: Scalar>(y: &VecN<T>, x: &VecN<T>, cy: &VecN<T>, cx: &VecN<T>, ci: &VecN<T>, r: T) -> Option<T> {
    let din = (x - y).normalized()?;
    let nx = (x - cx).scale(T::one() / r);
    let ny = (y - cy).scale(T::one() / r);
    // Leave O_{-j} outward and arrive at the near side of O_0.
    if din.dot(&ny) < T::zero() || din.dot(&nx) >= T::zero() {
        return None;
    }
    let dout = reflect_unchecked(&din, &nx);
    ray_sphere_roots(&(x - ci), &dout, r)?;
    angle_between(&din, &dout).ok()
}

fn sphere_grid(dim: usize, n: usize) -> Vec<Vec<f64>> {
    match dim {
        2 => (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci points on S^2, padded with zeros beyond three coordinates.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    let mut v = vec![0.0; dim];
                    v[0] = rho * a.cos();
                    v[1] = rho * a.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Sphere point from free parameters (angle in the plane, spherical angles in space).
fn param_point(dim: usize, c: &[f64], r: f64, p: &[f64]) -> VecN<f64> {
    let dir = if dim == 2 {
        vec![p[0].cos(), p[0].sin()]
    } else {
        let mut d = vec![0.0; dim];
        d[0] = p[1].sin() * p[0].cos();
        d[1] = p[1].sin() * p[0].sin();
        d[2] = p[1].cos();
        d
    };
    VecN(c.iter().zip(dir).map(|(ci, di)| ci + r * di).collect())
}

fn params_of(dim: usize, d: &[f64]) -> Vec<f64> {
    if dim == 2 {
        vec![d[1].atan2(d[0])]
    } else {
        vec![d[1].atan2(d[0]), d[2].max(-1.0).min(1.0).acos()]
    }
}

/// Minimum turn over one edge `j -> i`: grid search then pattern search.
fn edge_alpha(j: &LatticeIndex, i: &LatticeIndex, r: f64, grid: &[Vec<f64>]) -> Option<f64> {
    let dim = j.dim();
    let cy: VecN<f64> = (-j).to_vec();
    let cx: VecN<f64> = VecN::zeros(dim);
    let ci: VecN<f64> = i.to_vec();
    let eval = |py: &[f64], px: &[f64]| {
        let y = param_point(dim, &cy.0, r, py);
        let x = param_point(dim, &cx.0, r, px);
        turn_angle(&y, &x, &cy, &cx, &ci, r)
    };
    let mut starts: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for gy in grid {
        for gx in grid {
            let y = cy.axpy(r, &VecN(gy.clone()));
            let x = cx.axpy(r, &VecN(gx.clone()));
            if let Some(a) = turn_angle(&y, &x, &cy, &cx, &ci, r) {
                starts.push((a, params_of(dim, gy), params_of(dim, gx)));
            }
        }
    }
    starts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let mut best: Option<f64> = None;
    for (a0, py0, px0) in starts.into_iter().take(2) {
        let mut cur = (a0, py0, px0);
        let mut h = std::f64::consts::TAU / grid.len() as f64;
        while h > 1e-9 {
            let mut improved = false;
            let np = cur.1.len();
            for k in 0..2 * np {
                for s in [-h, h] {
                    let (mut py, mut px) = (cur.1.clone(), cur.2.clone());
                    if k < np {
                        py[k] += s;
                    } else {
                        px[k - np] += s;
                    }
                    if let Some(a) = eval(&py, &px) {
                        if a < cur.0 {
                            cur = (a, py, px);
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best = Some(best.map_or(cur.0, |b: f64| b.min(cur.0)));
    }
    best
}

/// `c1`, `c2`, a sampled minimum turn angle and the resulting ratio `a`.
pub fn st15_upper_bound(g: &TorusGraph, samples: usize) -> Result<St15Estimate> {
    if g.vertex_count() == 0 {
        return Err(Error::InvalidInput("empty graph".into()));
    }
    let r = g.radius;
    let norms: Vec<f64> = g.vertices().iter().map(|v| v.norm::<f64>()).collect();
    let c1 = norms.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * r;
    let c2 = norms.iter().copied().fold(0.0, f64::max) + 2.0 * r;
    let grid = sphere_grid(g.dim, samples.max(8));
    let edges: Vec<(LatticeIndex, LatticeIndex)> = g.edges().map(|(a, b)| (a.clone(), b.clone())).collect();
    let alpha = edges
        .par_iter()
        .filter_map(|(j, i)| edge_alpha(j, i, r, &grid))
        .reduce(|| f64::INFINITY, f64::min);
    if !alpha.is_finite() {
        return Err(Error::Invariant("no realizable reflection found on any edge".into()));
    }
    let a = (c1 * c1 + c2 * c2 + 2.0 * c1 * c2 * alpha.cos()).sqrt() / (c1 + c2);
    Ok(St15Estimate {
        c1,
        c2,
        alpha_est: alpha,
        a,
        grid: grid.len(),
    })
}
