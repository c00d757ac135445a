//! Finite approximations of the admissible rotation set on the torus, and the
//! drift-tracking construction that realizes a prescribed interior rotation
//! vector by concatenating periodic orbits.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{analytic_lower_bounds, st15_upper_bound, LowerBounds, St15Estimate};
use crate::error::{Error, Result};
use crate::geometry::{LatticeIndex, VecN};
use crate::graph::{LoopSpec, TorusGraph};
use crate::hull::{convex_hull, Hull};
use crate::lattice::{BilliardConfig, ConfigDoc, GeometryKind};
use crate::scalar::Scalar;
use crate::solver::{solve_loop, PeriodicOrbit, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationPoint {
    /// Position of the generating loop in the enumeration.
    pub loop_id: usize,
    pub vertices: Vec<LatticeIndex>,
    pub rotation_vector: Vec<f64>,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopFailure {
    pub loop_id: usize,
    pub vertices: Vec<LatticeIndex>,
    pub code: String,
    pub message: String,
}

/// Supporting plane `<normal, x> = offset` through the listed points; in the
/// plane the facets run counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullFacet {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationSetEstimate {
    pub config: ConfigDoc,
    pub max_len: usize,
    pub budget: usize,
    pub loops_enumerated: usize,
    pub points: Vec<RotationPoint>,
    pub failures: Vec<LoopFailure>,
    /// Indices into `points` of the hull vertices.
    pub hull_vertices: Vec<usize>,
    pub hull_facets: Vec<HullFacet>,
    pub inscribed_radius: f64,
    pub bounds: LowerBounds,
    pub st15: Option<St15Estimate>,
}

impl RotationSetEstimate {
    pub fn hull_points(&self) -> Vec<&RotationPoint> {
        self.hull_vertices.iter().map(|&i| &self.points[i]).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.rotation_vector.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Fills in the sampled upper bound.
    pub fn attach_st15(&mut self, g: &TorusGraph, samples: usize) -> Result<&St15Estimate> {
        self.st15 = Some(st15_upper_bound(g, samples)?);
        Ok(self.st15.as_ref().expect("just set"))
    }
}

/// Solves every enumerated loop and takes the hull of the rotation vectors.
pub fn estimate_admissible_hull<T: Scalar>(
    g: &TorusGraph,
    cfg: &BilliardConfig<T>,
    max_len: usize,
    budget: usize,
    opts: &SolverOptions,
) -> Result<RotationSetEstimate> {
    if cfg.geometry != GeometryKind::TorusLift {
        return Err(Error::Config("the rotation set estimate needs a torus configuration".into()));
    }
    let loops = g.enumerate_loops(max_len, budget)?;
    let solved: Vec<Result<PeriodicOrbit<T>>> = loops.par_iter().map(|l| solve_loop(l, cfg, opts)).collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (id, (l, res)) in loops.iter().zip(solved).enumerate() {
        match res {
            Ok(o) => points.push(RotationPoint {
                loop_id: id,
                vertices: l.vertices.clone(),
                rotation_vector: o.rotation_vector.to_f64(),
                length: o.length.to_f64_lossy(),
            }),
            Err(e) => failures.push(LoopFailure {
                loop_id: id,
                vertices: l.vertices.clone(),
                code: e.code().to_string(),
                message: e.to_string(),
            }),
        }
    }
    let coords: Vec<VecN<f64>> = points.iter().map(|p| VecN(p.rotation_vector.clone())).collect();
    let hull = convex_hull(&coords)?;
    Ok(RotationSetEstimate {
        config: cfg.to_doc(),
        max_len,
        budget,
        loops_enumerated: loops.len(),
        inscribed_radius: hull.inscribed_radius(),
        hull_vertices: hull.vertices.clone(),
        hull_facets: hull
            .facets
            .iter()
            .map(|f| HullFacet {
                normal: f.normal.0.clone(),
                offset: f.offset,
                points: f.vertices.clone(),
            })
            .collect(),
        points,
        failures,
        bounds: analytic_lower_bounds(cfg)?,
        st15: None,
    })
}

/// Closes `l` through `v`: `repeats` turns around `l`, then unit-vector
/// connectors out to `v` and back, re-anchored to end at `v`.
pub fn splice_through(
    g: &TorusGraph,
    l: &LoopSpec<LatticeIndex>,
    v: &LatticeIndex,
    repeats: usize,
) -> Result<LoopSpec<LatticeIndex>> {
    if repeats == 0 {
        return Err(Error::InvalidArguments("repeats must be positive".into()));
    }
    if let Some(r) = l.ending_at(v) {
        return Ok(r);
    }
    let mut cycle = Vec::new();
    for _ in 0..repeats {
        cycle.extend(l.vertices.iter().cloned());
    }
    let last = l.vertices.last().expect("loops are nonempty");
    let out = g.connect_via_unit(last, v)?;
    cycle.extend(out[1..].iter().cloned());
    let back = g.connect_via_unit(v, &l.vertices[0])?;
    cycle.extend(back[1..back.len() - 1].iter().cloned());
    let spliced = g.loop_from_vertices(cycle)?;
    Ok(spliced.ending_at(v).expect("v was inserted"))
}

/// Solved base loops through a common vertex, for [`generate_tracking_path`].
pub fn tracking_base<T: Scalar>(
    g: &TorusGraph,
    cfg: &BilliardConfig<T>,
    loops: &[LoopSpec<LatticeIndex>],
    repeats: usize,
    opts: &SolverOptions,
) -> Result<Vec<PeriodicOrbit<T>>> {
    let v = loops
        .first()
        .ok_or(Error::EmptySequence)?
        .vertices
        .last()
        .expect("loops are nonempty")
        .clone();
    let spliced = loops
        .iter()
        .map(|l| splice_through(g, l, &v, repeats))
        .collect::<Result<Vec<_>>>()?;
    spliced.par_iter().map(|l| solve_loop(l, cfg, opts)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingBlock {
    pub orbit: usize,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingRun {
    pub target: Vec<f64>,
    /// Vertex shared by all base loops; every block ends with it.
    pub common_vertex: LatticeIndex,
    pub base_rotation: Vec<Vec<f64>>,
    pub base_length: Vec<f64>,
    /// Slack of `target` against the nearest facet of the base hull.
    pub hull_margin: f64,
    pub blocks: Vec<TrackingBlock>,
    /// Reflection times and `|d(t) - t u|` along the concatenation.
    pub trace: Vec<(f64, f64)>,
    pub total_time: f64,
    pub displacement: Vec<f64>,
    pub deviation_sup: f64,
    pub epsilon: f64,
    pub k: f64,
    pub l: f64,
    pub s: f64,
    /// Declared bound `L + K + s + s|u|`.
    pub m: f64,
}

impl TrackingRun {
    pub fn empirical_rotation(&self) -> Vec<f64> {
        self.displacement.iter().map(|d| d / self.total_time).collect()
    }

    pub fn bound_holds(&self) -> bool {
        self.trace.iter().all(|&(_, dev)| dev <= self.m)
    }
}

/// Step vectors `k_{n+1} - k_n` of one period.
fn orbit_vertices<T: Scalar>(o: &PeriodicOrbit<T>) -> Vec<LatticeIndex> {
    (0..o.ty.len()).map(|n| &o.ty.cell(n + 1) - &o.ty.cell(n)).collect()
}

/// Unit directions covering the sphere, with a covering radius.
fn direction_grid(dim: usize, n: usize) -> (Vec<VecN<f64>>, f64) {
    match dim {
        2 => {
            let dirs = (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    VecN(vec![a.cos(), a.sin()])
                })
                .collect();
            (dirs, std::f64::consts::PI / n as f64)
        }
        _ => {
            // Grid on the faces of the cube, projected radially; the projection
            // does not increase distances outside the unit ball.
            let mut dirs = Vec::new();
            for axis in 0..dim {
                for sign in [-1.0, 1.0] {
                    let mut idx = vec![0usize; dim - 1];
                    loop {
                        let mut p = Vec::with_capacity(dim);
                        let mut it = idx.iter();
                        for a in 0..dim {
                            if a == axis {
                                p.push(sign);
                            } else {
                                let c = *it.next().expect("dim - 1 free axes");
                                p.push(-1.0 + 2.0 * c as f64 / n as f64);
                            }
                        }
                        dirs.push(VecN(p).normalized().expect("nonzero"));
                        let mut a = 0;
                        while a < dim - 1 {
                            idx[a] += 1;
                            if idx[a] <= n {
                                break;
                            }
                            idx[a] = 0;
                            a += 1;
                        }
                        if a == dim - 1 {
                            break;
                        }
                    }
                }
            }
            (dirs, ((dim - 1) as f64).sqrt() / n as f64)
        }
    }
}

/// Distance from unit `x` to the ray `{t v : t >= 0}` shifted to start at `-x`.
fn ray_gap(x: &VecN<f64>, v: &VecN<f64>) -> f64 {
    let nv = v.norm();
    if nv == 0.0 {
        return 1.0;
    }
    let c = x.dot(v) / nv;
    if c < 0.0 { (1.0 - c * c).max(0.0).sqrt() } else { 1.0 }
}

/// Greedy concatenation of base orbits keeping `d(Q) - |Q| u` bounded.
///
/// Each block appends `n` copies of one base orbit, with `(i, n)` minimizing
/// the drift after the block over `n` in `1..=n_max`.
pub fn generate_tracking_path<T: Scalar>(
    u: &VecN<T>,
    base: &[PeriodicOrbit<T>],
    t_total: T,
    cfg: &BilliardConfig<T>,
) -> Result<TrackingRun> {
    if base.is_empty() {
        return Err(Error::EmptySequence);
    }
    if u.dim() != cfg.dim {
        return Err(Error::WrongDimension {
            expected: cfg.dim,
            got: u.dim(),
        });
    }
    let t_total = t_total.to_f64_lossy();
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(Error::InvalidArguments(format!("T must be positive and finite, got {t_total}")));
    }
    let u = VecN(u.to_f64());
    let verts: Vec<Vec<LatticeIndex>> = base.iter().map(orbit_vertices).collect();
    let common = verts[0]
        .iter()
        .find(|v| verts.iter().all(|vs| vs.contains(v)))
        .cloned()
        .ok_or_else(|| Error::InvalidArguments("base loops share no vertex".into()))?;

    let w: Vec<VecN<f64>> = base.iter().map(|o| VecN(o.rotation_vector.to_f64())).collect();
    let len: Vec<f64> = base.iter().map(|o| o.length.to_f64_lossy()).collect();
    let hull: Hull<f64> = convex_hull(&w)?;
    let (margin, facet) = hull.margin(&u);
    if margin <= 1e-9 {
        let f = facet.expect("hull has facets");
        return Err(Error::Rejected(format!(
            "target {:?} is not strictly inside the base hull: facet normal {:?}, offset {:.12}, slack {margin:.3e}",
            u.0, f.normal.0, f.offset
        )));
    }

    let v: Vec<VecN<f64>> = w.iter().zip(&len).map(|(wi, &li)| (wi - &u).scale(li)).collect();
    let (grid, cover) = direction_grid(cfg.dim, 4096);
    let worst = grid
        .iter()
        .map(|x| v.iter().map(|vi| ray_gap(x, vi)).fold(1.0, f64::min))
        .fold(0.0, f64::max);
    let epsilon = 1.0 - (worst + cover);
    if epsilon <= 0.0 {
        return Err(Error::Rejected(format!(
            "target {:?} too close to the hull boundary for the sampled contraction (epsilon {epsilon:.3e})",
            u.0
        )));
    }
    let c = 2.0 * cfg.radius.to_f64_lossy();
    let unorm = u.norm();
    let vmax = v.iter().map(VecN::norm).fold(0.0, f64::max);
    let k = 4.0 * c * (1.0 + unorm);
    let l = (vmax + k) / epsilon;
    let s = len.iter().copied().fold(0.0, f64::max) + 4.0 * c;
    let m = l + k + s + s * unorm;
    let vmin = v.iter().map(VecN::norm).filter(|&n| n > 0.0).fold(f64::INFINITY, f64::min);
    let n_max = ((l / vmin).ceil() as usize).max(1) + 1;

    // Each copy starts right after the common vertex and ends with it.
    let starts: Vec<usize> = verts
        .iter()
        .map(|vs| (vs.iter().position(|x| *x == common).expect("checked") + 1) % vs.len())
        .collect();

    let mut x = VecN::zeros(cfg.dim);
    let mut disp = VecN::zeros(cfg.dim);
    let mut time = 0.0;
    let mut blocks = Vec::new();
    let mut trace = vec![(0.0, 0.0)];
    let mut sup: f64 = 0.0;
    while time < t_total {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, vi) in v.iter().enumerate() {
            let nv2 = vi.norm_sq();
            let cand = if nv2 == 0.0 {
                vec![1]
            } else {
                let t = -x.dot(vi) / nv2;
                let f = t.floor().clamp(1.0, n_max as f64) as usize;
                vec![f, (f + 1).min(n_max)]
            };
            for n in cand {
                let d = x.axpy(n as f64, vi).norm();
                if best.map_or(true, |b| d < b.0) {
                    best = Some((d, i, n));
                }
            }
        }
        let (_, i, n) = best.expect("nonempty base");
        let o = &base[i];
        let q = o.points.len();
        let first = o.lifted_point(starts[i]);
        for _ in 0..n {
            let mut t_in = 0.0;
            for kk in 0..q {
                let p = o.lifted_point(starts[i] + kk);
                if kk > 0 {
                    t_in += o.lifted_point(starts[i] + kk - 1).dist(&p).to_f64_lossy();
                }
                let d = disp.axpy(1.0, &VecN((&p - &first).to_f64()));
                let t = time + t_in;
                let dev = d.axpy(-t, &u).norm();
                sup = sup.max(dev);
                trace.push((t, dev));
            }
            time += len[i];
            disp = disp.axpy(1.0, &VecN(o.displacement.to_f64()));
        }
        x = disp.axpy(-time, &u);
        let dev = x.norm();
        sup = sup.max(dev);
        trace.push((time, dev));
        match blocks.last_mut() {
            Some(TrackingBlock { orbit, repeats }) if *orbit == i => *repeats += n,
            _ => blocks.push(TrackingBlock { orbit: i, repeats: n }),
        }
    }
    Ok(TrackingRun {
        target: u.0.clone(),
        common_vertex: common,
        base_rotation: w.iter().map(|x| x.0.clone()).collect(),
        base_length: len,
        hull_margin: margin,
        blocks,
        trace,
        total_time: time,
        displacement: disp.0,
        deviation_sup: sup,
        epsilon,
        k,
        l,
        s,
        m,
    })
}

/// Loops of the estimate whose rotation vectors span its hull.
pub fn hull_loops(est: &RotationSetEstimate) -> Result<Vec<LoopSpec<LatticeIndex>>> {
    est.hull_points()
        .into_iter()
        .map(|p| LoopSpec::new(p.vertices.clone()))
        .collect()
}
