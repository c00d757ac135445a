//! Rotation numbers in the unit square: winding of the folded trajectory
//! around a point of the obstacle.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{fold_point, simulate, FlowState, TrajectoryRecord};
use crate::geometry::{LatticeIndex, VecN};
use crate::graph::{GraphVertex, LoopSpec, SquareGraph, SquareVertex};
use crate::lattice::{BilliardConfig, GeometryKind};
use crate::scalar::Scalar;
use crate::solver::{solve_loop, PeriodicOrbit, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct WindingTrace<T> {
    pub z: VecN<T>,
    /// Sum of the angle increments, in radians.
    pub total: T,
    /// Increment of each straight piece of the folded path.
    pub increments: Vec<T>,
}

impl<T: Scalar> WindingTrace<T> {
    /// `total / 2 pi`.
    pub fn winding(&self) -> T {
        self.total / T::TAU()
    }
}

fn check_square<T: Scalar>(cfg: &BilliardConfig<T>) -> Result<()> {
    if cfg.geometry != GeometryKind::SquareUnfold {
        return Err(Error::Config("winding numbers need a square configuration".into()));
    }
    Ok(())
}

fn check_reference<T: Scalar>(z: &VecN<T>, cfg: &BilliardConfig<T>) -> Result<()> {
    if z.dim() != 2 {
        return Err(Error::WrongDimension { expected: 2, got: z.dim() });
    }
    let c = cfg.obstacle_center(&cfg.origin());
    if !(z.dist(&c) < cfg.radius) {
        return Err(Error::InvalidReference(format!(
            "{:?} is not strictly inside the obstacle",
            z.to_f64()
        )));
    }
    Ok(())
}

fn lex_less<T: Scalar>(a: &VecN<T>, b: &VecN<T>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Pieces of the unfolded segment `a -> b` between wall crossings, each folded
/// into the fundamental square.
fn fold_segment<T: Scalar>(a: &VecN<T>, b: &VecN<T>) -> Vec<(VecN<T>, VecN<T>)> {
    // Split from the lexicographically smaller end so that reversing a path
    // reverses its pieces exactly.
    if lex_less(b, a) {
        let mut v = fold_segment(b, a);
        v.reverse();
        for p in &mut v {
            std::mem::swap(&mut p.0, &mut p.1);
        }
        return v;
    }
    let half = T::lit(0.5);
    let d = b - a;
    let mut cuts = vec![T::zero(), T::one()];
    for i in 0..a.dim() {
        if d[i] == T::zero() {
            continue;
        }
        let (lo, hi) = if a[i] < b[i] { (a[i], b[i]) } else { (b[i], a[i]) };
        let mut h = (lo - half).ceil() + half;
        while h < hi {
            if h > lo {
                cuts.push((h - a[i]) / d[i]);
            }
            h += T::one();
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (p, q) = (a.axpy(w[0], &d), a.axpy(w[1], &d));
            let mid = a.axpy((w[0] + w[1]) * half, &d);
            let cell = LatticeIndex(mid.iter().map(|x| x.round().to_i64().unwrap_or(0)).collect());
            (fold_point(&p, &cell), fold_point(&q, &cell))
        })
        .collect()
}

/// Folded pieces of an unfolded polyline.
pub fn folded_pieces<T: Scalar>(points: &[VecN<T>]) -> Vec<(VecN<T>, VecN<T>)> {
    points.windows(2).flat_map(|w| fold_segment(&w[0], &w[1])).collect()
}

fn increment<T: Scalar>(p: &VecN<T>, q: &VecN<T>, z: &VecN<T>) -> T {
    let (a, b) = (p - z, q - z);
    let cross = a[0] * b[1] - a[1] * b[0];
    cross.atan2(a.dot(&b))
}

/// Winding of an unfolded square polyline around `z`.
pub fn winding_trace<T: Scalar>(points: &[VecN<T>], z: &VecN<T>, cfg: &BilliardConfig<T>) -> Result<WindingTrace<T>> {
    check_square(cfg)?;
    check_reference(z, cfg)?;
    let increments: Vec<T> = folded_pieces(points).iter().map(|(p, q)| increment(p, q, z)).collect();
    let total = increments.iter().fold(T::zero(), |s, &x| s + x);
    Ok(WindingTrace {
        z: z.clone(),
        total,
        increments,
    })
}

pub fn winding_displacement<T: Scalar>(rec: &TrajectoryRecord<T>, z: &VecN<T>, cfg: &BilliardConfig<T>) -> Result<T> {
    if rec.geometry != GeometryKind::SquareUnfold {
        return Err(Error::InvalidArguments("record is not a square trajectory".into()));
    }
    Ok(winding_trace(&rec.polyline(), z, cfg)?.winding())
}

pub fn winding_rotation<T: Scalar>(rec: &TrajectoryRecord<T>, z: &VecN<T>, cfg: &BilliardConfig<T>) -> Result<T> {
    let t = rec.elapsed();
    if !(t > T::zero()) {
        return Err(Error::ZeroTime);
    }
    Ok(winding_displacement(rec, z, cfg)? / t)
}

/// One period `x_0, ..., x_q` of a square periodic orbit, unfolded.
pub fn orbit_polyline<T: Scalar>(o: &PeriodicOrbit<T>) -> Vec<VecN<T>> {
    (0..=o.points.len()).map(|n| o.lifted_point(n)).collect()
}

/// Winding per unit length of one period, about the obstacle center.
pub fn orbit_rotation_number<T: Scalar>(o: &PeriodicOrbit<T>, cfg: &BilliardConfig<T>) -> Result<T> {
    let z = cfg.obstacle_center(&cfg.origin());
    Ok(winding_trace(&orbit_polyline(o), &z, cfg)?.winding() / o.length)
}

/// The reflection-free orbit through the four side midpoints, run for
/// `periods` periods of length `2 sqrt 2`; counterclockwise unless `reverse`.
pub fn diamond_orbit<T: Scalar>(cfg: &BilliardConfig<T>, periods: usize, reverse: bool) -> Result<TrajectoryRecord<T>> {
    check_square(cfg)?;
    let q = T::lit(0.25);
    let s = if reverse { -T::one() } else { T::one() };
    let start = FlowState::new(VecN(vec![q, q]), VecN(vec![-s, s]), cfg)?;
    let rec = simulate(cfg, &start, T::lit(2.0 * std::f64::consts::SQRT_2) * T::from_int(periods as i64))?;
    if !rec.is_free_flight() {
        return Err(Error::ObstacleTooLarge("the obstacle meets the diamond orbit".into()));
    }
    Ok(rec)
}

/// Loop through the step `(0,0) -> (2n+1, 2n)`, closed by the shortest return
/// through at most two unit steps.
pub fn longdiag_loop(n: usize, g: &SquareGraph) -> Result<LoopSpec<SquareVertex>> {
    let zero = LatticeIndex::zero(2);
    let target = LatticeIndex(vec![2 * n as i64 + 1, 2 * n as i64]);
    let a = SquareVertex::new(zero, target.clone());
    if !g.contains(&a) {
        return Err(Error::ObstacleTooLarge(format!(
            "step to {target} is blocked or outside the graph (radius {}, max norm {})",
            g.radius, g.max_norm
        )));
    }
    let ia = g.index_of(&a).expect("contained");
    let is_unit = |i: usize| g.vertex(i).step().norm_sq() == 1;
    let mut best: Option<Vec<usize>> = None;
    for &b in g.successors(ia).iter().filter(|&&b| is_unit(b)) {
        if g.successors(b).contains(&ia) {
            best = Some(vec![ia, b]);
            break;
        }
    }
    if best.is_none() {
        'outer: for &b in g.successors(ia).iter().filter(|&&b| is_unit(b)) {
            for &c in g.successors(b).iter().filter(|&&c| is_unit(c)) {
                if g.successors(c).contains(&ia) {
                    best = Some(vec![ia, b, c]);
                    break 'outer;
                }
            }
        }
    }
    let path = best.ok_or_else(|| Error::ObstacleTooLarge(format!("no unit-step return from {a}")))?;
    g.loop_from_vertices(path.into_iter().map(|i| g.vertex(i).clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopRotation {
    pub vertices: Vec<SquareVertex>,
    pub rotation_number: f64,
    pub winding: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopFailureReport {
    pub vertices: Vec<SquareVertex>,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquareInterval {
    pub v: f64,
    pub min: f64,
    pub max: f64,
    pub loops_used: usize,
    pub per_loop: Vec<LoopRotation>,
    pub failures: Vec<LoopFailureReport>,
}

/// Rotation numbers of enumerated loops and their reverses.
pub fn square_ar_interval<T: Scalar>(
    g: &SquareGraph,
    cfg: &BilliardConfig<T>,
    max_len: usize,
    budget: usize,
    opts: &SolverOptions,
) -> Result<SquareInterval> {
    let loops = g.enumerate_loops(max_len, budget)?;
    square_interval_of(g, cfg, &loops, opts)
}

/// As [`square_ar_interval`] for explicit loops; reverses are added.
pub fn square_interval_of<T: Scalar>(
    g: &SquareGraph,
    cfg: &BilliardConfig<T>,
    loops: &[LoopSpec<SquareVertex>],
    opts: &SolverOptions,
) -> Result<SquareInterval> {
    check_square(cfg)?;
    let mut all: Vec<LoopSpec<SquareVertex>> = Vec::with_capacity(2 * loops.len());
    for l in loops {
        all.push(l.clone());
        all.push(g.reverse_loop(l)?);
    }
    let results: Vec<Result<(PeriodicOrbit<T>, T)>> = all
        .par_iter()
        .map(|l| {
            let o = solve_loop(l, cfg, opts)?;
            let rho = orbit_rotation_number(&o, cfg)?;
            Ok((o, rho))
        })
        .collect();
    let mut per_loop = Vec::new();
    let mut failures = Vec::new();
    for (l, r) in all.iter().zip(results) {
        match r {
            Ok((o, rho)) => per_loop.push(LoopRotation {
                vertices: l.vertices.clone(),
                rotation_number: rho.to_f64_lossy(),
                winding: (rho * o.length).to_f64_lossy(),
                length: o.length.to_f64_lossy(),
            }),
            Err(e) => failures.push(LoopFailureReport {
                vertices: l.vertices.clone(),
                code: e.code().to_string(),
                message: e.to_string(),
            }),
        }
    }
    if per_loop.is_empty() {
        return Err(Error::EmptySequence);
    }
    let min = per_loop.iter().map(|p| p.rotation_number).fold(f64::INFINITY, f64::min);
    let max = per_loop.iter().map(|p| p.rotation_number).fold(f64::NEG_INFINITY, f64::max);
    Ok(SquareInterval {
        v: max.max(-min),
        min,
        max,
        loops_used: per_loop.len(),
        per_loop,
        failures,
    })
}
