//! Periodic orbits and trajectory pieces of prescribed type, found by
//! minimizing the length of a broken line with one vertex on each obstacle.
//!
//! The minimization is block-coordinate descent: each sub-step moves a single
//! reflection point to the best position on its sphere with both neighbours
//! fixed. That sub-problem lives in the plane through the sphere center and
//! the two neighbours, so it is a one-dimensional search over a circle.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{angle_between, reflect_unchecked, segment_distance_unchecked, LatticeIndex, VecN};
use crate::graph::{is_admissible, AdmissibleType, GraphVertex, LoopSpec};
use crate::lattice::BilliardConfig;
use crate::scalar::{tol, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the largest point movement of a sweep.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iters: 100_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    /// Largest reflection-law violation (radians) accepted at convergence.
    pub fn residual_tol(&self) -> f64 {
        (10.0 * self.tol).max(1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit<T> {
    pub ty: AdmissibleType,
    /// `x_0, ..., x_{q-1}`, with `x_q = x_0 + p`.
    pub points: Vec<VecN<T>>,
    pub length: T,
    pub displacement: VecN<T>,
    pub rotation_vector: VecN<T>,
    pub residual: T,
    pub iterations: usize,
    /// Sweeps whose total length went up by more than rounding.
    pub descent_violations: usize,
    /// Smallest distance from a segment to the center of an obstacle that is
    /// not one of its endpoints.
    pub clearance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedPath<T> {
    pub ty: AdmissibleType,
    /// All reflection points, the pinned endpoints included.
    pub points: Vec<VecN<T>>,
    pub length: T,
    pub displacement: VecN<T>,
    pub residual: T,
    pub iterations: usize,
    pub descent_violations: usize,
    pub clearance: T,
    /// The first or last segment passes through its own endpoint obstacle.
    pub crosses_endpoint_obstacles: bool,
}

/// Stand-alone orbit document.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitExport {
    pub cells: Vec<LatticeIndex>,
    pub displacement: Vec<f64>,
    pub period: usize,
    pub points: Vec<Vec<f64>>,
    pub length: f64,
    pub rotation_vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub clearance: f64,
}

impl<T: Scalar> PeriodicOrbit<T> {
    pub fn to_export(&self) -> OrbitExport {
        OrbitExport {
            cells: self.ty.cells.clone(),
            displacement: self.displacement.to_f64(),
            period: self.points.len(),
            points: self.points.iter().map(VecN::to_f64).collect(),
            length: self.length.to_f64_lossy(),
            rotation_vector: self.rotation_vector.to_f64(),
            residual: self.residual.to_f64_lossy(),
            iterations: self.iterations,
            clearance: self.clearance.to_f64_lossy(),
        }
    }

    /// Point `x_n` of the lifted orbit for any `n >= 0`.
    pub fn lifted_point(&self, n: usize) -> VecN<T> {
        let q = self.points.len();
        let wraps = T::from_int((n / q) as i64);
        self.points[n % q].axpy(wraps, &self.displacement)
    }
}

/// `p / length`: with unit speed, elapsed time equals arc length.
pub fn orbit_rotation_vector<T: Scalar>(o: &PeriodicOrbit<T>) -> VecN<T> {
    o.displacement.scale(T::one() / o.length)
}

/// Circle of radius `r` about `c` in the plane spanned by `u` and `w`.
struct Circle<'a, T> {
    c: &'a VecN<T>,
    r: T,
    u: VecN<T>,
    w: VecN<T>,
}

impl<'a, T: Scalar> Circle<'a, T> {
    fn through(c: &'a VecN<T>, r: T, a: &VecN<T>, b: &VecN<T>, hint: &VecN<T>) -> Self {
        let u = (a - c).normalized().unwrap_or_else(|| VecN::basis(c.dim(), 0));
        let tiny = T::tol(1e-9);
        let mut w = None;
        for cand in [b - c, hint - c] {
            let perp = cand.axpy(-cand.dot(&u), &u);
            if perp.norm() > tiny * cand.norm().max(T::one()) {
                w = perp.normalized();
                break;
            }
        }
        let w = w.unwrap_or_else(|| {
            // Every candidate is parallel to u: take the basis axis least aligned with it.
            let axis = (0..c.dim())
                .min_by(|&i, &j| u[i].abs().partial_cmp(&u[j].abs()).expect("finite"))
                .expect("dim >= 1");
            let e = VecN::basis(c.dim(), axis);
            e.axpy(-e.dot(&u), &u).normalized().expect("axis not parallel to u")
        });
        Circle { c, r, u, w }
    }

    fn point(&self, th: T) -> VecN<T> {
        let (s, co) = th.sin_cos();
        let mut x = self.c.clone();
        for i in 0..x.dim() {
            x[i] += self.r * (co * self.u[i] + s * self.w[i]);
        }
        x
    }

    fn tangent(&self, th: T) -> VecN<T> {
        let (s, co) = th.sin_cos();
        VecN((0..self.c.dim()).map(|i| self.r * (co * self.w[i] - s * self.u[i])).collect())
    }

    fn angle_of(&self, x: &VecN<T>) -> T {
        let d = x - self.c;
        d.dot(&self.w).atan2(d.dot(&self.u))
    }

    fn value(&self, th: T, a: &VecN<T>, b: &VecN<T>) -> T {
        let x = self.point(th);
        x.dist(a) + x.dist(b)
    }

    /// `f, f', f''` of `f(th) = |x(th) - a| + |x(th) - b|`.
    fn derivs(&self, th: T, a: &VecN<T>, b: &VecN<T>) -> (T, T, T) {
        let x = self.point(th);
        let xp = self.tangent(th);
        let xpp = self.c - &x;
        let xp2 = xp.norm_sq();
        let mut out = (T::zero(), T::zero(), T::zero());
        for p in [a, b] {
            let d = &x - p;
            let g = d.norm();
            let g1 = d.dot(&xp) / g;
            let g2 = (xp2 + d.dot(&xpp)) / g - g1 * g1 / g;
            out.0 += g;
            out.1 += g1;
            out.2 += g2;
        }
        out
    }
}

const SAMPLES: usize = 48;

/// Best point on the sphere `(c, r)` for neighbours `a`, `b`.
fn place_on_sphere<T: Scalar>(
    c: &VecN<T>,
    r: T,
    a: &VecN<T>,
    b: &VecN<T>,
    current: &VecN<T>,
    global: bool,
    ang_tol: T,
) -> (VecN<T>, bool) {
    let circ = Circle::through(c, r, a, b, current);
    let th0 = circ.angle_of(current);
    let slope = |th: T| circ.derivs(th, a, b).1.abs();
    if !global {
        if let Some(th) = newton(&circ, th0, a, b, ang_tol) {
            return (circ.point(th), slope(th) < slope(th0));
        }
    }
    let two_pi = T::TAU();
    let step = two_pi / T::from_int(SAMPLES as i64);
    let mut best = (0usize, circ.value(T::zero(), a, b));
    for i in 1..SAMPLES {
        let v = circ.value(step * T::from_int(i as i64), a, b);
        if v < best.1 {
            best = (i, v);
        }
    }
    let mid = step * T::from_int(best.0 as i64);
    let th = golden(&circ, mid - step, mid + step, a, b, ang_tol);
    let th = newton(&circ, th, a, b, ang_tol).unwrap_or(th);
    (circ.point(th), slope(th) < slope(th0))
}

fn golden<T: Scalar>(circ: &Circle<'_, T>, mut lo: T, mut hi: T, a: &VecN<T>, b: &VecN<T>, ang_tol: T) -> T {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = circ.value(x1, a, b);
    let mut f2 = circ.value(x2, a, b);
    for _ in 0..200 {
        if hi - lo <= ang_tol {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = circ.value(x1, a, b);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = circ.value(x2, a, b);
        }
    }
    if f1 < f2 {
        x1
    } else {
        x2
    }
}

/// Safeguarded Newton on `f'`; `None` when curvature is not positive or the
/// iteration does not settle, so the caller can fall back to a bracket.
fn newton<T: Scalar>(circ: &Circle<'_, T>, th0: T, a: &VecN<T>, b: &VecN<T>, ang_tol: T) -> Option<T> {
    let mut th = th0;
    let (mut f, mut f1, mut f2) = circ.derivs(th, a, b);
    let limit = T::lit(0.5);
    for _ in 0..30 {
        if !(f2 > T::zero()) {
            return None;
        }
        let step = f1 / f2;
        if step.abs() > limit {
            return None;
        }
        let cand = th - step;
        let (g, g1, g2) = circ.derivs(cand, a, b);
        if g > f + T::tol(1e-15) * f {
            return None;
        }
        th = cand;
        f = g;
        f1 = g1;
        f2 = g2;
        if step.abs() <= ang_tol {
            return Some(th);
        }
    }
    None
}

/// Descent state shared by periodic and pinned problems.
struct Chain<'c, T> {
    centers: Vec<VecN<T>>,
    radius: T,
    pts: Vec<VecN<T>>,
    /// Periodic closure offset `P`, with `x_q = x_0 + P`.
    closure: Option<VecN<T>>,
    opts: &'c SolverOptions,
}

struct Outcome<T> {
    iterations: usize,
    descent_violations: usize,
    residual: T,
}

impl<'c, T: Scalar> Chain<'c, T> {
    fn free_range(&self) -> std::ops::Range<usize> {
        match self.closure {
            Some(_) => 0..self.pts.len(),
            None => 1..self.pts.len() - 1,
        }
    }

    fn neighbours(&self, i: usize) -> (VecN<T>, VecN<T>) {
        let n = self.pts.len();
        match &self.closure {
            Some(p) => {
                let prev = if i == 0 { &self.pts[n - 1] - p } else { self.pts[i - 1].clone() };
                let next = if i == n - 1 { &self.pts[0] + p } else { self.pts[i + 1].clone() };
                (prev, next)
            }
            None => (self.pts[i - 1].clone(), self.pts[i + 1].clone()),
        }
    }

    /// The broken line including the closing ghost point.
    fn polyline(&self) -> Vec<VecN<T>> {
        let mut v = self.pts.clone();
        if let Some(p) = &self.closure {
            v.push(&self.pts[0] + p);
        }
        v
    }

    fn length(&self) -> T {
        self.polyline().windows(2).map(|w| w[0].dist(&w[1])).sum()
    }

    fn residual(&self) -> T {
        let mut worst = T::zero();
        for i in self.free_range() {
            let (a, b) = self.neighbours(i);
            let x = &self.pts[i];
            let (Some(din), Some(dout), Some(n)) =
                ((x - &a).normalized(), (&b - x).normalized(), (x - &self.centers[i]).normalized())
            else {
                return T::infinity();
            };
            let refl = reflect_unchecked(&din, &n);
            let ang = angle_between(&refl, &dout).unwrap_or_else(|_| T::infinity());
            worst = worst.max(ang);
        }
        worst
    }

    fn run(&mut self) -> Result<Outcome<T>> {
        let tol_move = T::lit(self.opts.tol);
        let res_tol = T::lit(self.opts.residual_tol());
        let ang_tol = (tol_move / (T::lit(10.0) * self.radius)).max(T::epsilon());
        let mut len = self.length();
        let mut violations = 0;
        if self.free_range().is_empty() {
            return Ok(Outcome {
                iterations: 0,
                descent_violations: 0,
                residual: T::zero(),
            });
        }
        let mut movement = T::infinity();
        let mut residual = T::infinity();
        for it in 0..self.opts.max_iters {
            movement = T::zero();
            let global = it < 2;
            for i in self.free_range() {
                let (a, b) = self.neighbours(i);
                let old = &self.pts[i];
                let f_old = old.dist(&a) + old.dist(&b);
                let (cand, flatter) = place_on_sphere(&self.centers[i], self.radius, &a, &b, old, global, ang_tol);
                let f_new = cand.dist(&a) + cand.dist(&b);
                // Near the optimum the gain is below rounding: accept ties at that
                // level, and a few ulps more when the slope goes down.
                let ulp = T::epsilon() * f_old;
                if f_new <= f_old + T::lit(4.0) * ulp || (flatter && f_new <= f_old + T::lit(32.0) * ulp) {
                    movement = movement.max(cand.dist(old));
                    self.pts[i] = cand;
                }
            }
            let new_len = self.length();
            if new_len > len + T::lit(1e-14) * len {
                violations += 1;
            }
            len = new_len;
            if movement < tol_move {
                residual = self.residual();
                if residual < res_tol {
                    return Ok(Outcome {
                        iterations: it + 1,
                        descent_violations: violations,
                        residual,
                    });
                }
                if movement == T::zero() {
                    break;
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: self.opts.max_iters,
            movement: movement.to_f64_lossy(),
            residual: residual.to_f64_lossy(),
        })
    }

    /// Smallest distance from each segment to non-endpoint obstacle centers.
    fn clearance(&self, cfg: &BilliardConfig<T>, cells: &[LatticeIndex]) -> T {
        let line = self.polyline();
        let mut worst = T::infinity();
        for (n, w) in line.windows(2).enumerate() {
            let (ka, kb) = (&cells[n], &cells[n + 1]);
            for k in cfg.candidate_blockers(ka, kb) {
                let d = segment_distance_unchecked(&cfg.obstacle_center(&k), &w[0], &w[1]);
                worst = worst.min(d);
            }
        }
        worst
    }

    /// Whether segment `n` dips into the interior of one of its own obstacles.
    fn segment_crosses_own(&self, n: usize) -> bool {
        let line = self.polyline();
        let (x, y) = (&line[n], &line[n + 1]);
        let d = y - x;
        let slack = T::tol(tol::CLEAR) * d.norm();
        let ca = &self.centers[n % self.centers.len()];
        let cb = if n + 1 < self.centers.len() {
            self.centers[n + 1].clone()
        } else {
            &self.centers[0] + self.closure.as_ref().expect("closing segment implies closure")
        };
        d.dot(&(x - ca)) < -slack || d.dot(&(y - &cb)) > slack
    }
}

fn initial_points<T: Scalar>(centers: &[VecN<T>], r: T, prev: &[VecN<T>], next: &[VecN<T>]) -> Vec<VecN<T>> {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mid = (&prev[i] + &next[i]).scale(T::lit(0.5));
            let dir = (&mid - c).normalized().unwrap_or_else(|| {
                let d = &next[i] - &prev[i];
                let e = VecN::basis(c.dim(), if d[0].abs() > d[1].abs() { 1 } else { 0 });
                e.axpy(-e.dot(&d) / d.norm_sq(), &d).normalized().expect("basis not parallel")
            });
            c.axpy(r, &dir)
        })
        .collect()
}

fn periodic_centers<T: Scalar>(t: &AdmissibleType, cfg: &BilliardConfig<T>) -> Result<(Vec<VecN<T>>, VecN<T>)> {
    let p = t
        .period
        .as_ref()
        .ok_or_else(|| Error::InvalidArguments("periodic orbit needs a periodic type".into()))?;
    if p.q < 2 {
        return Err(Error::InvalidArguments("period must be at least 2".into()));
    }
    let centers: Vec<VecN<T>> = t.cells.iter().map(|k| cfg.obstacle_center(k)).collect();
    // Equal to p in the torus, and in the square because loops have even p.
    let closure = &cfg.obstacle_center(&t.cell(p.q)) - &centers[0];
    Ok((centers, closure))
}

fn check_type<T: Scalar>(t: &AdmissibleType, cfg: &BilliardConfig<T>) -> Result<()> {
    if !is_admissible(t, cfg)? {
        return Err(Error::InvalidArguments(format!(
            "type {:?} is not admissible for this configuration",
            t.cells
        )));
    }
    Ok(())
}

/// Random starting points, one on each obstacle of the periodic type.
pub fn random_initial_points<T: Scalar, R: Rng>(t: &AdmissibleType, cfg: &BilliardConfig<T>, rng: &mut R) -> Vec<VecN<T>> {
    t.cells
        .iter()
        .map(|k| {
            let dir = loop {
                let v: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n2: f64 = v.iter().map(|x| x * x).sum();
                if n2 > 1e-4 && n2 <= 1.0 {
                    break VecN::<T>::from_f64s(&v).normalized().expect("nonzero");
                }
            };
            cfg.obstacle_center(k).axpy(cfg.radius, &dir)
        })
        .collect()
}

pub fn solve_periodic_orbit<T: Scalar>(
    t: &AdmissibleType,
    cfg: &BilliardConfig<T>,
    opts: &SolverOptions,
) -> Result<PeriodicOrbit<T>> {
    solve_periodic_orbit_from(t, cfg, opts, None)
}

pub fn solve_loop<T: Scalar, V: GraphVertex>(
    l: &LoopSpec<V>,
    cfg: &BilliardConfig<T>,
    opts: &SolverOptions,
) -> Result<PeriodicOrbit<T>> {
    solve_periodic_orbit(&l.to_type(), cfg, opts)
}

/// As [`solve_periodic_orbit`], optionally from caller-supplied starting points.
pub fn solve_periodic_orbit_from<T: Scalar>(
    t: &AdmissibleType,
    cfg: &BilliardConfig<T>,
    opts: &SolverOptions,
    init: Option<Vec<VecN<T>>>,
) -> Result<PeriodicOrbit<T>> {
    check_type(t, cfg)?;
    let (centers, closure) = periodic_centers(t, cfg)?;
    let q = centers.len();
    let pts = match init {
        Some(v) => {
            if v.len() != q {
                return Err(Error::InvalidArguments(format!("expected {q} starting points, got {}", v.len())));
            }
            v
        }
        None => {
            let prev: Vec<VecN<T>> = (0..q)
                .map(|i| if i == 0 { &centers[q - 1] - &closure } else { centers[i - 1].clone() })
                .collect();
            let next: Vec<VecN<T>> = (0..q)
                .map(|i| if i == q - 1 { &centers[0] + &closure } else { centers[i + 1].clone() })
                .collect();
            initial_points(&centers, cfg.radius, &prev, &next)
        }
    };
    let mut chain = Chain {
        centers,
        radius: cfg.radius,
        pts,
        closure: Some(closure.clone()),
        opts,
    };
    let out = chain.run()?;
    let mut cells = t.cells.clone();
    cells.push(t.cell(q));
    let clearance = chain.clearance(cfg, &cells);
    if clearance < cfg.radius - T::tol(tol::CLEAR) || (0..q).any(|n| chain.segment_crosses_own(n)) {
        return Err(Error::AdmissibilityMismatch(format!(
            "optimum of type {:?} enters an obstacle (clearance {clearance})",
            t.cells
        )));
    }
    let length = chain.length();
    Ok(PeriodicOrbit {
        ty: t.clone(),
        rotation_vector: closure.scale(T::one() / length),
        displacement: closure,
        points: chain.pts,
        length,
        residual: out.residual,
        iterations: out.iterations,
        descent_violations: out.descent_violations,
        clearance,
    })
}

/// Shortest broken line of finite type `t` from `x0` to `xs`.
pub fn solve_constrained_path<T: Scalar>(
    t: &AdmissibleType,
    x0: &VecN<T>,
    xs: &VecN<T>,
    cfg: &BilliardConfig<T>,
    opts: &SolverOptions,
) -> Result<ConstrainedPath<T>> {
    if t.is_periodic() {
        return Err(Error::InvalidArguments("constrained path needs a finite type".into()));
    }
    if t.len() < 2 || x0 == xs {
        return Err(Error::ZeroLength);
    }
    check_type(t, cfg)?;
    let centers: Vec<VecN<T>> = t.cells.iter().map(|k| cfg.obstacle_center(k)).collect();
    let s = centers.len() - 1;
    for (x, c) in [(x0, &centers[0]), (xs, &centers[s])] {
        if x.dim() != cfg.dim {
            return Err(Error::WrongDimension {
                expected: cfg.dim,
                got: x.dim(),
            });
        }
        if (x.dist(c) - cfg.radius).abs() > T::tol(1e-9) {
            return Err(Error::InvalidInput(format!(
                "endpoint {:?} is not on the boundary of its obstacle",
                x.to_f64()
            )));
        }
    }
    let mut pts = vec![x0.clone()];
    if s > 1 {
        pts.extend(initial_points(&centers[1..s], cfg.radius, &centers[..s - 1], &centers[2..]));
    }
    pts.push(xs.clone());
    let mut chain = Chain {
        centers,
        radius: cfg.radius,
        pts,
        closure: None,
        opts,
    };
    let out = chain.run()?;
    let length = chain.length();
    if length == T::zero() {
        return Err(Error::ZeroLength);
    }
    let clearance = chain.clearance(cfg, &t.cells);
    let crosses = chain.segment_crosses_own(0) || chain.segment_crosses_own(s - 1);
    Ok(ConstrainedPath {
        ty: t.clone(),
        displacement: xs - x0,
        points: chain.pts,
        length,
        residual: out.residual,
        iterations: out.iterations,
        descent_violations: out.descent_violations,
        clearance,
        crosses_endpoint_obstacles: crosses,
    })
}
