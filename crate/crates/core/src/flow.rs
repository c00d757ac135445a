//! Event-driven billiard flow in the torus lifting and the square unfolding.
//!
//! Both geometries are simulated in the plane (or space) tiled by unit cells
//! centered at lattice points. In the unfolding a straight line crossing a cell
//! boundary is a wall reflection of the folded square, and a crossing through a
//! cell corner folds to an exact reversal of the velocity.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_sphere_roots, reflect_unchecked, LatticeIndex, VecN};
use crate::lattice::{for_each_in_box, parity, BilliardConfig, GeometryKind};
use crate::scalar::{tol, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<T> {
    /// Position in lifted (torus) or unfolded (square) coordinates.
    pub position: VecN<T>,
    pub velocity: VecN<T>,
    pub time: T,
    /// Cell containing the position; on a cell boundary, the cell being entered.
    pub cell: LatticeIndex,
    pub reflections: usize,
}

impl<T: Scalar> FlowState<T> {
    /// Validates the state against the configuration; `velocity` is normalized.
    pub fn new(position: VecN<T>, velocity: VecN<T>, cfg: &BilliardConfig<T>) -> Result<Self> {
        if position.dim() != cfg.dim || velocity.dim() != cfg.dim {
            return Err(Error::WrongDimension {
                expected: cfg.dim,
                got: position.dim().max(velocity.dim()),
            });
        }
        if !position.is_finite() {
            return Err(Error::InvalidInput("position is not finite".into()));
        }
        let velocity = velocity
            .normalized()
            .ok_or_else(|| Error::InvalidInput("zero velocity".into()))?;
        let half = T::lit(0.5);
        let cell = LatticeIndex(
            (0..cfg.dim)
                .map(|i| {
                    let x = position[i];
                    let k = x.round();
                    let frac = x - k;
                    // On a boundary, take the cell the velocity points into.
                    let k = if (frac.abs() - half).abs() <= T::tol(tol::CORNER) {
                        let lo = (x - half).round();
                        if velocity[i] > T::zero() { lo + T::one() } else { lo }
                    } else {
                        k
                    };
                    k.to_i64().unwrap_or(0)
                })
                .collect(),
        );
        let state = FlowState {
            position,
            velocity,
            time: T::zero(),
            cell,
            reflections: 0,
        };
        for k in neighbourhood(&state.cell) {
            let b = cfg.obstacle(&k);
            if b.center.dist(&state.position) < b.radius - T::tol(tol::INSIDE) {
                return Err(Error::InsideObstacle {
                    distance: b.center.dist(&state.position).to_f64_lossy(),
                    radius: b.radius.to_f64_lossy(),
                });
            }
        }
        Ok(state)
    }

    /// Same point, velocity reversed, clock reset.
    pub fn reversed(&self) -> Self {
        let mut s = self.clone();
        s.velocity = -&self.velocity;
        s.time = T::zero();
        s.reflections = 0;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Specular reflection off the obstacle of `cell`; `incidence` is `|<v, n>|`.
    Reflection { cell: LatticeIndex, incidence: f64 },
    /// Wall of the square (cell boundary of the unfolding) normal to `axis`.
    Wall { axis: usize },
    /// Simultaneous crossing of two walls: the velocity is reversed.
    Corner,
    /// Time limit reached without an event.
    Horizon,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Reflection { .. } => "reflection",
            EventKind::Wall { .. } => "wall",
            EventKind::Corner => "corner",
            EventKind::Horizon => "horizon",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<T> {
    pub time: T,
    pub position: VecN<T>,
    pub cell: LatticeIndex,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub geometry: GeometryKind,
    pub initial: FlowState<T>,
    pub final_state: FlowState<T>,
    /// Cells of the obstacles hit, in order, in absolute lattice coordinates.
    pub itinerary: Vec<LatticeIndex>,
    pub displacement: VecN<T>,
    pub events: Vec<Event<T>>,
    /// Smallest `|<v, n>|` over the reflections, 1 if none.
    pub min_incidence: T,
}

impl<T: Scalar> TrajectoryRecord<T> {
    pub fn elapsed(&self) -> T {
        self.final_state.time - self.initial.time
    }

    pub fn is_free_flight(&self) -> bool {
        self.itinerary.is_empty()
    }

    /// Itinerary shifted so that it starts at `0` (torus) or in `Q` (square).
    pub fn anchored_itinerary(&self) -> Vec<LatticeIndex> {
        let Some(first) = self.itinerary.first() else {
            return Vec::new();
        };
        let shift = match self.geometry {
            GeometryKind::TorusLift => first.clone(),
            GeometryKind::SquareUnfold => first - &parity(first),
        };
        self.itinerary.iter().map(|k| k - &shift).collect()
    }

    /// Starting point, event points and final point, in unfolded coordinates.
    pub fn polyline(&self) -> Vec<VecN<T>> {
        let mut v = vec![self.initial.position.clone()];
        v.extend(self.events.iter().map(|e| e.position.clone()));
        if v.last() != Some(&self.final_state.position) {
            v.push(self.final_state.position.clone());
        }
        v
    }

    /// One CSV row per event: `time,x_1..x_m,k_1..k_m,kind`.
    pub fn to_csv(&self) -> String {
        let m = self.initial.position.dim();
        let mut out = String::from("time");
        for i in 0..m {
            out.push_str(&format!(",x{i}"));
        }
        for i in 0..m {
            out.push_str(&format!(",k{i}"));
        }
        out.push_str(",event\n");
        let row = |out: &mut String, t: T, x: &VecN<T>, k: &LatticeIndex, kind: &str| {
            out.push_str(&format!("{:.17e}", t.to_f64_lossy()));
            for c in x.iter() {
                out.push_str(&format!(",{:.17e}", c.to_f64_lossy()));
            }
            for c in &k.0 {
                out.push_str(&format!(",{c}"));
            }
            out.push(',');
            out.push_str(kind);
            out.push('\n');
        };
        row(&mut out, self.initial.time, &self.initial.position, &self.initial.cell, "start");
        for e in &self.events {
            row(&mut out, e.time, &e.position, &e.cell, e.kind.label());
        }
        row(
            &mut out,
            self.final_state.time,
            &self.final_state.position,
            &self.final_state.cell,
            "end",
        );
        out
    }
}

fn neighbourhood(k: &LatticeIndex) -> Vec<LatticeIndex> {
    let lo: Vec<i64> = k.0.iter().map(|c| c - 1).collect();
    let hi: Vec<i64> = k.0.iter().map(|c| c + 1).collect();
    let mut v = Vec::new();
    for_each_in_box(&lo, &hi, |x| v.push(x));
    v
}

/// Folds an unfolded point of cell `k` back into the fundamental square.
pub fn fold_point<T: Scalar>(x: &VecN<T>, k: &LatticeIndex) -> VecN<T> {
    VecN(
        x.iter()
            .zip(&k.0)
            .map(|(&xi, &ki)| {
                let local = xi - T::from_int(ki);
                if ki.rem_euclid(2) == 1 { -local } else { local }
            })
            .collect(),
    )
}

/// Folds an unfolded direction inside cell `k`.
pub fn fold_direction<T: Scalar>(v: &VecN<T>, k: &LatticeIndex) -> VecN<T> {
    VecN(
        v.iter()
            .zip(&k.0)
            .map(|(&vi, &ki)| if ki.rem_euclid(2) == 1 { -vi } else { vi })
            .collect(),
    )
}

/// Moves the state to the next event, or to `t_limit` (absolute time).
pub fn advance_to_next_event<T: Scalar>(
    s: &FlowState<T>,
    cfg: &BilliardConfig<T>,
    t_limit: T,
) -> Result<(FlowState<T>, EventKind)> {
    let m = cfg.dim;
    let x0 = &s.position;
    let v = &s.velocity;
    let half = T::lit(0.5);
    let mut walk = s.cell.clone();
    let mut tested: HashSet<LatticeIndex> = HashSet::new();
    // Best hit so far: (time from start, obstacle cell).
    let mut best: Option<(T, LatticeIndex)> = None;
    let square = cfg.is_square();
    let budget = t_limit - s.time;
    if budget <= T::zero() {
        return Ok((s.clone(), EventKind::Horizon));
    }
    loop {
        for k in neighbourhood(&walk) {
            if !tested.insert(k.clone()) {
                continue;
            }
            let c = cfg.obstacle_center(&k);
            let oc = x0 - &c;
            if let Some(t) = ray_sphere_roots(&oc, v, cfg.radius) {
                if best.as_ref().map_or(true, |(bt, _)| t < *bt) {
                    let n = oc.axpy(t, v).scale(T::one() / cfg.radius);
                    if v.dot(&n).abs() >= T::tol(tol::GRAZE) {
                        best = Some((t, k));
                    }
                }
            }
        }
        // Exit time through each face of the walked cell.
        let exits: Vec<T> = (0..m)
            .map(|i| {
                let face = T::from_int(walk.0[i]) + if v[i] > T::zero() { half } else { -half };
                if v[i] == T::zero() {
                    T::infinity()
                } else {
                    ((face - x0[i]) / v[i]).max(T::zero())
                }
            })
            .collect();
        let t_exit = exits.iter().copied().fold(T::infinity(), T::min);
        if let Some((t, k)) = &best {
            if *t <= t_exit {
                if *t > budget {
                    return Ok((coast(s, budget, walk), EventKind::Horizon));
                }
                return Ok(reflect_at(s, cfg, *t, k, walk));
            }
        }
        if t_exit > budget {
            return Ok((coast(s, budget, walk), EventKind::Horizon));
        }
        let crossing: Vec<usize> = (0..m)
            .filter(|&i| exits[i] <= t_exit + T::tol(tol::CORNER))
            .collect();
        for &i in &crossing {
            walk.0[i] += if v[i] > T::zero() { 1 } else { -1 };
        }
        if square {
            let mut next = coast(s, t_exit, walk.clone());
            for &i in &crossing {
                next.position[i] = T::from_int(walk.0[i]) + if v[i] > T::zero() { -half } else { half };
            }
            let kind = if crossing.len() >= 2 {
                EventKind::Corner
            } else {
                EventKind::Wall { axis: crossing[0] }
            };
            return Ok((next, kind));
        }
    }
}

fn coast<T: Scalar>(s: &FlowState<T>, dt: T, cell: LatticeIndex) -> FlowState<T> {
    FlowState {
        position: s.position.axpy(dt, &s.velocity),
        velocity: s.velocity.clone(),
        time: s.time + dt,
        cell,
        reflections: s.reflections,
    }
}

fn reflect_at<T: Scalar>(
    s: &FlowState<T>,
    cfg: &BilliardConfig<T>,
    t: T,
    k: &LatticeIndex,
    walk: LatticeIndex,
) -> (FlowState<T>, EventKind) {
    let c = cfg.obstacle_center(k);
    let hit = s.position.axpy(t, &s.velocity);
    let n = (&hit - &c).normalized().expect("hit point is on the sphere");
    let incidence = s.velocity.dot(&n).abs();
    let v = reflect_unchecked(&s.velocity, &n)
        .normalized()
        .expect("reflection of a unit vector is nonzero");
    let state = FlowState {
        position: c.axpy(cfg.radius, &n),
        velocity: v,
        time: s.time + t,
        cell: walk,
        reflections: s.reflections + 1,
    };
    (
        state,
        EventKind::Reflection {
            cell: k.clone(),
            incidence: incidence.to_f64_lossy(),
        },
    )
}

/// Runs the flow until `t_max` time units have elapsed.
pub fn simulate<T: Scalar>(cfg: &BilliardConfig<T>, initial: &FlowState<T>, t_max: T) -> Result<TrajectoryRecord<T>> {
    if !(t_max > T::zero()) {
        return Err(Error::InvalidArguments(format!("t_max must be positive, got {t_max}")));
    }
    let end = initial.time + t_max;
    let mut s = initial.clone();
    let mut events = Vec::new();
    let mut itinerary = Vec::new();
    let mut min_incidence = T::one();
    loop {
        let (next, kind) = advance_to_next_event(&s, cfg, end)?;
        s = next;
        match &kind {
            EventKind::Horizon => break,
            EventKind::Reflection { cell, incidence } => {
                itinerary.push(cell.clone());
                min_incidence = min_incidence.min(T::lit(*incidence));
            }
            _ => {}
        }
        events.push(Event {
            time: s.time,
            position: s.position.clone(),
            cell: s.cell.clone(),
            kind,
        });
    }
    Ok(TrajectoryRecord {
        geometry: cfg.geometry,
        displacement: &s.position - &initial.position,
        initial: initial.clone(),
        final_state: s,
        itinerary,
        events,
        min_incidence,
    })
}

/// Displacement over elapsed time.
pub fn empirical_rotation<T: Scalar>(rec: &TrajectoryRecord<T>) -> Result<VecN<T>> {
    let t = rec.elapsed();
    if !(t > T::zero()) {
        return Err(Error::ZeroTime);
    }
    Ok(rec.displacement.scale(T::one() / t))
}

/// Primitive directions `(p, q)`, one per sign pair, admitting a line at
/// distance at least `r` from every obstacle center: those with
/// `|(p, q)| <= 1/(2r)`, since the channel half-width is `1/(2|(p, q)|)`.
pub fn free_flight_directions<T: Scalar>(cfg: &BilliardConfig<T>) -> Result<Vec<LatticeIndex>> {
    if cfg.dim != 2 {
        return Err(Error::NotImplemented(format!(
            "free-flight directions are enumerated for m = 2 only, got m = {}",
            cfg.dim
        )));
    }
    if cfg.is_square() && cfg.center.iter().any(|&x| x != T::zero()) {
        return Err(Error::NotImplemented(
            "free-flight directions for an off-center square obstacle".into(),
        ));
    }
    let bound = T::one() / cfg.diameter();
    let b = bound.floor().to_i64().unwrap_or(0);
    let mut out = Vec::new();
    for p in 0..=b {
        for q in -b..=b {
            let k = LatticeIndex(vec![p, q]);
            if k.is_zero() || (p == 0 && q < 0) || !k.is_primitive() {
                continue;
            }
            if k.norm::<T>() <= bound + T::tol(tol::GEOM) {
                out.push(k);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// A state on the midline of the free channel in direction `k`.
pub fn channel_start<T: Scalar>(k: &LatticeIndex, cfg: &BilliardConfig<T>) -> Result<FlowState<T>> {
    if k.dim() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: k.dim(),
        });
    }
    let n = k.norm::<T>();
    let d = k.to_vec::<T>().scale(T::one() / n);
    let perp = VecN(vec![-d[1], d[0]]);
    let offset = T::one() / (T::lit(2.0) * n);
    FlowState::new(perp.scale(offset), d, cfg)
}

/// A uniformly random state in the fundamental cell, outside the obstacle.
pub fn random_state<T: Scalar, R: Rng>(cfg: &BilliardConfig<T>, rng: &mut R) -> FlowState<T> {
    let c = cfg.obstacle_center(&cfg.origin());
    loop {
        let x: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-0.499..0.499)).collect();
        let x = VecN::<T>::from_f64s(&x);
        if x.dist(&c) <= cfg.radius * T::lit(1.001) {
            continue;
        }
        let v = loop {
            let v: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n2: f64 = v.iter().map(|a| a * a).sum();
            if n2 > 1e-4 && n2 <= 1.0 {
                break VecN::<T>::from_f64s(&v);
            }
        };
        if let Ok(s) = FlowState::new(x, v, cfg) {
            return s;
        }
    }
}

/// One explicit initial condition of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// Batch run description: explicit starts plus `random` sampled ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default)]
    pub initial_conditions: Vec<InitialCondition>,
    #[serde(default)]
    pub random: usize,
    pub t_max: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BatchSpec {
    pub fn states<T: Scalar>(&self, cfg: &BilliardConfig<T>) -> Result<Vec<FlowState<T>>> {
        let mut out = Vec::new();
        for ic in &self.initial_conditions {
            out.push(FlowState::new(
                VecN::from_f64s(&ic.position),
                VecN::from_f64s(&ic.velocity),
                cfg,
            )?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random {
            out.push(random_state(cfg, &mut rng));
        }
        Ok(out)
    }
}

/// Runs every start of the batch in parallel; results keep the input order.
pub fn run_batch<T: Scalar>(cfg: &BilliardConfig<T>, spec: &BatchSpec) -> Result<Vec<TrajectoryRecord<T>>> {
    let states = spec.states(cfg)?;
    let t_max = T::lit(spec.t_max);
    states.par_iter().map(|s| simulate(cfg, s, t_max)).collect()
}
