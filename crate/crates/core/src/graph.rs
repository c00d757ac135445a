//! The transition graph of admissible one-step displacements, admissible
//! itineraries, and loop enumeration.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LatticeIndex;
use crate::lattice::{for_each_in_box, parity, parity_classes, BilliardConfig, GeometryKind};
use crate::scalar::Scalar;

/// A vertex of a transition graph: one step of an itinerary.
pub trait GraphVertex:
    Clone + Ord + Eq + Hash + fmt::Debug + fmt::Display + Send + Sync + Serialize
{
    /// Lattice displacement of the step.
    fn step(&self) -> LatticeIndex;
    /// A cell the step may start from.
    fn start_cell(&self) -> LatticeIndex;
    /// The vertex describing the step `prev -> next`.
    fn from_cells(prev: &LatticeIndex, next: &LatticeIndex) -> Self;
    /// Canonical representative of an itinerary's first cell.
    fn normalize_start(k: &LatticeIndex) -> LatticeIndex;
}

impl GraphVertex for LatticeIndex {
    fn step(&self) -> LatticeIndex {
        self.clone()
    }
    fn start_cell(&self) -> LatticeIndex {
        LatticeIndex::zero(self.dim())
    }
    fn from_cells(prev: &LatticeIndex, next: &LatticeIndex) -> Self {
        next - prev
    }
    fn normalize_start(k: &LatticeIndex) -> LatticeIndex {
        LatticeIndex::zero(k.dim())
    }
}

/// Square vertex `(i, j)`: from a cell of parity `i`, move by `j - i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SquareVertex {
    pub parity: LatticeIndex,
    pub target: LatticeIndex,
}

impl SquareVertex {
    pub fn new(parity: LatticeIndex, target: LatticeIndex) -> Self {
        SquareVertex { parity, target }
    }
}

impl fmt::Display for SquareVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}->{}]", self.parity, self.target)
    }
}

impl GraphVertex for SquareVertex {
    fn step(&self) -> LatticeIndex {
        &self.target - &self.parity
    }
    fn start_cell(&self) -> LatticeIndex {
        self.parity.clone()
    }
    fn from_cells(prev: &LatticeIndex, next: &LatticeIndex) -> Self {
        let i = parity(prev);
        let j = &(next - prev) + &i;
        SquareVertex { parity: i, target: j }
    }
    fn normalize_start(k: &LatticeIndex) -> LatticeIndex {
        parity(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    /// `p`, with `k_{n+q} = k_n + p`.
    pub displacement: LatticeIndex,
    /// `q`, the number of reflections per period.
    pub q: usize,
}

/// A symbolic itinerary of obstacle cells.
///
/// For a periodic type `cells` holds `k_0, ..., k_{q-1}`; later cells follow
/// from `k_{n+q} = k_n + p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleType {
    pub cells: Vec<LatticeIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Period>,
}

impl AdmissibleType {
    pub fn finite(cells: Vec<LatticeIndex>) -> Self {
        AdmissibleType { cells, period: None }
    }

    pub fn periodic(cells: Vec<LatticeIndex>, displacement: LatticeIndex) -> Self {
        let q = cells.len();
        AdmissibleType {
            cells,
            period: Some(Period { displacement, q }),
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `k_n`; for a finite type `n` must be in range.
    pub fn cell(&self, n: usize) -> LatticeIndex {
        match &self.period {
            None => self.cells[n].clone(),
            Some(p) => {
                let wraps = (n / p.q) as i64;
                &self.cells[n % p.q] + &p.displacement.scale(wraps)
            }
        }
    }

    /// The same itinerary traversed backwards, re-anchored at a canonical cell.
    pub fn reversed<V: GraphVertex>(&self) -> AdmissibleType {
        match &self.period {
            None => {
                let mut cells: Vec<LatticeIndex> = self.cells.iter().rev().cloned().collect();
                let shift = &cells[0] - &V::normalize_start(&cells[0]);
                for c in &mut cells {
                    *c = &*c - &shift;
                }
                AdmissibleType::finite(cells)
            }
            Some(p) => {
                let q = p.q;
                let mut cells: Vec<LatticeIndex> = (0..q).map(|n| self.cell(q - n)).collect();
                let shift = &cells[0] - &V::normalize_start(&cells[0]);
                for c in &mut cells {
                    *c = &*c - &shift;
                }
                AdmissibleType::periodic(cells, -&p.displacement)
            }
        }
    }
}

/// A simple cycle of a transition graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSpec<V> {
    pub vertices: Vec<V>,
    /// Net displacement `p`, the sum of the steps.
    pub displacement: LatticeIndex,
}

impl<V: GraphVertex> LoopSpec<V> {
    pub fn new(vertices: Vec<V>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::EmptySequence)?;
        let mut p = LatticeIndex::zero(first.step().dim());
        for v in &vertices {
            p = &p + &v.step();
        }
        Ok(LoopSpec {
            vertices,
            displacement: p,
        })
    }

    /// `q`, the number of reflections per period.
    pub fn period(&self) -> usize {
        self.vertices.len()
    }

    pub fn to_type(&self) -> AdmissibleType {
        let mut k = self.vertices[0].start_cell();
        let mut cells = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            cells.push(k.clone());
            k = &k + &v.step();
        }
        AdmissibleType::periodic(cells, self.displacement.clone())
    }

    /// The cyclic rotation that starts right after `v`, so that the loop ends at `v`.
    pub fn ending_at(&self, v: &V) -> Option<Self> {
        let pos = self.vertices.iter().position(|x| x == v)?;
        let n = self.vertices.len();
        let vertices = (0..n).map(|i| self.vertices[(pos + 1 + i) % n].clone()).collect();
        Some(LoopSpec {
            vertices,
            displacement: self.displacement.clone(),
        })
    }
}

impl<V: GraphVertex> fmt::Display for LoopSpec<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vertices.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// A finite directed graph with vertices kept in lexicographic order.
#[derive(Debug, Clone)]
pub struct TransitionGraph<V> {
    vertices: Vec<V>,
    index: HashMap<V, usize>,
    succ: Vec<Vec<usize>>,
    pub dim: usize,
    pub geometry: GeometryKind,
    pub radius: f64,
    pub max_norm: f64,
    /// Vertices with norm in `(max_norm - 1, max_norm]`; nonzero suggests the bound binds.
    pub outer_shell: usize,
}

pub type TorusGraph = TransitionGraph<LatticeIndex>;
pub type SquareGraph = TransitionGraph<SquareVertex>;

/// `ceil(1/(2r)) + 1`.
pub fn default_max_norm(radius: f64) -> f64 {
    (1.0 / (2.0 * radius)).ceil() + 1.0
}

fn resolve_max_norm<T: Scalar>(cfg: &BilliardConfig<T>, max_norm: Option<f64>) -> Result<f64> {
    let m = max_norm.unwrap_or_else(|| default_max_norm(cfg.radius.to_f64_lossy()));
    if !m.is_finite() || m < (cfg.dim as f64).sqrt() {
        return Err(Error::Config(format!(
            "max_norm {m} is below sqrt({}) and cannot contain the unit-vector vertices",
            cfg.dim
        )));
    }
    Ok(m)
}

fn within(k: &LatticeIndex, max_norm: f64) -> bool {
    (k.norm_sq() as f64) <= max_norm * max_norm + 1e-9
}

fn ball_points(dim: usize, max_norm: f64) -> Vec<LatticeIndex> {
    let b = max_norm.floor() as i64;
    let mut out = Vec::new();
    for_each_in_box(&vec![-b; dim], &vec![b; dim], |k| {
        if !k.is_zero() && within(&k, max_norm) {
            out.push(k)
        }
    });
    out
}

fn shell_count<'a>(steps: impl Iterator<Item = &'a LatticeIndex>, max_norm: f64) -> usize {
    let inner = (max_norm - 1.0).max(0.0);
    steps.filter(|s| (s.norm_sq() as f64) > inner * inner).count()
}

pub fn build_torus_graph<T: Scalar>(cfg: &BilliardConfig<T>, max_norm: Option<f64>) -> Result<TorusGraph> {
    if cfg.geometry != GeometryKind::TorusLift {
        return Err(Error::Config("torus graph requires torus geometry".into()));
    }
    let max_norm = resolve_max_norm(cfg, max_norm)?;
    let zero = cfg.origin();
    let vertices: Vec<LatticeIndex> = ball_points(cfg.dim, max_norm)
        .into_par_iter()
        .filter(|j| !cfg.is_blocked(&zero, j))
        .collect();
    let outer_shell = shell_count(vertices.iter(), max_norm);
    let succ: Vec<Vec<usize>> = vertices
        .par_iter()
        .map(|j| {
            (0..vertices.len())
                .filter(|&b| !cfg.between_unchecked(j, &zero, &(j + &vertices[b])))
                .collect()
        })
        .collect();
    Ok(TransitionGraph::assemble(vertices, succ, cfg, max_norm, outer_shell))
}

pub fn build_square_graph<T: Scalar>(cfg: &BilliardConfig<T>, max_norm: Option<f64>) -> Result<SquareGraph> {
    if cfg.geometry != GeometryKind::SquareUnfold {
        return Err(Error::Config("square graph requires square geometry".into()));
    }
    let max_norm = resolve_max_norm(cfg, max_norm)?;
    let steps = ball_points(2, max_norm);
    let mut candidates = Vec::new();
    for i in parity_classes() {
        for s in &steps {
            candidates.push(SquareVertex::new(i.clone(), &i + s));
        }
    }
    candidates.sort();
    let vertices: Vec<SquareVertex> = candidates
        .into_par_iter()
        .filter(|v| !cfg.is_blocked(&v.parity, &v.target))
        .collect();
    let outer_shell = shell_count(vertices.iter().map(|v| v.step()).collect::<Vec<_>>().iter(), max_norm);
    let succ: Vec<Vec<usize>> = vertices
        .par_iter()
        .map(|v| {
            let z = parity(&v.target);
            (0..vertices.len())
                .filter(|&b| {
                    let w = &vertices[b];
                    w.parity == z && !cfg.between_unchecked(&v.target, &v.parity, &(&v.target + &w.step()))
                })
                .collect()
        })
        .collect();
    let g = TransitionGraph::assemble(vertices, succ, cfg, max_norm, outer_shell);
    for (a, v) in g.vertices.iter().enumerate() {
        for &b in &g.succ[a] {
            if parity(&v.target) != g.vertices[b].parity {
                return Err(Error::Invariant(format!("edge {v} -> {} breaks parity", g.vertices[b])));
            }
        }
    }
    Ok(g)
}

impl<V: GraphVertex> TransitionGraph<V> {
    fn assemble<T: Scalar>(
        vertices: Vec<V>,
        succ: Vec<Vec<usize>>,
        cfg: &BilliardConfig<T>,
        max_norm: f64,
        outer_shell: usize,
    ) -> Self {
        let index = vertices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        TransitionGraph {
            vertices,
            index,
            succ,
            dim: cfg.dim,
            geometry: cfg.geometry,
            radius: cfg.radius.to_f64_lossy(),
            max_norm,
            outer_shell,
        }
    }

    pub fn vertices(&self) -> &[V] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, v: &V) -> bool {
        self.index.contains_key(v)
    }

    pub fn index_of(&self, v: &V) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn vertex(&self, i: usize) -> &V {
        &self.vertices[i]
    }

    /// Successor indices, ascending.
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn has_edge(&self, a: &V, b: &V) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.succ[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// All edges as vertex pairs, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (&V, &V)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(move |(a, s)| s.iter().map(move |&b| (&self.vertices[a], &self.vertices[b])))
    }

    fn check_path(&self, path: &[V]) -> Result<()> {
        if path.is_empty() {
            return Err(Error::EmptySequence);
        }
        for v in path {
            if !self.contains(v) {
                return Err(Error::NotAnEdge(format!("{v} is not a vertex")));
            }
        }
        for w in path.windows(2) {
            if !self.has_edge(&w[0], &w[1]) {
                return Err(Error::NotAnEdge(format!("{} -> {}", w[0], w[1])));
            }
        }
        Ok(())
    }

    /// Cells `k_0, k_1, ...` of the itinerary that follows `path`.
    pub fn path_to_type(&self, path: &[V]) -> Result<AdmissibleType> {
        self.check_path(path)?;
        let mut k = path[0].start_cell();
        let mut cells = vec![k.clone()];
        for v in path {
            k = &k + &v.step();
            cells.push(k.clone());
        }
        Ok(AdmissibleType::finite(cells))
    }

    /// Inverse of [`Self::path_to_type`]; for periodic types, one period of the loop.
    pub fn type_to_path(&self, t: &AdmissibleType) -> Result<Vec<V>> {
        if t.is_empty() {
            return Err(Error::EmptySequence);
        }
        let steps = match &t.period {
            None => t.len() - 1,
            Some(p) => p.q,
        };
        let path: Vec<V> = (0..steps).map(|n| V::from_cells(&t.cell(n), &t.cell(n + 1))).collect();
        if path.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.check_path(&path)?;
        if t.is_periodic() && !self.has_edge(&path[path.len() - 1], &path[0]) {
            return Err(Error::NotAnEdge(format!("{} -> {} (closing)", path[path.len() - 1], path[0])));
        }
        Ok(path)
    }

    pub fn loop_from_vertices(&self, vertices: Vec<V>) -> Result<LoopSpec<V>> {
        self.check_path(&vertices)?;
        let (last, first) = (&vertices[vertices.len() - 1], &vertices[0]);
        if !self.has_edge(last, first) {
            return Err(Error::NotAnEdge(format!("{last} -> {first} (closing)")));
        }
        LoopSpec::new(vertices)
    }

    /// The reverse loop, realizing the negated rotation vector.
    pub fn reverse_loop(&self, l: &LoopSpec<V>) -> Result<LoopSpec<V>> {
        let path = self.type_to_path(&l.to_type().reversed::<V>())?;
        LoopSpec::new(path)
    }

    /// Simple cycles of length `2..=max_len` (a self-loop never occurs), each
    /// listed once starting from its smallest vertex, in lexicographic order of
    /// vertex sequences, truncated after `budget` cycles.
    pub fn enumerate_loops(&self, max_len: usize, budget: usize) -> Result<Vec<LoopSpec<V>>> {
        if max_len < 2 {
            return Err(Error::InvalidArguments(format!("max_len must be at least 2, got {max_len}")));
        }
        let mut out = Vec::new();
        let mut on_path = vec![false; self.vertices.len()];
        let mut path = Vec::with_capacity(max_len);
        for s in 0..self.vertices.len() {
            if out.len() >= budget {
                break;
            }
            path.push(s);
            on_path[s] = true;
            self.cycles_from(s, max_len, budget, &mut path, &mut on_path, &mut out)?;
            on_path[s] = false;
            path.pop();
        }
        Ok(out)
    }

    fn cycles_from(
        &self,
        s: usize,
        max_len: usize,
        budget: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<LoopSpec<V>>,
    ) -> Result<()> {
        let cur = *path.last().expect("path is never empty here");
        if path.len() >= 2 && self.succ[cur].binary_search(&s).is_ok() {
            out.push(LoopSpec::new(path.iter().map(|&i| self.vertices[i].clone()).collect())?);
            if out.len() >= budget {
                return Ok(());
            }
        }
        if path.len() == max_len {
            return Ok(());
        }
        for &n in &self.succ[cur] {
            if n <= s || on_path[n] {
                continue;
            }
            path.push(n);
            on_path[n] = true;
            self.cycles_from(s, max_len, budget, path, on_path, out)?;
            on_path[n] = false;
            path.pop();
            if out.len() >= budget {
                break;
            }
        }
        Ok(())
    }

    pub fn to_export(&self) -> GraphExport<V> {
        GraphExport {
            geometry: self.geometry,
            dim: self.dim,
            radius: self.radius,
            max_norm: self.max_norm,
            outer_shell_vertices: self.outer_shell,
            vertices: self.vertices.clone(),
            edges: self.edges().map(|(a, b)| (a.clone(), b.clone())).collect(),
        }
    }
}

impl TorusGraph {
    /// Path `a -> ... -> b` with at most three edges whose interior vertices are
    /// unit vectors.
    ///
    /// `u = -sign(a_i) e_i` for the first nonzero coordinate of `a` and
    /// `v = -sign(b_i) e_i` for the last nonzero coordinate of `b`, so
    /// `<a,u> < 0`, `<v,b> < 0` and `<u,v> <= 0`; nonpositive scalar products
    /// always give edges.
    pub fn connect_via_unit(&self, a: &LatticeIndex, b: &LatticeIndex) -> Result<Vec<LatticeIndex>> {
        for x in [a, b] {
            if !self.contains(x) {
                return Err(Error::InvalidArguments(format!("{x} is not a vertex")));
            }
        }
        let first = a.0.iter().position(|&c| c != 0).expect("vertices are nonzero");
        let last = b.0.iter().rposition(|&c| c != 0).expect("vertices are nonzero");
        let u = LatticeIndex::unit(self.dim, first, -a.0[first].signum());
        let v = LatticeIndex::unit(self.dim, last, -b.0[last].signum());
        let path = if u == v {
            vec![a.clone(), u, b.clone()]
        } else {
            vec![a.clone(), u, v, b.clone()]
        };
        self.check_path(&path)
            .map_err(|e| Error::Invariant(format!("unit connection {a} -> {b} failed: {e}")))?;
        Ok(path)
    }
}

/// Counts of violated structural laws; all zero for a correct torus graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphAudit {
    pub self_edges: usize,
    /// Edges `j -> i` without `i -> j`.
    pub asymmetric_edges: usize,
    /// Edges `j -> i` without `-i -> -j`, or vertices without their negative.
    pub negation_failures: usize,
    /// Points of `{-1,0,1}^m \ {0}` that are not vertices.
    pub missing_small_vertices: usize,
    /// Vertex pairs with `<k, l> <= 0` and no edge `k -> l`.
    pub missing_scalar_edges: usize,
    /// Ordered vertex pairs for which the unit-vector connection fails.
    pub failed_unit_connections: usize,
}

impl GraphAudit {
    pub fn is_clean(&self) -> bool {
        *self == GraphAudit::default()
    }
}

impl TorusGraph {
    pub fn audit(&self) -> GraphAudit {
        let mut a = GraphAudit::default();
        for (j, i) in self.edges() {
            if j == i {
                a.self_edges += 1;
            }
            if !self.has_edge(i, j) {
                a.asymmetric_edges += 1;
            }
            if !self.has_edge(&-i, &-j) {
                a.negation_failures += 1;
            }
        }
        a.negation_failures += self.vertices.iter().filter(|v| !self.contains(&-*v)).count();
        let lo = vec![-1; self.dim];
        let hi = vec![1; self.dim];
        for_each_in_box(&lo, &hi, |k| {
            if !k.is_zero() && !self.contains(&k) {
                a.missing_small_vertices += 1;
            }
        });
        let pairs: Vec<(usize, usize)> = self
            .vertices
            .par_iter()
            .map(|k| {
                let mut scalar = 0;
                let mut unit = 0;
                for l in &self.vertices {
                    if k.dot(l) <= 0 && !self.has_edge(k, l) {
                        scalar += 1;
                    }
                    match self.connect_via_unit(k, l) {
                        Ok(p) if p.len() <= 4 => {}
                        _ => unit += 1,
                    }
                }
                (scalar, unit)
            })
            .collect();
        for (s, u) in pairs {
            a.missing_scalar_edges += s;
            a.failed_unit_connections += u;
        }
        a
    }
}

/// Serializable view of a graph; vertices in lexicographic order.
#[derive(Debug, Clone, Serialize)]
pub struct GraphExport<V> {
    pub geometry: GeometryKind,
    pub dim: usize,
    pub radius: f64,
    pub max_norm: f64,
    pub outer_shell_vertices: usize,
    pub vertices: Vec<V>,
    pub edges: Vec<(V, V)>,
}

/// Checks adm1-adm4 directly with the betweenness predicate.
///
/// The first cell must be `0` (torus) or a parity class (square). For a
/// periodic type the conditions wrap around using `k_{n+q} = k_n + p`.
pub fn is_admissible<T: Scalar>(t: &AdmissibleType, cfg: &BilliardConfig<T>) -> Result<bool> {
    if t.is_empty() {
        return Err(Error::EmptySequence);
    }
    let k0 = &t.cells[0];
    if k0.dim() != cfg.dim {
        return Err(Error::WrongDimension {
            expected: cfg.dim,
            got: k0.dim(),
        });
    }
    let anchored = match cfg.geometry {
        GeometryKind::TorusLift => k0.is_zero(),
        GeometryKind::SquareUnfold => &parity(k0) == k0,
    };
    if !anchored {
        return Ok(false);
    }
    let (steps, triples) = match &t.period {
        None => (t.len().saturating_sub(1), t.len().saturating_sub(2)),
        Some(p) => (p.q, p.q),
    };
    for n in 0..steps {
        let (a, b) = (t.cell(n), t.cell(n + 1));
        if a == b || cfg.is_blocked(&a, &b) {
            return Ok(false);
        }
    }
    for n in 0..triples {
        let (a, b, c) = (t.cell(n), t.cell(n + 1), t.cell(n + 2));
        if cfg.between_unchecked(&b, &a, &c) {
            return Ok(false);
        }
    }
    Ok(true)
}
