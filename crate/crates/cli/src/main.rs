//! `rotset`: transition graphs, periodic orbits, rotation-set estimates and
//! simulations for billiards with one ball obstacle.

mod svg;

use std::f64::consts::SQRT_2;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rotset_core::flow::InitialCondition;
use rotset_core::rotation::{hull_loops, tracking_base};
use rotset_core::solver::solve_loop;
use rotset_core::square::{folded_pieces, orbit_polyline, orbit_rotation_number, square_interval_of};
use rotset_core::{
    analytic_lower_bounds, build_square_graph, build_torus_graph, empirical_rotation, estimate_admissible_hull,
    generate_tracking_path, longdiag_loop, st15_upper_bound, winding_rotation, BatchSpec, Config, ConfigDoc, Error,
    ErrorClass, GeometryKind, LatticeIndex, LoopSpec, SolverOptions, SquareVertex, Vector,
};

#[derive(Parser, Debug)]
#[command(name = "rotset", version, about = "Rotation sets of billiards with one ball obstacle", allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// JSON configuration document; the flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    geometry: Option<Geometry>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Obstacle center in the square, as `X,Y`.
    #[arg(long, global = true, value_parser = parse_floats_arg, allow_hyphen_values = true)]
    center: Option<Floats>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write an SVG rendering (planar configurations only).
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    /// Write the main output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Geometry {
    Torus,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the transition graph and audit its structural laws.
    Graph {
        #[arg(long)]
        max_norm: Option<f64>,
    },
    /// Solve the periodic orbit of one loop.
    Orbit {
        /// Torus: `1,0;-1,0`. Square: `0,0>3,2;1,0>0,0` (parity>target).
        #[arg(long = "loop", allow_hyphen_values = true)]
        loop_spec: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Estimate the admissible rotation set from enumerated loops.
    Hull {
        #[arg(long)]
        max_norm: Option<f64>,
        #[arg(long, default_value_t = 2)]
        max_len: usize,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Boundary points per obstacle for the sampled upper bound.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Analytic lower bounds and the sampled upper bound.
    Bounds {
        #[arg(long)]
        max_norm: Option<f64>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Simulate the flow from explicit or random starts.
    Simulate {
        /// `X1,..,Xm:V1,..,Vm`; repeatable.
        #[arg(long, allow_hyphen_values = true)]
        init: Vec<String>,
        /// Number of additional random starts.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        tmax: f64,
    },
    /// Interval of rotation numbers of periodic orbits in the square.
    Square {
        #[arg(long)]
        max_norm: Option<f64>,
        #[arg(long, default_value_t = 2)]
        max_len: usize,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Also include the long-diagonal loops for n = 1..=N.
        #[arg(long, default_value_t = 0)]
        longdiag: usize,
    },
    /// Realize an interior rotation vector by concatenating periodic orbits.
    Track {
        /// Target rotation vector, `U1,..,Um`.
        #[arg(long, value_parser = parse_floats_arg, allow_hyphen_values = true)]
        target: Floats,
        /// Total time of the construction.
        #[arg(long = "T", visible_alias = "time", default_value_t = 1000.0)]
        t_total: f64,
        #[arg(long)]
        max_norm: Option<f64>,
        /// Loop length for the base orbits.
        #[arg(long, default_value_t = 2)]
        max_len: usize,
        /// Turns around each base loop before its connector.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Graph { .. } => "graph",
            Command::Orbit { .. } => "orbit",
            Command::Hull { .. } => "hull",
            Command::Bounds { .. } => "bounds",
            Command::Simulate { .. } => "simulate",
            Command::Square { .. } => "square",
            Command::Track { .. } => "track",
        }
    }

    fn parameters(&self) -> Value {
        match self {
            Command::Graph { max_norm } => json!({ "max_norm": max_norm }),
            Command::Orbit { loop_spec, tol } => json!({ "loop": loop_spec, "tol": tol }),
            Command::Hull {
                max_norm,
                max_len,
                budget,
                tol,
                samples,
            } => json!({ "max_norm": max_norm, "max_len": max_len, "budget": budget, "tol": tol, "samples": samples }),
            Command::Bounds { max_norm, samples } => json!({ "max_norm": max_norm, "samples": samples }),
            Command::Simulate {
                init,
                random,
                seed,
                tmax,
            } => json!({ "init": init, "random": random, "seed": seed, "tmax": tmax }),
            Command::Square {
                max_norm,
                max_len,
                budget,
                tol,
                longdiag,
            } => json!({ "max_norm": max_norm, "max_len": max_len, "budget": budget, "tol": tol, "longdiag": longdiag }),
            Command::Track {
                target,
                t_total,
                max_norm,
                max_len,
                repeats,
                tol,
            } => json!({
                "target": target, "T": t_total, "max_norm": max_norm,
                "max_len": max_len, "repeats": repeats, "tol": tol
            }),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// Embedded in every artifact. Wall-clock timing is deliberately absent so
/// that identical runs give identical bytes.
#[derive(Debug, Clone, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: ConfigDoc,
    parameters: Value,
    seed: Option<u64>,
}

struct Output {
    result: Value,
    csv: Option<String>,
    svg: Option<String>,
    violations: Vec<String>,
}

impl Output {
    fn json(result: Value) -> Self {
        Output {
            result,
            csv: None,
            svg: None,
            violations: Vec::new(),
        }
    }
}

/// Comma-separated reals, kept as one clap value.
#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
struct Floats(Vec<f64>);

fn parse_floats_arg(s: &str) -> Result<Floats, String> {
    parse_floats(s).map(Floats)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect()
}

fn parse_ints(s: &str) -> rotset_core::Result<LatticeIndex> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<Vec<_>, _>>()
        .map(LatticeIndex)
        .map_err(|e| Error::InvalidArguments(format!("bad lattice point {s:?}: {e}")))
}

fn resolve_config(c: &Common) -> rotset_core::Result<Config> {
    let mut doc = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ConfigDoc>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ConfigDoc {
            geometry: GeometryKind::TorusLift,
            dim: 2,
            radius: f64::NAN,
            center: None,
        },
    };
    if let Some(g) = c.geometry {
        doc.geometry = match g {
            Geometry::Torus => GeometryKind::TorusLift,
            Geometry::Square => GeometryKind::SquareUnfold,
        };
    }
    if let Some(d) = c.dim {
        doc.dim = d;
    }
    if let Some(r) = c.radius {
        doc.radius = r;
    }
    if let Some(center) = &c.center {
        doc.center = Some(center.0.clone());
    }
    if doc.radius.is_nan() {
        return Err(Error::Config("no radius given (use --radius or --config)".into()));
    }
    Config::from_doc(&doc)
}

fn require_geometry(cfg: &Config, g: GeometryKind, what: &str) -> rotset_core::Result<()> {
    if cfg.geometry != g {
        return Err(Error::Config(format!("{what} needs a {} configuration", match g {
            GeometryKind::TorusLift => "torus",
            GeometryKind::SquareUnfold => "square",
        })));
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cmd_graph(cfg: &Config, max_norm: Option<f64>) -> rotset_core::Result<Output> {
    match cfg.geometry {
        GeometryKind::TorusLift => {
            let g = build_torus_graph(cfg, max_norm)?;
            let audit = g.audit();
            let mut out = Output::json(json!({
                "vertex_count": g.vertex_count(),
                "edge_count": g.edge_count(),
                "audit": audit,
                "graph": g.to_export(),
            }));
            if !audit.is_clean() {
                out.violations.push(format!("graph audit failed: {audit:?}"));
            }
            Ok(out)
        }
        GeometryKind::SquareUnfold => {
            let g = build_square_graph(cfg, max_norm)?;
            let self_edges = g.edges().filter(|(a, b)| a == b).count();
            let mut out = Output::json(json!({
                "vertex_count": g.vertex_count(),
                "edge_count": g.edge_count(),
                "audit": { "self_edges": self_edges },
                "graph": g.to_export(),
            }));
            if self_edges > 0 {
                out.violations.push(format!("{self_edges} self-edges"));
            }
            Ok(out)
        }
    }
}

fn cmd_orbit(cfg: &Config, spec: &str, tol: f64) -> rotset_core::Result<Output> {
    let opts = SolverOptions::with_tol(tol);
    let parts: Vec<&str> = spec.split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
    match cfg.geometry {
        GeometryKind::TorusLift => {
            let g = build_torus_graph(cfg, None)?;
            let verts = parts.iter().map(|p| parse_ints(p)).collect::<rotset_core::Result<Vec<_>>>()?;
            let verts = verts
                .into_iter()
                .map(|v| if g.contains(&v) { Ok(v) } else { Err(Error::InvalidArguments(format!("{v} is not a vertex"))) })
                .collect::<rotset_core::Result<Vec<_>>>()?;
            let l = g.loop_from_vertices(verts)?;
            let o = solve_loop(&l, cfg, &opts)?;
            Ok(Output::json(json!({ "loop": l, "orbit": o.to_export() })))
        }
        GeometryKind::SquareUnfold => {
            let verts = parts
                .iter()
                .map(|p| {
                    let (a, b) = p
                        .split_once('>')
                        .ok_or_else(|| Error::InvalidArguments(format!("square vertex {p:?} needs PARITY>TARGET")))?;
                    Ok(SquareVertex::new(parse_ints(a)?, parse_ints(b)?))
                })
                .collect::<rotset_core::Result<Vec<_>>>()?;
            let g = build_square_graph(cfg, None)?;
            let l = g.loop_from_vertices(verts)?;
            let o = solve_loop(&l, cfg, &opts)?;
            let rho = orbit_rotation_number(&o, cfg)?;
            let mut out = Output::json(json!({
                "loop": l,
                "orbit": o.to_export(),
                "rotation_number": rho,
                "winding": rho * o.length,
            }));
            out.svg = Some(square_picture(cfg, &orbit_polyline(&o), rho, rho * o.length));
            Ok(out)
        }
    }
}

fn square_picture(cfg: &Config, polyline: &[Vector], rho: f64, winding: f64) -> String {
    // The manifest is filled in by the caller.
    svg::square_svg(
        &folded_pieces(polyline),
        &cfg.center.0,
        cfg.radius,
        &format!("winding {winding:.6}  rotation number {rho:.9}"),
        "{MANIFEST}",
    )
}

fn cmd_hull(
    cfg: &Config,
    max_norm: Option<f64>,
    max_len: usize,
    budget: usize,
    tol: f64,
    samples: usize,
) -> rotset_core::Result<Output> {
    require_geometry(cfg, GeometryKind::TorusLift, "hull")?;
    let g = build_torus_graph(cfg, max_norm)?;
    let mut est = estimate_admissible_hull(&g, cfg, max_len, budget, &SolverOptions::with_tol(tol))?;
    est.attach_st15(&g, samples)?;
    let mut violations = Vec::new();
    if !(est.inscribed_radius > 0.0) {
        violations.push(format!("origin not strictly inside the hull (radius {})", est.inscribed_radius));
    }
    let a = est.st15.as_ref().map(|s| s.a).unwrap_or(1.0);
    for p in &est.points {
        let n = p.rotation_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n >= 1.0 || n > a + 1e-9 {
            violations.push(format!("loop {} has rotation vector norm {n}", p.loop_id));
        }
        let found = est.points.iter().any(|q| {
            q.rotation_vector
                .iter()
                .zip(&p.rotation_vector)
                .all(|(x, y)| (x + y).abs() < 1e-8)
        });
        if !found {
            violations.push(format!("loop {} has no reversed partner", p.loop_id));
        }
    }
    let svg = (cfg.dim == 2).then(|| svg::hull_svg(&est, "{MANIFEST}"));
    Ok(Output {
        result: to_value(&est),
        csv: None,
        svg,
        violations,
    })
}

fn cmd_bounds(cfg: &Config, max_norm: Option<f64>, samples: usize) -> rotset_core::Result<Output> {
    require_geometry(cfg, GeometryKind::TorusLift, "bounds")?;
    let lower = analytic_lower_bounds(cfg)?;
    let g = build_torus_graph(cfg, max_norm)?;
    let upper = st15_upper_bound(&g, samples)?;
    Ok(Output::json(json!({ "lower": lower, "st15": upper })))
}

fn parse_init(s: &str) -> rotset_core::Result<InitialCondition> {
    let (x, v) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidArguments(format!("initial condition {s:?} needs POSITION:VELOCITY")))?;
    let pos = parse_floats(x).map_err(Error::InvalidArguments)?;
    let vel = parse_floats(v).map_err(Error::InvalidArguments)?;
    Ok(InitialCondition {
        position: pos,
        velocity: vel,
    })
}

fn cmd_simulate(
    cfg: &Config,
    init: &[String],
    random: usize,
    seed: u64,
    tmax: f64,
    format: Format,
) -> rotset_core::Result<Output> {
    if !(tmax > 0.0) || !tmax.is_finite() {
        return Err(Error::InvalidArguments(format!("tmax must be positive and finite, got {tmax}")));
    }
    let spec = BatchSpec {
        initial_conditions: init.iter().map(|s| parse_init(s)).collect::<rotset_core::Result<Vec<_>>>()?,
        random,
        t_max: tmax,
        seed,
    };
    if spec.initial_conditions.is_empty() && random == 0 {
        return Err(Error::InvalidArguments("give --init or --random".into()));
    }
    let records = rotset_core::flow::run_batch(cfg, &spec)?;
    let z = cfg.obstacle_center(&cfg.origin());
    let mut runs = Vec::new();
    for rec in &records {
        let rotation = match cfg.geometry {
            GeometryKind::TorusLift => json!(empirical_rotation(rec)?.0),
            GeometryKind::SquareUnfold => json!(winding_rotation(rec, &z, cfg)?),
        };
        runs.push(json!({
            "initial_position": rec.initial.position.0,
            "initial_velocity": rec.initial.velocity.0,
            "elapsed": rec.elapsed(),
            "reflections": rec.itinerary.len(),
            "events": rec.events.len(),
            "displacement": rec.displacement.0,
            "rotation": rotation,
            "min_incidence": rec.min_incidence,
            "itinerary": rec.anchored_itinerary(),
        }));
    }
    let csv = (format == Format::Csv).then(|| {
        let mut s = String::new();
        for (i, rec) in records.iter().enumerate() {
            s.push_str(&format!("# run {i}\n"));
            s.push_str(&rec.to_csv());
        }
        s
    });
    Ok(Output {
        result: json!({ "runs": runs }),
        csv,
        svg: None,
        violations: Vec::new(),
    })
}

fn cmd_square(
    cfg: &Config,
    max_norm: Option<f64>,
    max_len: usize,
    budget: usize,
    tol: f64,
    longdiag: usize,
) -> rotset_core::Result<Output> {
    require_geometry(cfg, GeometryKind::SquareUnfold, "square")?;
    let g = build_square_graph(cfg, max_norm)?;
    let mut loops: Vec<LoopSpec<SquareVertex>> = g.enumerate_loops(max_len, budget)?;
    for n in 1..=longdiag {
        loops.push(longdiag_loop(n, &g)?);
    }
    let opts = SolverOptions::with_tol(tol);
    let iv = square_interval_of(&g, cfg, &loops, &opts)?;
    let mut violations = Vec::new();
    if (iv.max + iv.min).abs() > 1e-9 {
        violations.push(format!("interval not symmetric: [{}, {}]", iv.min, iv.max));
    }
    if iv.v >= SQRT_2 / 4.0 {
        violations.push(format!("endpoint {} reaches sqrt(2)/4", iv.v));
    }
    let best = iv
        .per_loop
        .iter()
        .max_by(|a, b| a.rotation_number.partial_cmp(&b.rotation_number).expect("finite"))
        .expect("nonempty interval");
    let l = g.loop_from_vertices(best.vertices.clone())?;
    let o = solve_loop(&l, cfg, &opts)?;
    let svg = Some(square_picture(cfg, &orbit_polyline(&o), best.rotation_number, best.winding));
    Ok(Output {
        result: to_value(&iv),
        csv: None,
        svg,
        violations,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_track(
    cfg: &Config,
    target: &[f64],
    t_total: f64,
    max_norm: Option<f64>,
    max_len: usize,
    repeats: usize,
    tol: f64,
) -> rotset_core::Result<Output> {
    require_geometry(cfg, GeometryKind::TorusLift, "track")?;
    let opts = SolverOptions::with_tol(tol);
    let g = build_torus_graph(cfg, max_norm)?;
    let est = estimate_admissible_hull(&g, cfg, max_len, usize::MAX, &opts)?;
    let base = tracking_base(&g, cfg, &hull_loops(&est)?, repeats, &opts)?;
    let run = generate_tracking_path(&Vector::from_f64s(target), &base, t_total, cfg)?;
    let mut violations = Vec::new();
    if !run.bound_holds() {
        violations.push(format!("deviation {} exceeds the declared bound {}", run.deviation_sup, run.m));
    }
    Ok(Output::json(to_value(&run)).with_violations(violations))
}

impl Output {
    fn with_violations(mut self, v: Vec<String>) -> Self {
        self.violations = v;
        self
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Solver => 3,
        ErrorClass::Invariant => 4,
    }
}

fn report(code: &str, class: &str, exit: u8, message: &str) {
    eprintln!(
        "{}",
        json!({ "error": { "code": code, "class": class, "exit": exit, "message": message } })
    );
}

fn run(cli: &Cli) -> Result<Vec<String>, Error> {
    let cfg = resolve_config(&cli.common)?;
    if cli.common.svg.is_some() && cfg.dim != 2 {
        return Err(Error::Config("SVG output is only available for planar configurations".into()));
    }
    let out = match &cli.command {
        Command::Graph { max_norm } => cmd_graph(&cfg, *max_norm)?,
        Command::Orbit { loop_spec, tol } => cmd_orbit(&cfg, loop_spec, *tol)?,
        Command::Hull {
            max_norm,
            max_len,
            budget,
            tol,
            samples,
        } => cmd_hull(&cfg, *max_norm, *max_len, *budget, *tol, *samples)?,
        Command::Bounds { max_norm, samples } => cmd_bounds(&cfg, *max_norm, *samples)?,
        Command::Simulate {
            init,
            random,
            seed,
            tmax,
        } => cmd_simulate(&cfg, init, *random, *seed, *tmax, cli.common.format)?,
        Command::Square {
            max_norm,
            max_len,
            budget,
            tol,
            longdiag,
        } => cmd_square(&cfg, *max_norm, *max_len, *budget, *tol, *longdiag)?,
        Command::Track {
            target,
            t_total,
            max_norm,
            max_len,
            repeats,
            tol,
        } => cmd_track(&cfg, &target.0, *t_total, *max_norm, *max_len, *repeats, *tol)?,
    };
    let manifest = RunManifest {
        tool: "rotset",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config: cfg.to_doc(),
        parameters: cli.command.parameters(),
        seed: cli.command.seed(),
    };
    let manifest_json = serde_json::to_string(&manifest).expect("serializable");
    let text = match (cli.common.format, &out.csv) {
        (Format::Csv, Some(csv)) => {
            let mut s = format!("# manifest {manifest_json}\n");
            s.push_str(csv);
            s
        }
        (Format::Csv, None) => {
            return Err(Error::Config(format!("{} has no CSV output", cli.command.name())));
        }
        (Format::Json, _) => {
            let mut s = serde_json::to_string_pretty(&json!({ "manifest": manifest, "result": out.result }))
                .expect("serializable");
            s.push('\n');
            s
        }
    };
    match &cli.common.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    if let Some(p) = &cli.common.svg {
        let body = out
            .svg
            .ok_or_else(|| Error::Config(format!("{} has no SVG rendering", cli.command.name())))?;
        std::fs::write(p, body.replace("{MANIFEST}", &manifest_json))
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(out.violations)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            report("usage", "config", 2, first);
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(v) if v.is_empty() => ExitCode::SUCCESS,
        Ok(v) => {
            report("invariant", "invariant", 4, &v.join("; "));
            ExitCode::from(4)
        }
        Err(e) => {
            let class = e.class();
            let exit = exit_code(class);
            let name = match class {
                ErrorClass::Config => "config",
                ErrorClass::Solver => "solver",
                ErrorClass::Invariant => "invariant",
            };
            report(e.code(), name, exit, &e.to_string());
            ExitCode::from(exit)
        }
    }
}
