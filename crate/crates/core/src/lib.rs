//! Rotation sets of billiards on the m-torus and in the unit square with one
//! small ball obstacle.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line tool uses.

pub mod bounds;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod graph;
pub mod hull;
pub mod lattice;
pub mod rotation;
pub mod scalar;
pub mod solver;
pub mod square;

pub use bounds::{analytic_lower_bounds, beta, eta, n_of_r, st15_upper_bound, LowerBounds, St15Estimate};
pub use error::{Error, ErrorClass, Result};
pub use flow::{empirical_rotation, free_flight_directions, simulate, BatchSpec, EventKind, InitialCondition};
pub use geometry::{angle_between, point_segment_distance, ray_ball_intersect, reflect_direction, LatticeIndex};
pub use graph::{
    build_square_graph, build_torus_graph, is_admissible, AdmissibleType, GraphAudit, LoopSpec, SquareGraph,
    SquareVertex, TorusGraph,
};
pub use hull::convex_hull;
pub use lattice::{zeta, ConfigDoc, GeometryKind};
pub use rotation::{estimate_admissible_hull, generate_tracking_path, RotationSetEstimate, TrackingRun};
pub use scalar::Scalar;
pub use solver::{orbit_rotation_vector, solve_constrained_path, solve_periodic_orbit, SolverOptions};
pub use square::{longdiag_loop, square_ar_interval, winding_displacement, winding_rotation, SquareInterval};

pub type Vector = geometry::VecN<f64>;
pub type Ball = geometry::Ball<f64>;
pub type Ray = geometry::Ray<f64>;
pub type Config = lattice::BilliardConfig<f64>;
pub type FlowState = flow::FlowState<f64>;
pub type TrajectoryRecord = flow::TrajectoryRecord<f64>;
pub type PeriodicOrbit = solver::PeriodicOrbit<f64>;
pub type ConstrainedPath = solver::ConstrainedPath<f64>;
pub type Hull = hull::Hull<f64>;
pub type WindingTrace = square::WindingTrace<f64>;
