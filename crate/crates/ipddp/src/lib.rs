//! Interior-point differential dynamic programming for discrete-time optimal
//! control with arbitrary stagewise equality and inequality constraints.
//!
//! The solver alternates a constrained backward sweep that builds
//! feedforward/feedback gains with a fraction-to-boundary line search, inside
//! an outer loop that drives a log-barrier parameter to zero. Derivatives of
//! user problems come from forward-mode jets; a finite-difference oracle
//! validates them.
//!
//! Everything is generic over the working scalar (`f32` or `f64`); the
//! `*64` aliases at the crate root cover the common case.

pub mod backward;
pub mod derivatives;
pub mod error;
pub mod forward;
pub mod jet;
pub mod solver;
pub mod problem;
pub mod scalar;
pub mod trajectory;

pub use error::{Error, Result};
pub use jet::Jet;
pub use problem::{ControlProblem, SolverConfig};
pub use scalar::{Real, Smooth};
pub use trajectory::{
    initialize_variables, merit_phi, rollout, total_cost, violation_theta, Trajectory,
};

/// Trajectory with `f64` storage.
pub type Trajectory64 = Trajectory<f64>;
/// Solver configuration with `f64` tolerances.
pub type SolverConfig64 = SolverConfig<f64>;
