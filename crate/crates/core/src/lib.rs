//! Sequential-bonus principal-agent contracting.
//!
//! The crate computes first-best value bounds by convex duality, solves the
//! recursive system of HJB variational inequalities for the second-best
//! principal value with a penalized implicit finite-difference scheme and
//! policy iteration, extracts the optimal bonus scheme, and replays the
//! resulting feedback policy by Monte Carlo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod firstbest;
pub mod grid;
pub mod hjb;
pub mod model;
pub mod numeric;
pub mod scheme;
pub mod sim;

pub use error::{Error, Result};
pub use firstbest::{fb_bounds, FbSchedule, FirstBestBounds, Regime};
pub use grid::Grid;
pub use hjb::{
    intervention_m, optimize_z, solve_free, solve_level, solve_recursive, solve_scheduled, step_backward,
    LevelSolution, PolicyField, SolverConfig, ValueSurface, ZChoice,
};
pub use model::{build_envelope, supersolution_phi, DeltaEnvelope, ModelParams, ModelSpec};
pub use scheme::{extract_eta, intervention_region, BonusScheme, Diagnostics};
pub use sim::{simulate_value, ConstantPolicy, Decision, FeedbackPolicy, GridPolicy, SimConfig, SimResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
