//! American, European and knock-out option pricing under finite-activity
//! jump-diffusions by iterating diffusion-only complementarity problems.
//!
//! Each iterate treats the jump integral of the previous iterate as a known
//! source, so every step is an ordinary tridiagonal obstacle problem that
//! projected SOR or Brennan-Schwartz elimination solves directly.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod engine;
pub mod error;
pub mod grid;
pub mod jumpconv;
pub mod lcp;
pub mod model;
pub mod oracle;
mod quad;

pub use engine::{
    analytic_iteration_bound, discrete_rate_bound, extract_free_boundary, iterate_to_fixed_point,
    EngineConfig, IterationReport, PriceResult, Pricer, SolverKind, Surface,
};
pub use error::{Error, Result};
pub use grid::{build_grid, Grid, GridSpec, TimeSteps};
pub use model::{
    Barrier, ExerciseStyle, JumpDistribution, ModelParams, OptionSpec, Payoff,
};
