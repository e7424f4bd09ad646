//! Forward semi-Lagrangian solver for the 1D×1V Vlasov–Poisson system.
//!
//! Each grid node carries a B-spline coefficient. A step pushes every node
//! along an approximate characteristic (Verlet, or second/third order
//! Cauchy–Kovalevsky expansions), deposits the coefficients back onto the
//! fixed grid and re-solves for new coefficients.

pub mod cases;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod moments;
pub mod pushers;
pub mod solver;
pub mod splines;

pub use cases::{CaseConfig, CaseKind};
pub use error::{Error, Result};
pub use field::PoissonMethod;
pub use grid::{PhaseArray, PhaseGrid};
pub use pushers::{FieldSource, FrozenField, PusherKind};
pub use solver::{run, step, DistributionState, RunOutput, RunSettings, Scheme};
pub use splines::{CoefficientField, SplineKind};
