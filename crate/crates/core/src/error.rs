use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("velocity {v} lies outside [-{vmax}, {vmax}]")]
    OutOfDomain { v: f64, vmax: f64 },

    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("periodic Poisson problem has no solution: mean charge density {mean:e}")]
    Solvability { mean: f64 },

    #[error("non-finite value in distribution at step {step}")]
    NumericalAbort { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
