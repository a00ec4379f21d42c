use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("requested {requested} localized eigenvalues but only {found} were found")]
    SpectrumCount { requested: usize, found: usize },

    #[error("spectral parameter k = {k} is within {distance:.3e} of the singular set {{0, ±ω₀}}")]
    NearSingular { k: f64, distance: f64 },

    #[error("input violates the required x-parity (defect {defect:.3e})")]
    ParityViolation { defect: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear system is ill conditioned (estimate {estimate:.3e})")]
    IllConditioned { estimate: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("no transverse instability at kappa = {kappa} (smallest pencil eigenvalue {mu:.3e} >= 0)")]
    NoInstability { kappa: f64, mu: f64 },

    #[error("non-finite field values at t = {t}")]
    NonFinite { t: f64 },

    #[error("linear growth window was never reached (overall log-slope {slope:.3e})")]
    NoGrowthWindow { slope: f64 },
}
