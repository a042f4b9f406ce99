//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by graph construction, rank computation, testing, the
/// simulation harness, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violated a structural requirement (shape, finiteness,
    /// missing values, malformed header, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A covariate row contains a non-finite value.
    #[error("non-finite covariate value in row {row}")]
    NonFiniteCovariate { row: usize },

    /// The residual distance graph became disconnected before the requested
    /// number of spanning trees could be extracted.
    #[error("residual graph disconnected in spanning-tree round {round} of {requested}")]
    ResidualDisconnected { round: usize, requested: usize },

    /// A cluster id outside the assignment was requested.
    #[error("unknown cluster id {id} (assignment has {n_clusters} clusters)")]
    UnknownCluster { id: usize, n_clusters: usize },

    /// Closed-form permutation moments require at least four observations.
    #[error("unsupported sample size {n}: permutation moments require n >= 4")]
    UnsupportedSize { n: usize },

    /// The permutation variance of the statistic is (numerically) zero, so
    /// the standardized statistic is undefined.
    #[error(
        "degenerate permutation variance {variance:.3e} (threshold {threshold:.3e}); \
         the standardized statistic is undefined for this graph/label combination"
    )]
    DegenerateVariance { variance: f64, threshold: f64 },

    /// An intercept covariance matrix was not positive definite.
    #[error("covariance matrix not positive definite for tau2={tau2}, rho={rho}")]
    NotPositiveDefinite { tau2: f64, rho: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line interface. Each error
    /// class maps to a distinct nonzero code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidConfig(_)
            | Error::NonFiniteCovariate { .. }
            | Error::UnknownCluster { .. }
            | Error::UnsupportedSize { .. }
            | Error::NotPositiveDefinite { .. } => 2,
            Error::DegenerateVariance { .. } => 3,
            Error::ResidualDisconnected { .. } => 4,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
