use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-Hermitian input: {what} deviates by {deviation:.3e}")]
    NonHermitian { what: String, deviation: f64 },

    #[error("non-neutral coherence: |∫σ_{alpha}{beta}| = {integral:.3e} exceeds {bound:.3e}")]
    NonNeutralCoherence {
        alpha: usize,
        beta: usize,
        integral: f64,
        bound: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("time {t} outside time grid [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("field envelope not off at t0: |A|/peak = {ratio:.3e} (mode {mode})")]
    EnvelopeNotOff { mode: usize, ratio: f64 },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("order {0} outside 1..=3")]
    InvalidOrder(usize),

    #[error("field not spatially uniform: relative variation {0:.3e}")]
    NonUniformField(f64),

    #[error("zero linewidth on resonant pair ({alpha}, {beta})")]
    ZeroLinewidth { alpha: usize, beta: usize },

    #[error("heterodyne mode not transverse: |q·e| = {0:.3e}")]
    NonTransverse(f64),

    #[error("propagation did not converge: endpoint change {change:.3e} after {halvings} halvings")]
    NonConvergent { change: f64, halvings: usize },

    #[error("trace drift {0:.3e} beyond tolerance")]
    TraceDrift(f64),

    #[error("ill-conditioned order fit (condition number {0:.3e})")]
    IllConditionedFit(f64),

    #[error("amplitude outside perturbative regime: population transfer {0:.3e}")]
    NotPerturbative(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: expected {expected} bytes, found {found}")]
    BinaryLength {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: missing key `{key}`")]
    MissingKey { path: PathBuf, key: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::BinaryLength { .. }
            | Error::MissingKey { .. }
            | Error::Parse { .. } => 2,
            Error::NonConvergent { .. }
            | Error::TraceDrift(_)
            | Error::IllConditionedFit(_)
            | Error::NotPerturbative(_)
            | Error::ZeroLinewidth { .. } => 3,
            _ => 1,
        }
    }
}
