use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: argument {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} is not finite")]
    NonFinite { what: &'static str },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("incident direction {index}: {source}")]
    Direction {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("outer iteration {outer}, measurement {inner}: {source}")]
    Step {
        outer: usize,
        inner: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("residual is zero, nothing left to fit")]
    ZeroResidual,

    #[error("no regularization parameter in [{lo:e}, {hi:e}] brackets the discrepancy target")]
    NoBracket { lo: f64, hi: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_direction(self, index: usize) -> Self {
        Error::Direction {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, outer: usize, inner: usize) -> Self {
        Error::Step {
            outer,
            inner,
            source: Box::new(self),
        }
    }

    /// Short machine-readable category, used in structured error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch => "grid_mismatch",
            Error::Dimension { .. } => "dimension",
            Error::NonFinite { .. } => "non_finite",
            Error::Singular(_) => "singular",
            Error::Residual { .. } => "residual",
            Error::NotConverged { .. } => "not_converged",
            Error::Direction { source, .. } | Error::Step { source, .. } => source.kind(),
            Error::ZeroResidual => "zero_residual",
            Error::NoBracket { .. } => "no_bracket",
            Error::Config { .. } => "config",
            Error::ConfigParse(_) => "config_parse",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Internal(_) => "internal",
        }
    }
}
