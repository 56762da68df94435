use std::path::PathBuf;

/// Every failure the library can report.
///
/// Variants split into two families: input problems (bad config, bad
/// files, parameters outside their domain) and numerical failures (a
/// solver that did not converge, a non-finite intermediate). The CLI maps
/// the first family to exit code 1 and the second to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("electrode index {0} out of range (expected 0..7)")]
    ElectrodeIndex(usize),
    #[error("x = {x} um lies outside the tabulated domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("state labeling failed: {0}")]
    LabelingFailed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed input {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Davidson subspace collapsed at iteration {0}")]
    SubspaceCollapse(usize),
    #[error("linear solve failed at t = {t:.6}: residual {residual:.3e} after {iterations} iterations")]
    LinearSolveFailed {
        t: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SubspaceCollapse(_)
                | Error::LinearSolveFailed { .. }
                | Error::NonFinite(_)
                | Error::LabelingFailed(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
