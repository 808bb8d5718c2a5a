use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("case schema violation: {0}")]
    Schema(String),
    #[error("duplicate bus id {0}")]
    DuplicateBus(i64),
    #[error("branch {branch} references missing bus {bus}")]
    MissingBus { branch: usize, bus: i64 },
    #[error("branch {0} has zero series impedance")]
    ZeroImpedance(usize),
    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    NotConverged { iterations: usize, mismatch: f64 },
    #[error("singular Jacobian at iteration {0}")]
    SingularJacobian(usize),

    #[error("time instance {tau} outside scenario range 1..={len}")]
    InstanceOutOfRange { tau: usize, len: usize },

    #[error("measurement {0} has zero variance")]
    ZeroVariance(String),
    #[error("empty measurement set")]
    EmptyMeasurements,
    #[error("unobservable model: {deficient} of {columns} state columns are rank deficient")]
    Unobservable { deficient: usize, columns: usize },
    #[error("numerical blow-up in belief propagation at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },
    #[error("normalized WRSS undefined: reference WRSS is zero")]
    UndefinedRatio,

    #[error("model format error: {0}")]
    ModelFormat(String),
    #[error("model version {found} unsupported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("incomplete {k}-hop neighborhood around bus {target}: {detail}")]
    IncompleteNeighborhood { target: usize, k: usize, detail: String },

    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NotConverged { .. }
            | Error::SingularJacobian(_)
            | Error::Unobservable { .. }
            | Error::NonFinite { .. }
            | Error::UndefinedRatio => ErrorClass::Numeric,
            _ => ErrorClass::Config,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
