use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. `path` is a JSON-pointer-like
    /// location such as `/scheme/feeder_km`.
    #[error("invalid config at {path}: {message}")]
    Config { path: String, message: String },

    #[error("splitter ratio {0} is not a power of two")]
    SplitterRatio(u32),

    #[error("stage `{stage}` has no insertion loss for signal `{signal}`")]
    MissingStageLoss { stage: String, signal: String },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("Raman model has alpha_q == alpha_c; use the limit form")]
    DegenerateAttenuation,

    #[error("calibration is degenerate: {0}")]
    DegenerateFit(String),

    #[error("output length {out_len} exceeds input length {in_len}")]
    OutputTooLong { out_len: usize, in_len: usize },

    #[error("Toeplitz seed must be {expected} bits, got {got}")]
    SeedLength { expected: usize, got: usize },

    #[error("key too short for reconciliation: {0} bits")]
    KeyTooShort(usize),

    #[error("key lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("malformed key file: {0}")]
    KeyFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
