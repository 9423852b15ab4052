use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("IV curve has no negative differential resistance region")]
    NoNdr,

    #[error("fit diverged after {iterations} iterations (residual rms {rms:.3e} A)")]
    FitDiverged { iterations: usize, rms: f64 },

    #[error("integration unstable at t = {time:.3e} s (state magnitude {magnitude:.3e})")]
    StepUnstable { time: f64, magnitude: f64 },

    #[error("trace too short: {len} samples, need at least {min}")]
    TraceTooShort { len: usize, min: usize },

    #[error("no spectral content above the noise floor of {floor_dbm} dBm")]
    NoSignal { floor_dbm: f64 },

    #[error("DC power must be positive")]
    ZeroDcPower,

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("board id `{0}` is already enrolled")]
    DuplicateId(String),

    #[error("enrollment needs at least {needed} sweeps, got {got}")]
    TooFewSweeps { needed: usize, got: usize },

    #[error("fingerprint database is empty")]
    EmptyDatabase,

    #[error("non-positive input: {0}")]
    NonPositiveInput(String),

    #[error("tag cannot be powered even at {distance_m} m")]
    InfeasibleAtContact { distance_m: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
