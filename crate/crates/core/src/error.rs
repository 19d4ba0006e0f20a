use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown {kind} category `{name}`")]
    UnknownCategory { kind: &'static str, name: String },

    #[error("invalid record `{scene_id}`: {reason}")]
    InvalidRecord { scene_id: String, reason: String },

    #[error("land-use category `{0}` has fewer than 3 samples and cannot be stratified")]
    TooFewSamples(String),

    #[error("scene `{0}` has no land-use label")]
    Unlabeled(String),

    #[error("oversampling factor {factor} for `{category}` is below 1")]
    BadFactor { category: String, factor: f64 },

    #[error("sequence length mismatch: model expects {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero-area box ({w} x {h})")]
    ZeroArea { w: f64, h: f64 },

    #[error("cannot place {count} boxes with `{style}` layout: {reason}")]
    ImpossiblePlacement { count: usize, style: String, reason: String },

    #[error("tamper depth {k} exceeds box count {count}")]
    TamperTooDeep { k: usize, count: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
