use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("invalid binning scheme: {0}")]
    InvalidScheme(String),

    #[error("bin index {index} out of range for {n_bins} bins")]
    BinOutOfRange { index: usize, n_bins: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("descriptor at cell ({row}, {col}) is not unit length (norm {norm})")]
    NotUnitNorm { row: usize, col: usize, norm: f64 },

    #[error("invalid template model: {0}")]
    InvalidModel(String),

    #[error("resolution {height}x{width} cannot contain the projected model")]
    ResolutionTooSmall { height: usize, width: usize },

    #[error("location ({u}, {v}) lies outside the {height}x{width} grid")]
    OutOfBounds { u: f64, v: f64, height: usize, width: usize },

    #[error("estimator requires the true viewpoint difference")]
    MissingTruth,

    #[error("only {found} usable keypoint matches, need at least {required}")]
    InsufficientMatches { found: usize, required: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
