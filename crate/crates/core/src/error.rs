use thiserror::Error;

/// Errors raised by the tensor, solver, and restoration layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor dims {0:?} are empty or contain a zero-length mode")]
    EmptyTensor(Vec<usize>),

    #[error("data length {actual} does not match dims {dims:?} (expected {expected})")]
    DataLength {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("mode {mode} out of range for a {order}-way tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),

    #[error("rank {rank} out of range 1..={dim} for mode {mode}")]
    RankOutOfRange {
        mode: usize,
        rank: usize,
        dim: usize,
    },

    #[error("singular value decomposition did not converge")]
    SvdFailed,

    #[error("invalid observation mask: {0}")]
    InvalidMask(String),

    #[error("observation set is empty")]
    EmptyObservation,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid restoration plan: {0}")]
    InvalidPlan(String),

    #[error("a {cells}x{cells} grid does not fit a {height}x{width} image")]
    GridTooFine {
        cells: usize,
        height: usize,
        width: usize,
    },

    #[error("duplicate patch index {0} in accepted set")]
    DuplicatePatch(usize),

    #[error("patch {index}: {source}")]
    Patch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate patch: {0}")]
    DegeneratePatch(String),

    #[error("reference tensor has zero Frobenius norm")]
    ZeroReference,

    #[error("missing ratio must lie in [0, 1), got {0}")]
    InvalidRatio(f64),

    #[error("image: {0}")]
    Image(String),

    #[error("mask file: {0}")]
    MaskFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 1 usage, 2 I/O, 3 solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Image(_) | Error::MaskFormat(_) => 2,
            Error::Config(_) | Error::InvalidRatio(_) | Error::InvalidPlan(_) => 1,
            _ => 3,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
