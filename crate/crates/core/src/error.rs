use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad category of an [`Error`], used to pick a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid configuration or arguments.
    Usage,
    /// Input data that parses but violates a model invariant, or fails to parse.
    Data,
    /// Failures while running (I/O, numerical breakdown).
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("histogram breaks are not strictly increasing at position {index}")]
    NonMonotoneBreaks { index: usize },

    #[error("histogram weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },

    #[error("histogram weight {index} is negative or not finite")]
    InvalidWeight { index: usize },

    #[error("histogram has {breaks} breaks but {weights} weights")]
    HistogramShape { breaks: usize, weights: usize },

    #[error("invalid quantile function: {0}")]
    InvalidQuantile(String),

    #[error("sample is empty")]
    EmptySample,

    #[error("non-finite value in input ({0})")]
    NonFiniteInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variable `{variable}` has zero dispersion")]
    ZeroDispersion { variable: String },

    #[error("weight scheme mismatch: {0}")]
    SchemeMismatch(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("toroidal hexagonal maps need an even number of rows and columns, got {rows}x{cols}")]
    ToroidalParity { rows: usize, cols: usize },

    #[error("invalid map grid: {0}")]
    InvalidGrid(String),

    #[error("kernel radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),

    #[error("neuron {neuron} receives zero kernel mass")]
    ZeroKernelMass { neuron: usize },

    #[error("cannot draw {neurons} distinct prototypes from {objects} objects")]
    TooManyNeurons { neurons: usize, objects: usize },

    #[error("relevance weights violate their product constraint (residual {residual:e})")]
    ConstraintViolation { residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("silhouette needs at least two non-empty clusters")]
    SingleCluster,

    #[error("topographic error needs at least two neurons")]
    TooFewNeurons,

    #[error("partitions have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("partitions need at least {required} objects, got {found}")]
    TooFewObjects { required: usize, found: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("object `{object}`, variable `{variable}`: {source}")]
    InvariantViolation {
        object: String,
        variable: String,
        #[source]
        source: Box<Error>,
    },

    #[error("series of object `{object}` have different lengths across variables")]
    RaggedSeries { object: String },

    #[error("unknown object id `{0}`")]
    UnknownObjectId(String),

    #[error("no label supplied for object `{0}`")]
    MissingLabel(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_)
            | Error::ToroidalParity { .. }
            | Error::InvalidGrid(_)
            | Error::NonPositiveRadius(_)
            | Error::TooManyNeurons { .. } => ErrorKind::Usage,
            Error::Io { .. } | Error::ZeroKernelMass { .. } | Error::ConstraintViolation { .. } => {
                ErrorKind::Runtime
            }
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }
}
