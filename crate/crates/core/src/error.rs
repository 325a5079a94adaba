use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error at layer {index} ({kind}): {detail}")]
    Shape {
        index: usize,
        kind: String,
        detail: String,
    },

    #[error("tensor shape {shape:?} does not hold {len} elements")]
    TensorSize { shape: Vec<usize>, len: usize },

    #[error("non-finite input value in batch row {index}")]
    NonFiniteInput { index: usize },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "model has {depth} instrumented layers but L_max is {l_max}; \
         raise L_max for the whole corpus"
    )]
    TooDeep { depth: usize, l_max: usize },

    #[error("token stream of length {len} exceeds S = {max}; choose S >= {len} for the corpus")]
    SequenceOverflow { len: usize, max: usize },

    #[error("operator {op} is not applicable: {reason}")]
    Inapplicable { op: String, reason: String },

    #[error("seed model '{id}' reaches test accuracy {accuracy:.3}, below the {floor} floor")]
    BelowAccuracyFloor { id: String, accuracy: f64, floor: f64 },

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            context: context.into(),
            source,
        }
    }
}
