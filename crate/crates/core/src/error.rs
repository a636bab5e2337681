use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input has {got} features but the model expects {expected}")]
    InputShape { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("layer {layer} is not a hidden layer (valid: 1..={max})")]
    LayerOutOfRange { layer: usize, max: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("csv row {row}, column `{column}`: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("cannot form {k} clusters from {points} points")]
    InvalidClusterCount { k: usize, points: usize },

    #[error("cluster is empty")]
    EmptyCluster,

    #[error("partition does not match the network: {0}")]
    InconsistentPartition(String),

    #[error("local aggregation out of order: next layer to build is {expected}, requested {got}")]
    ConstructionOrder { expected: usize, got: usize },

    #[error(
        "value {value} of argument `{argument}` lies outside the activation domain [{lo}, {hi}]; \
         standardize or rescale inputs into the domain before translating"
    )]
    Domain {
        argument: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("argumentation framework contains a cycle")]
    Cycle,

    #[error("unknown argument `{0}`")]
    UnknownArgument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
