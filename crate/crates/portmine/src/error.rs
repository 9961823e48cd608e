//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by ingestion, matrix construction, mining, the decision
/// function and the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {path}")]
    MissingFile { path: String },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("duplicate evaluation key ({task_id}, {config_id}, fold {fold})")]
    DuplicateKey {
        task_id: String,
        config_id: String,
        fold: u32,
    },

    #[error("duplicate task id {task_id}")]
    DuplicateTaskId { task_id: String },

    #[error("duplicate config id {config_id}")]
    DuplicateConfigId { config_id: String },

    #[error("range violation in {field} for {task_id}: {value}")]
    RangeViolation {
        task_id: String,
        field: &'static str,
        value: f64,
    },

    #[error("unknown id {id}")]
    UnknownId { id: String },

    #[error("task {task_id} has no successful evaluation")]
    EmptyColumn { task_id: String },

    #[error("cell ({config_id}, {task_id}) has no successful evaluation")]
    MissingCell { task_id: String, config_id: String },

    #[error("no evaluation records given")]
    EmptyInput,

    #[error("explicit baseline does not cover task {task_id}")]
    CoverageGap { task_id: String },

    #[error("dimension mismatch: {reason}")]
    DimensionMismatch { reason: String },

    #[error("config index {index} out of range for {len} configs")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("portfolio has no members")]
    EmptyPortfolio,

    #[error("regret matrix is empty")]
    EmptyMatrix,

    #[error("requested portfolio size {requested} exceeds {available} configs")]
    SizeTooLarge { requested: usize, available: usize },

    #[error("invalid mining options: {reason}")]
    InvalidOptions { reason: String },

    #[error("all extension scores are non-finite")]
    NonFiniteScores,

    #[error("task table is empty")]
    EmptyTable,

    #[error("decision model has no anchors")]
    EmptyModel,

    #[error("need at least {needed} tasks, got {got}")]
    TooFewTasks { needed: usize, got: usize },

    #[error("need at least {needed} anchors, got {got}")]
    TooFewAnchors { needed: usize, got: usize },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u64 },

    #[error("schema violation: {reason}")]
    SchemaViolation { reason: String },

    #[error("statistics over an empty list")]
    EmptyList,

    #[error("unknown task id {task_id} in prefix order")]
    UnknownTaskId { task_id: String },

    #[error("invalid generator shape: {reason}")]
    InvalidShape { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
