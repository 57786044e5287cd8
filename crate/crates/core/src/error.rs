use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurvivalError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite hazard at index {index}")]
    NonFinite { index: usize },
    #[error("baseline hazard is not positive at event index {index}")]
    NonPositiveHazard { index: usize },
    #[error("record {id}: time {time} is not a finite nonnegative number")]
    InvalidTime { id: u64, time: f64 },
    #[error("step function needs strictly increasing knots and nondecreasing nonnegative values")]
    InvalidStepFunction,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    Shape {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid layer config: {0}")]
    Config(String),
    #[error("backward called without a cached forward pass (layer {layer})")]
    MissingCache { layer: usize },
    #[error("non-finite value produced by layer {layer}")]
    NonFinite { layer: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NumericAbort { epoch: usize, batch: usize },
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Survival(#[from] SurvivalError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
