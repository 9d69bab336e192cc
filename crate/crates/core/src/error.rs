use alloc::string::String;

use crate::tensor::{ParamId, Shape};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("data length {len} does not match shape {shape}")]
    DataLength { shape: Shape, len: usize },
    #[error("{op}: shape mismatch between {left} and {right}")]
    ShapeMismatch { op: &'static str, left: Shape, right: Shape },
    #[error("{op}: input {input} with kernel {kernel} yields a non-positive output size")]
    NonPositiveOutput { op: &'static str, input: Shape, kernel: Shape },
    #[error("{op}: spatial size of {shape} must be even")]
    OddSpatial { op: &'static str, shape: Shape },
    #[error("{block}: expected {expected} input channels, got {got}")]
    ChannelMismatch { block: &'static str, expected: usize, got: usize },
    #[error("{0}: backward called before forward")]
    BackwardBeforeForward(&'static str),
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("target value {value} at index {index} is outside [0, 1]")]
    TargetOutOfRange { index: usize, value: f64 },
    #[error("mask value {value} at index {index} is not binary")]
    NonBinaryMask { index: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("optimizer state for parameter {0:?} is missing or does not match its shape")]
    UninitializedState(ParamId),
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument { op, msg: msg.into() }
    }
}
