use thiserror::Error;

use crate::value::{ScalarKind, Ty};

/// Errors raised by the value and array containers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid shape {0:?}: rank must be 1 or 2 and every extent positive")]
    InvalidShape(Vec<usize>),
    #[error("invalid value width {0}, expected 1..=4")]
    InvalidWidth(usize),
    #[error("component {index} out of range for width {width}")]
    ComponentOutOfRange { index: usize, width: usize },
    #[error("index {index:?} out of range for extents {extents:?}")]
    IndexOutOfRange { index: Vec<usize>, extents: Vec<usize> },
    #[error("expected {expected} element, got {found}")]
    TypeMismatch { expected: Ty, found: Ty },
    #[error("expected {expected} storage, got {found}")]
    KindMismatch { expected: ScalarKind, found: ScalarKind },
    #[error("buffer holds {found} scalars, shape needs {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("block edge must be at least 1")]
    InvalidBlock,
}
