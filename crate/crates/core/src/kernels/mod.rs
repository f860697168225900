//! Dense GEMM (three variants), CSR SpMV and radix-2 FFT written as stream
//! programs. Every kernel builds its programs per call and runs them on the
//! backend it is given.

mod fft;
mod gemm;
mod spmv;

use thiserror::Error;

use crate::backend::RunError;
use crate::error::CoreError;
use crate::ir::ProgramError;
use crate::value::ScalarKind;

pub use fft::{mod2f, ComplexSignal, Direction, FftPlan};
pub(crate) use gemm::check_operands;
pub use gemm::{mod2am_blocked, mod2am_simple, mod2am_vec4, mxm_program, GemmDims};
pub use spmv::{csr_from_dense, mod2as, spmxv_program, CsrError, CsrMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid dimensions: {0}")]
    Dimension(String),
    #[error("kernel needs float data, got {0}")]
    UnsupportedKind(ScalarKind),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error(transparent)]
    Format(#[from] CsrError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}
