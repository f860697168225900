//! Pure per-element stream programs over arrays, executed by interchangeable
//! backends, plus dense GEMM, CSR SpMV and radix-2 FFT kernels written as
//! such programs and the native reference implementations they are checked
//! against.
//!
//! ```
//! use streamforge_core::prelude::*;
//!
//! // out = in * 2
//! let p = Program::builder("double")
//!     .input(ScalarKind::F64, 1)
//!     .output(ScalarKind::F64, 1)
//!     .result(Expr::input(0) * Expr::constant(Value::f64(2.0)))
//!     .build()
//!     .unwrap();
//! let x = StreamArray::vector(vec![1.0f64, 2.5]).unwrap();
//! let out = Interpreter.run(&p, &[Stream::from(&x)], &Bindings::new()).unwrap();
//! assert_eq!(out.into_single().as_slice::<f64>().unwrap(), &[2.0, 5.0]);
//! ```

pub mod array;
pub mod backend;
pub mod error;
pub mod ir;
pub mod kernels;
pub mod oracles;
pub mod swizzle;
pub mod value;

pub use array::{grid, make_array, GridArray, Shape, StreamArray};
pub use backend::{backend_from_id, partition, Backend, Interpreter, ParallelBackend, Partitioning, RunError, RunOutput, RunStats};
pub use error::CoreError;
pub use ir::{
    build_program, eval_element, validate_call, ArithOp, Bindings, CallError, CallPlan, Expr, LoopId, LoopSpec, Program,
    ProgramBuilder, ProgramError, Stmt, Stream, VarId,
};
pub use swizzle::{swizzle, swizzle_array, unswizzle, SwizzledMatrix, DEFAULT_BLOCK};
pub use value::{Element, Real, ScalarKind, Storage, Ty, Value};

pub mod prelude {
    pub use crate::array::{grid, make_array, GridArray, Shape, StreamArray};
    pub use crate::backend::{Backend, Interpreter, ParallelBackend};
    pub use crate::ir::{Bindings, Expr, LoopId, LoopSpec, Program, Stmt, Stream, VarId};
    pub use crate::value::{ScalarKind, Value};
}
