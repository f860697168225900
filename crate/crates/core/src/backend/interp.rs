use super::{execute, Backend, RunError, RunOutput};
use crate::ir::{Bindings, Program, Stream};

/// Sequential reference backend: elements in row-major order on the calling
/// thread, gathers always bounds-checked.
#[derive(Debug, Clone, Copy, Default)]
pub struct Interpreter;

impl Backend for Interpreter {
    fn id(&self) -> &str {
        "interp"
    }

    fn worker_count(&self) -> usize {
        1
    }

    fn run(&self, program: &Program, inputs: &[Stream<'_>], captures: &Bindings<'_>) -> Result<RunOutput, RunError> {
        execute(program, inputs, captures, true, |kernel, mut outs, _| kernel.run_range(0..kernel.len(), &mut outs))
    }
}
