//! Execution backends. A backend runs any validated [`Program`] over the
//! elements of its input streams; results never depend on which backend ran
//! them or how many workers it used.

mod interp;
mod parallel;

use std::ops::Range;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::array::{Shape, StreamArray};
use crate::ir::compile::{Kernel, OutBuf};
use crate::ir::{validate_call, Bindings, CallError, Fault, FaultKind, Program, Stream};
use crate::value::Storage;

pub use interp::Interpreter;
pub use parallel::{ParallelBackend, Partitioning};

/// Environment variable overriding the default parallel worker count.
pub const WORKERS_ENV: &str = "STREAMFORGE_WORKERS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Call(#[from] CallError),
    #[error("element {index:?}: {fault}")]
    Element { index: Vec<usize>, fault: FaultKind },
    #[error("element {index:?} outside output extents {extents:?}")]
    ElementOutOfRange { index: Vec<usize>, extents: Vec<usize> },
    #[error("unknown backend `{0}` (expected interp or parallel)")]
    UnknownBackend(String),
}

/// Whole-call measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    /// Validation, binding, evaluation and output materialization.
    pub elapsed: Duration,
    /// Input, capture and output bytes.
    pub bytes_bound: usize,
    pub elements: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub outputs: Vec<StreamArray>,
    pub stats: RunStats,
}

impl RunOutput {
    /// The sole output of a single-output program.
    pub fn into_single(self) -> StreamArray {
        self.outputs.into_iter().next().expect("program has at least one output")
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn worker_count(&self) -> usize;

    fn trusted_gathers(&self) -> bool {
        false
    }

    fn run(&self, program: &Program, inputs: &[Stream<'_>], captures: &Bindings<'_>) -> Result<RunOutput, RunError>;
}

/// Selects a backend by id. `workers` applies to the parallel backend; when
/// absent it falls back to [`WORKERS_ENV`], then to the machine's parallelism.
pub fn backend_from_id(id: &str, workers: Option<usize>) -> Result<Box<dyn Backend>, RunError> {
    match id {
        "interp" => Ok(Box::new(Interpreter)),
        "parallel" => Ok(Box::new(match workers {
            Some(w) => ParallelBackend::new(w),
            None => ParallelBackend::from_env(),
        })),
        other => Err(RunError::UnknownBackend(other.to_string())),
    }
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&w| w > 0)
}

pub fn default_workers() -> usize {
    workers_from_env().unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Splits the row-major element order of `shape` into `worker_count`
/// contiguous ranges whose sizes differ by at most one. Trailing ranges are
/// empty when there are more workers than elements.
pub fn partition(shape: Shape, worker_count: usize) -> Vec<Range<usize>> {
    split_even(shape.element_count(), worker_count.max(1))
}

pub(crate) fn split_even(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Common call path: validate, stage bound arrays into backend-owned copies
/// (the host-to-device transfer of an accelerator), compile, evaluate via
/// `schedule`, and wrap outputs. Everything here is inside the timed interval.
pub(crate) fn execute<S>(
    program: &Program,
    inputs: &[Stream<'_>],
    captures: &Bindings<'_>,
    checked: bool,
    schedule: S,
) -> Result<RunOutput, RunError>
where
    S: FnOnce(&Kernel<'_>, Vec<OutBuf<'_>>, &[usize]) -> Result<(), (usize, Fault)>,
{
    let start = Instant::now();
    let plan = validate_call(program, inputs, captures)?;
    let bytes_bound = plan.bytes_bound();
    let shape = plan.shape;

    let staged_inputs: Vec<Option<StreamArray>> = plan
        .inputs
        .iter()
        .map(|s| match s {
            Stream::Array(a) => Some((*a).clone()),
            Stream::Grid(_) => None,
        })
        .collect();
    let staged_captures: Vec<StreamArray> = plan.captures.iter().map(|a| (*a).clone()).collect();
    let input_streams: Vec<Stream<'_>> = plan
        .inputs
        .iter()
        .zip(&staged_inputs)
        .map(|(s, staged)| match staged {
            Some(a) => Stream::Array(a),
            None => *s,
        })
        .collect();
    let capture_refs: Vec<&StreamArray> = staged_captures.iter().collect();

    let kernel = Kernel::compile(program, &input_streams, &capture_refs, shape, checked);
    let n = shape.element_count();
    let mut storages: Vec<Storage> =
        program.outputs().iter().map(|t| Storage::zeros(t.kind, n * t.width)).collect();
    let widths: Vec<usize> = program.outputs().iter().map(|t| t.width).collect();
    let bufs: Vec<OutBuf<'_>> = storages.iter_mut().map(OutBuf::of).collect();

    schedule(&kernel, bufs, &widths).map_err(|(e, fault)| RunError::Element {
        index: shape.unravel(e)[..shape.rank()].to_vec(),
        fault: fault.into_kind(),
    })?;
    drop(kernel);

    let outputs = storages
        .into_iter()
        .zip(&widths)
        .map(|(s, &w)| StreamArray::from_storage(shape, w, s).expect("output sized from signature"))
        .collect();
    Ok(RunOutput { outputs, stats: RunStats { elapsed: start.elapsed(), bytes_bound, elements: n } })
}
