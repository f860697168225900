use std::ops::Range;

use super::{default_workers, execute, split_even, Backend, RunError, RunOutput};
use crate::ir::compile::OutBuf;
use crate::ir::{Bindings, Fault, Program, Stream};

/// How the output element order is cut into work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partitioning {
    /// One contiguous range per worker, sizes within one of each other.
    Balanced,
    /// Fixed-size ranges dealt round-robin to workers. `Chunks(1)` is
    /// per-element, `Chunks(cols)` per-row on a 2-D output.
    Chunks(usize),
}

/// Multi-core backend with static scheduling over output elements.
///
/// Each worker evaluates its ranges in order into disjoint slices of the
/// output buffers. The per-element evaluation order is fixed by the program,
/// so results are bit-identical to the [`super::Interpreter`] for any worker
/// count or partitioning.
#[derive(Debug, Clone)]
pub struct ParallelBackend {
    workers: usize,
    partitioning: Partitioning,
    trusted_gathers: bool,
}

impl ParallelBackend {
    pub fn new(workers: usize) -> Self {
        ParallelBackend { workers: workers.max(1), partitioning: Partitioning::Balanced, trusted_gathers: false }
    }

    /// Worker count from `STREAMFORGE_WORKERS`, else available parallelism.
    pub fn from_env() -> Self {
        ParallelBackend::new(default_workers())
    }

    pub fn with_partitioning(mut self, partitioning: Partitioning) -> Self {
        self.partitioning = partitioning;
        self
    }

    /// Skips per-dimension bounds checks on gathers. Only for programs whose
    /// indices are known to be in range: a bad index then reads a wrong
    /// element or panics instead of reporting an error.
    pub fn with_trusted_gathers(mut self, trusted: bool) -> Self {
        self.trusted_gathers = trusted;
        self
    }

    pub fn partitioning(&self) -> Partitioning {
        self.partitioning
    }

    fn ranges(&self, n: usize) -> Vec<Range<usize>> {
        match self.partitioning {
            Partitioning::Balanced => split_even(n, self.workers),
            Partitioning::Chunks(c) => {
                let c = c.max(1);
                (0..n).step_by(c).map(|s| s..(s + c).min(n)).collect()
            }
        }
    }
}

type Share<'b> = Vec<(Range<usize>, Vec<OutBuf<'b>>)>;

impl Backend for ParallelBackend {
    fn id(&self) -> &str {
        "parallel"
    }

    fn worker_count(&self) -> usize {
        self.workers
    }

    fn trusted_gathers(&self) -> bool {
        self.trusted_gathers
    }

    fn run(&self, program: &Program, inputs: &[Stream<'_>], captures: &Bindings<'_>) -> Result<RunOutput, RunError> {
        execute(program, inputs, captures, !self.trusted_gathers, |kernel, outs, widths| {
            let mut shares: Vec<Share<'_>> = (0..self.workers).map(|_| Vec::new()).collect();
            let mut rest = outs;
            for (k, r) in self.ranges(kernel.len()).into_iter().enumerate() {
                let mut mine = Vec::with_capacity(rest.len());
                let mut tail = Vec::with_capacity(rest.len());
                for (buf, w) in rest.into_iter().zip(widths) {
                    let (a, b) = buf.split_at(r.len() * w);
                    mine.push(a);
                    tail.push(b);
                }
                rest = tail;
                shares[k % self.workers].push((r, mine));
            }

            // Each share runs its ranges in ascending order and stops at its
            // first failure, so the minimum over shares is the smallest
            // failing element overall.
            let run_share = |share: Share<'_>| -> Option<(usize, Fault)> {
                for (r, mut bufs) in share {
                    if let Err(e) = kernel.run_range(r, &mut bufs) {
                        return Some(e);
                    }
                }
                None
            };
            std::thread::scope(|s| {
                let mut shares = shares.into_iter();
                let local = shares.next().unwrap_or_default();
                let handles: Vec<_> = shares
                    .filter(|sh| !sh.is_empty())
                    .map(|sh| s.spawn(move || run_share(sh)))
                    .collect();
                let mut failures: Vec<(usize, Fault)> = run_share(local).into_iter().collect();
                for h in handles {
                    failures.extend(h.join().expect("worker panicked"));
                }
                failures.into_iter().min_by_key(|(e, _)| *e).map_or(Ok(()), Err)
            })
        })
    }
}
