//! Whole-kernel timing of one configuration.

use std::time::{Duration, Instant};

use streamforge_core::kernels::{
    mod2am_blocked, mod2am_simple, mod2am_vec4, mod2as, mod2f, ComplexSignal, Direction, GemmDims, KernelError,
};
use streamforge_core::oracles::{
    fft_reference, fft_tolerance, gemm_error, gemm_fast_native, gemm_tolerance, rel_l2, spmv_error, spmv_native,
};
use streamforge_core::{Backend, Interpreter, ParallelBackend, ScalarKind, StreamArray, DEFAULT_BLOCK};

use crate::generate::{generate_dense, generate_signal, generate_sparse, generate_vector, AnyCsr};
use crate::{flop_count, BackendKind, BenchError, Kernel, Precision, Sizes};

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub kernel: Kernel,
    pub backend: BackendKind,
    pub precision: Precision,
    pub sizes: Sizes,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    /// Test hook: perturbs every kernel result before it is checked.
    pub inject_fault: bool,
}

/// One timed configuration. Size fields that do not apply are `None`; a
/// sparse run stores rows in `m` and columns in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub kernel: &'static str,
    pub variant: &'static str,
    pub backend: &'static str,
    pub precision: &'static str,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub nnz: Option<usize>,
    pub fft_n: Option<usize>,
    pub reps: usize,
    pub min_s: f64,
    pub median_s: f64,
    pub gflops: f64,
    pub bytes: usize,
    pub checksum: f64,
}

enum Inputs {
    Gemm { a: StreamArray, b: StreamArray, dims: GemmDims },
    Sparse { csr: AnyCsr, invec: StreamArray },
    Fft { x: ComplexSignal },
}

/// Sum of all output components, accumulated in `f64`.
pub fn checksum(a: &StreamArray) -> f64 {
    let s = a.storage();
    (0..s.len()).map(|i| s.get_f64(i)).sum()
}

fn usage(e: impl ToString) -> BenchError {
    BenchError::Usage(e.to_string())
}

fn prepare(m: &Measurement) -> Result<Inputs, BenchError> {
    let p = m.precision;
    let other = m.seed.wrapping_add(1);
    match (m.kernel, m.sizes) {
        (Kernel::Mod2amSimple | Kernel::Mod2amVec4 | Kernel::Mod2amBlocked, Sizes::Gemm { m: rows, n, l }) => {
            let dims = GemmDims::new(rows, n, l).map_err(usage)?;
            if m.kernel == Kernel::Mod2amVec4 && (rows % 4 != 0 || n % 4 != 0 || l % 4 != 0) {
                return Err(usage(format!("mod2am-vec4 needs sizes divisible by 4, got {rows}x{n}x{l}")));
            }
            Ok(Inputs::Gemm { a: generate_dense(rows, l, m.seed, p)?, b: generate_dense(l, n, other, p)?, dims })
        }
        (Kernel::Mod2as, Sizes::Sparse { nrows, ncols, density }) => Ok(Inputs::Sparse {
            csr: generate_sparse(nrows, ncols, density, m.seed, p)?,
            invec: generate_vector(ncols, other, p)?,
        }),
        (Kernel::Mod2f, Sizes::Fft { n }) => Ok(Inputs::Fft { x: generate_signal(n, m.seed, p)? }),
        (k, s) => Err(usage(format!("sizes {s:?} do not fit kernel {k}"))),
    }
}

fn run_once(kernel: Kernel, inputs: &Inputs, backend: Option<&dyn Backend>) -> Result<StreamArray, KernelError> {
    match (inputs, backend) {
        (Inputs::Gemm { a, b, dims }, None) => gemm_fast_native(a, b, *dims),
        (Inputs::Gemm { a, b, dims }, Some(be)) => match kernel {
            Kernel::Mod2amVec4 => mod2am_vec4(a, b, *dims, be),
            Kernel::Mod2amBlocked => mod2am_blocked(a, b, *dims, be, DEFAULT_BLOCK),
            _ => mod2am_simple(a, b, *dims, be),
        },
        (Inputs::Sparse { csr: AnyCsr::F32(c), invec }, None) => spmv_native(c, invec),
        (Inputs::Sparse { csr: AnyCsr::F64(c), invec }, None) => spmv_native(c, invec),
        (Inputs::Sparse { csr: AnyCsr::F32(c), invec }, Some(be)) => mod2as(c, invec, be),
        (Inputs::Sparse { csr: AnyCsr::F64(c), invec }, Some(be)) => mod2as(c, invec, be),
        (Inputs::Fft { x }, None) => Ok(streamforge_core::oracles::fft_native(x, Direction::Forward)?.into_array()),
        (Inputs::Fft { x }, Some(be)) => Ok(mod2f(x, Direction::Forward, be)?.into_array()),
    }
}

fn corrupt(out: &mut StreamArray) {
    match out.kind() {
        ScalarKind::F32 => out.as_mut_slice::<f32>().expect("f32")[0] += 1.0,
        ScalarKind::F64 => out.as_mut_slice::<f64>().expect("f64")[0] += 1.0,
        ScalarKind::I32 => out.as_mut_slice::<i32>().expect("i32")[0] += 1,
    }
}

/// `(error, tolerance)` of a result against the kernel's oracle.
fn check(inputs: &Inputs, out: &StreamArray, kind: ScalarKind) -> Result<(f64, f64), BenchError> {
    Ok(match inputs {
        Inputs::Gemm { a, b, dims } => (gemm_error(out, a, b, *dims)?, gemm_tolerance(kind, dims.l)),
        Inputs::Sparse { csr, invec } => {
            let err = match csr {
                AnyCsr::F32(c) => spmv_error(out, c, invec)?,
                AnyCsr::F64(c) => spmv_error(out, c, invec)?,
            };
            (err, gemm_tolerance(kind, csr.ncols()))
        }
        Inputs::Fft { x } => {
            let got = ComplexSignal::from_array(out.clone())?.to_pairs_f64();
            (rel_l2(&got, &fft_reference(x, Direction::Forward)?), fft_tolerance(kind))
        }
    })
}

fn bytes(inputs: &Inputs, elem: usize) -> usize {
    match inputs {
        Inputs::Gemm { dims, .. } => (dims.m * dims.l + dims.l * dims.n + dims.m * dims.n) * elem,
        Inputs::Sparse { csr, .. } => {
            csr.nelmts() * (elem + 4) + (csr.nrows() + 1) * 4 + csr.ncols() * elem + csr.nrows() * elem
        }
        Inputs::Fft { x } => 2 * 2 * x.len() * elem,
    }
}

fn median(sorted: &[Duration]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2].as_secs_f64()
    } else {
        (sorted[k / 2 - 1].as_secs_f64() + sorted[k / 2].as_secs_f64()) / 2.0
    }
}

/// Checks the kernel against its oracle once, then times `reps` full
/// invocations. No record is produced if the check fails or a timed run
/// returns a different result.
pub fn measure(m: &Measurement) -> Result<BenchRecord, BenchError> {
    if m.reps < 3 {
        return Err(usage(format!("--reps must be at least 3, got {}", m.reps)));
    }
    let inputs = prepare(m)?;
    let owned: Option<Box<dyn Backend>> = match m.backend {
        BackendKind::Interp => Some(Box::new(Interpreter)),
        BackendKind::Parallel => Some(Box::new(ParallelBackend::new(m.workers))),
        BackendKind::Native => None,
    };
    let backend = owned.as_deref();
    let fail = |mut out: StreamArray| {
        if m.inject_fault {
            corrupt(&mut out);
        }
        out
    };

    let out = fail(run_once(m.kernel, &inputs, backend)?);
    let kind = m.precision.kind();
    let (error, tolerance) = check(&inputs, &out, kind)?;
    if !(error <= tolerance) {
        return Err(BenchError::OracleMismatch { kernel: m.kernel.id().into(), backend: m.backend.id().into(), error, tolerance });
    }
    let verified = checksum(&out);
    drop(out);

    let mut times = Vec::with_capacity(m.reps);
    for _ in 0..m.reps {
        let t = Instant::now();
        let out = run_once(m.kernel, &inputs, backend)?;
        times.push(t.elapsed());
        if checksum(&fail(out)).to_bits() != verified.to_bits() {
            return Err(BenchError::Nondeterministic { kernel: m.kernel.id().into(), backend: m.backend.id().into() });
        }
    }
    times.sort();

    let (kernel, variant) = m.kernel.columns();
    let work = match &inputs {
        Inputs::Sparse { csr, .. } => csr.nelmts(),
        _ => 0,
    };
    let flops = flop_count(kernel, &m.sizes, work)?;
    let median_s = median(&times);
    let (mut rec_m, mut rec_n, mut rec_l, mut nnz, mut fft_n) = (None, None, None, None, None);
    match m.sizes {
        Sizes::Gemm { m, n, l } => (rec_m, rec_n, rec_l) = (Some(m), Some(n), Some(l)),
        Sizes::Sparse { nrows, ncols, .. } => (rec_m, rec_n, nnz) = (Some(nrows), Some(ncols), Some(work)),
        Sizes::Fft { n } => fft_n = Some(n),
    }
    Ok(BenchRecord {
        kernel,
        variant,
        backend: m.backend.id(),
        precision: m.precision.id(),
        m: rec_m,
        n: rec_n,
        l: rec_l,
        nnz,
        fft_n,
        reps: m.reps,
        min_s: times[0].as_secs_f64(),
        median_s,
        gflops: flops / median_s / 1e9,
        bytes: bytes(&inputs, kind.size_bytes()),
        checksum: verified,
    })
}
