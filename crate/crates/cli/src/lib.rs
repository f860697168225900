//! Input generation, whole-kernel timing and CSV reporting for the
//! streamforge kernels.

mod generate;
mod measure;
mod output;
mod sweep;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use streamforge_core::kernels::KernelError;
use streamforge_core::ScalarKind;

pub use generate::{generate_dense, generate_signal, generate_sparse, generate_vector, AnyCsr};
pub use measure::{checksum, measure, BenchRecord, Measurement};
pub use output::{write_csv, write_table, CsvSink, CSV_COLUMNS};
pub use sweep::{default_sizes, run_sweep, SweepConfig, SweepOutcome, DEFAULT_REPS, DEFAULT_SEED};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{kernel} on {backend}: result differs from the reference (error {error:e}, tolerance {tolerance:e})")]
    OracleMismatch { kernel: String, backend: String, error: f64, tolerance: f64 },
    #[error("{kernel} on {backend}: repeated runs disagree")]
    Nondeterministic { kernel: String, backend: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// Process exit code: 2 usage, 3 oracle mismatch, 4 backend or output failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            BenchError::OracleMismatch { .. } => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    Mod2amSimple,
    Mod2amVec4,
    Mod2amBlocked,
    Mod2as,
    Mod2f,
}

impl Kernel {
    pub const ALL: [Kernel; 5] = [Kernel::Mod2amSimple, Kernel::Mod2amVec4, Kernel::Mod2amBlocked, Kernel::Mod2as, Kernel::Mod2f];

    pub fn id(self) -> &'static str {
        match self {
            Kernel::Mod2amSimple => "mod2am-simple",
            Kernel::Mod2amVec4 => "mod2am-vec4",
            Kernel::Mod2amBlocked => "mod2am-blocked",
            Kernel::Mod2as => "mod2as",
            Kernel::Mod2f => "mod2f",
        }
    }

    /// `(kernel, variant)` columns of a record.
    pub fn columns(self) -> (&'static str, &'static str) {
        match self {
            Kernel::Mod2amSimple => ("mod2am", "simple"),
            Kernel::Mod2amVec4 => ("mod2am", "vec4"),
            Kernel::Mod2amBlocked => ("mod2am", "blocked"),
            Kernel::Mod2as => ("mod2as", "csr"),
            Kernel::Mod2f => ("mod2f", "radix2"),
        }
    }

    /// Problem size for a sweep point `s`: `s^3` GEMM, `s x s` sparse, `s`-point FFT.
    pub fn sizes(self, s: usize, density: f64) -> Sizes {
        match self {
            Kernel::Mod2amSimple | Kernel::Mod2amVec4 | Kernel::Mod2amBlocked => Sizes::Gemm { m: s, n: s, l: s },
            Kernel::Mod2as => Sizes::Sparse { nrows: s, ncols: s, density },
            Kernel::Mod2f => Sizes::Fft { n: s },
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Kernel {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown kernel `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Interp,
    Parallel,
    /// Native baselines from the oracles module.
    Native,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [BackendKind::Interp, BackendKind::Parallel, BackendKind::Native];

    pub fn id(self) -> &'static str {
        match self {
            BackendKind::Interp => "interp",
            BackendKind::Parallel => "parallel",
            BackendKind::Native => "native",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BackendKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BackendKind::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown backend `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn kind(self) -> ScalarKind {
        match self {
            Precision::F32 => ScalarKind::F32,
            Precision::F64 => ScalarKind::F64,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl FromStr for Precision {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(BenchError::Usage(format!("unknown precision `{s}`"))),
        }
    }
}

/// Problem dimensions of one measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sizes {
    Gemm { m: usize, n: usize, l: usize },
    Sparse { nrows: usize, ncols: usize, density: f64 },
    Fft { n: usize },
}

/// Stored entries per row of a generated sparse matrix.
pub fn nnz_per_row(ncols: usize, density: f64) -> usize {
    ((density * ncols as f64).round() as usize).min(ncols)
}

/// Conventional flop counts: `2mnl` GEMM, `2 nnz` SpMV, `5 n log2 n` FFT.
/// `work` is `nnz` for SpMV and ignored otherwise.
pub fn flop_count(kernel: &str, sizes: &Sizes, work: usize) -> Result<f64, BenchError> {
    let kernel = match kernel {
        "mod2am" => Kernel::Mod2amSimple,
        "mod2as" => Kernel::Mod2as,
        "mod2f" => Kernel::Mod2f,
        other => other.parse()?,
    };
    match (kernel, *sizes) {
        (Kernel::Mod2amSimple | Kernel::Mod2amVec4 | Kernel::Mod2amBlocked, Sizes::Gemm { m, n, l }) => {
            Ok(2.0 * m as f64 * n as f64 * l as f64)
        }
        (Kernel::Mod2as, Sizes::Sparse { .. }) => Ok(2.0 * work as f64),
        (Kernel::Mod2f, Sizes::Fft { n }) => Ok(5.0 * n as f64 * (n as f64).log2()),
        (k, s) => Err(BenchError::Usage(format!("sizes {s:?} do not fit kernel {k}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flop_examples() {
        assert_eq!(flop_count("mod2am-simple", &Sizes::Gemm { m: 2, n: 2, l: 2 }, 0).unwrap(), 16.0);
        let sp = Sizes::Sparse { nrows: 3, ncols: 3, density: 0.5 };
        assert_eq!(flop_count("mod2as", &sp, 4).unwrap(), 8.0);
        assert_eq!(flop_count("mod2f", &Sizes::Fft { n: 8 }, 0).unwrap(), 120.0);
        assert_eq!(flop_count("mod2f", &Sizes::Fft { n: 1 }, 0).unwrap(), 0.0);
        assert!(matches!(flop_count("mod3", &Sizes::Fft { n: 8 }, 0), Err(BenchError::Usage(_))));
        assert!(flop_count("mod2f", &sp, 0).is_err());
    }

    #[test]
    fn ids_round_trip() {
        for k in Kernel::ALL {
            assert_eq!(k.id().parse::<Kernel>().unwrap(), k);
        }
        for b in BackendKind::ALL {
            assert_eq!(b.id().parse::<BackendKind>().unwrap(), b);
        }
        assert_eq!("f32".parse::<Precision>().unwrap().kind(), ScalarKind::F32);
        assert!("f16".parse::<Precision>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(BenchError::Usage(String::new()).exit_code(), 2);
        let mismatch = BenchError::OracleMismatch { kernel: "k".into(), backend: "b".into(), error: 1.0, tolerance: 0.0 };
        assert_eq!(mismatch.exit_code(), 3);
        assert_eq!(BenchError::Kernel(KernelError::NotPowerOfTwo(3)).exit_code(), 4);
    }

    #[test]
    fn per_row_counts() {
        assert_eq!(nnz_per_row(100, 0.01), 1);
        assert_eq!(nnz_per_row(1024, 0.01), 10);
        assert_eq!(nnz_per_row(4, 1.0), 4);
        assert_eq!(nnz_per_row(10, 0.001), 0);
    }
}
