use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use streamforge_cli::{
    run_sweep, write_table, BackendKind, BenchError, CsvSink, Kernel, Precision, SweepConfig, DEFAULT_REPS, DEFAULT_SEED,
};
use streamforge_core::backend::{default_workers, WORKERS_ENV};

/// Times the stream kernels and writes one CSV row per
/// (kernel, backend, size).
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Args {
    /// Kernels to run, comma separated [default: all]
    #[arg(long, value_delimiter = ',', value_parser = parse::<Kernel>)]
    kernel: Vec<Kernel>,

    /// Backends to run, comma separated [default: interp,parallel,native]
    #[arg(long, value_delimiter = ',', value_parser = parse::<BackendKind>)]
    backend: Vec<BackendKind>,

    /// Sizes: GEMM edge, sparse rows and columns, or FFT length [default: per-kernel sweep]
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    #[arg(long, default_value = "f64", value_parser = parse::<Precision>)]
    precision: Precision,

    /// Timed repetitions per cell (at least 3)
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,

    /// Fraction of stored entries per sparse row, in (0, 1]
    #[arg(long, default_value_t = 0.01)]
    density: f64,

    /// Parallel backend workers [default: available cores]
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Write results here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// CSV output (default)
    #[arg(long, conflicts_with = "table")]
    csv: bool,

    /// Aligned text table instead of CSV
    #[arg(long)]
    table: bool,

    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn parse<T: std::str::FromStr<Err = BenchError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: BenchError| match e {
        BenchError::Usage(msg) => msg,
        other => other.to_string(),
    })
}

fn or_all<T: Clone>(chosen: &[T], all: &[T]) -> Vec<T> {
    if chosen.is_empty() { all.to_vec() } else { chosen.to_vec() }
}

fn config(args: &Args) -> SweepConfig {
    SweepConfig {
        kernels: or_all(&args.kernel, &Kernel::ALL),
        sizes: args.sizes.clone(),
        precision: args.precision,
        backends: or_all(&args.backend, &BackendKind::ALL),
        reps: args.reps,
        density: args.density,
        workers: args.workers.unwrap_or_else(default_workers),
        seed: args.seed,
        inject_fault: args.inject_fault,
    }
}

fn open(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = config(&args);
    if let Err(e) = cfg.validate() {
        eprintln!("bench: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let sink = match open(&args.out) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("bench: {e:#}");
            return ExitCode::from(2);
        }
    };

    let result = if args.table {
        run_sweep(&cfg, |_| Ok(())).and_then(|o| write_table(sink, &o.records).map(|()| o))
    } else {
        CsvSink::new(sink).and_then(|mut csv| run_sweep(&cfg, |r| csv.push(r)))
    };
    let code = match result {
        Ok(outcome) => {
            for (cell, e) in &outcome.failures {
                eprintln!("bench: {cell}: {e}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("bench: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
