use crate::measure::{measure, BenchRecord, Measurement};
use crate::{BackendKind, BenchError, Kernel, Precision};

pub const DEFAULT_REPS: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kernels: Vec<Kernel>,
    /// `None` selects [`default_sizes`] per kernel.
    pub sizes: Option<Vec<usize>>,
    pub precision: Precision,
    pub backends: Vec<BackendKind>,
    pub reps: usize,
    pub density: f64,
    pub workers: usize,
    pub seed: u64,
    pub inject_fault: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kernels: Kernel::ALL.to_vec(),
            sizes: None,
            precision: Precision::F64,
            backends: BackendKind::ALL.to_vec(),
            reps: DEFAULT_REPS,
            density: 0.01,
            workers: streamforge_core::backend::default_workers(),
            seed: DEFAULT_SEED,
            inject_fault: false,
        }
    }
}

fn powers_of_two(lo: u32, hi: u32) -> impl Iterator<Item = usize> {
    (lo..=hi).map(|e| 1usize << e)
}

/// Powers of two 8..1024 for GEMM; the same plus 100, 500 and 1000 rows for
/// SpMV; powers of two 8..65536 for the FFT.
pub fn default_sizes(kernel: Kernel) -> Vec<usize> {
    match kernel {
        Kernel::Mod2amSimple | Kernel::Mod2amVec4 | Kernel::Mod2amBlocked => powers_of_two(3, 10).collect(),
        Kernel::Mod2as => {
            let mut s: Vec<usize> = powers_of_two(3, 10).chain([100, 500, 1000]).collect();
            s.sort_unstable();
            s
        }
        Kernel::Mod2f => powers_of_two(3, 16).collect(),
    }
}

/// Records that were emitted and the cells that failed.
#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<(String, BenchError)>,
}

impl SweepOutcome {
    /// 0 if every cell succeeded, else 3 if any oracle check failed, else 4.
    pub fn exit_code(&self) -> i32 {
        self.failures.iter().map(|(_, e)| e.exit_code()).max_by_key(|&c| (c == 3, c)).unwrap_or(0)
    }
}

impl SweepConfig {
    /// Rejects configurations that cannot produce any record.
    pub fn validate(&self) -> Result<(), BenchError> {
        validate(self)
    }
}

fn validate(config: &SweepConfig) -> Result<(), BenchError> {
    let bad = |msg: String| Err(BenchError::Usage(msg));
    if config.kernels.is_empty() || config.backends.is_empty() {
        return bad("at least one kernel and one backend are required".into());
    }
    if config.sizes.as_ref().is_some_and(Vec::is_empty) {
        return bad("size list is empty".into());
    }
    if config.reps < 3 {
        return bad(format!("--reps must be at least 3, got {}", config.reps));
    }
    if !(config.density > 0.0 && config.density <= 1.0) {
        return bad(format!("--density must be in (0, 1], got {}", config.density));
    }
    if config.workers == 0 {
        return bad("--workers must be positive".into());
    }
    for &k in &config.kernels {
        for s in config.sizes.clone().unwrap_or_else(|| default_sizes(k)) {
            match k {
                _ if s == 0 => return bad("sizes must be positive".into()),
                Kernel::Mod2amVec4 if s % 4 != 0 => return bad(format!("mod2am-vec4 needs sizes divisible by 4, got {s}")),
                Kernel::Mod2f if !s.is_power_of_two() => return bad(format!("mod2f needs power-of-two sizes, got {s}")),
                _ => {}
            }
        }
    }
    Ok(())
}

/// Measures every (kernel, backend, size) cell in order, handing each record
/// to `emit` as soon as it exists. A failing cell is recorded and the sweep
/// continues; only invalid configurations and `emit` errors abort.
pub fn run_sweep(
    config: &SweepConfig,
    mut emit: impl FnMut(&BenchRecord) -> Result<(), BenchError>,
) -> Result<SweepOutcome, BenchError> {
    validate(config)?;
    let mut outcome = SweepOutcome::default();
    for &kernel in &config.kernels {
        let sizes = config.sizes.clone().unwrap_or_else(|| default_sizes(kernel));
        for &backend in &config.backends {
            for &s in &sizes {
                let cell = Measurement {
                    kernel,
                    backend,
                    precision: config.precision,
                    sizes: kernel.sizes(s, config.density),
                    reps: config.reps,
                    seed: config.seed,
                    workers: config.workers,
                    inject_fault: config.inject_fault,
                };
                match measure(&cell) {
                    Ok(r) => {
                        emit(&r)?;
                        outcome.records.push(r);
                    }
                    Err(e) => outcome.failures.push((format!("{kernel} {backend} size {s}"), e)),
                }
            }
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kernels: Vec<Kernel>, sizes: Vec<usize>) -> SweepConfig {
        SweepConfig { kernels, sizes: Some(sizes), reps: 3, workers: 2, ..SweepConfig::default() }
    }

    #[test]
    fn cross_product_rows() {
        let mut c = small(vec![Kernel::Mod2amSimple], vec![8, 16]);
        c.backends = vec![BackendKind::Interp, BackendKind::Parallel];
        let mut seen = 0;
        let out = run_sweep(&c, |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!((out.records.len(), seen, out.exit_code()), (4, 4, 0));
        let order: Vec<_> = out.records.iter().map(|r| (r.backend, r.m.unwrap())).collect();
        assert_eq!(order, [("interp", 8), ("interp", 16), ("parallel", 8), ("parallel", 16)]);
    }

    #[test]
    fn default_size_lists() {
        assert_eq!(default_sizes(Kernel::Mod2amSimple), [8, 16, 32, 64, 128, 256, 512, 1024]);
        assert_eq!(default_sizes(Kernel::Mod2as), [8, 16, 32, 64, 100, 128, 256, 500, 512, 1000, 1024]);
        assert_eq!(default_sizes(Kernel::Mod2f).len(), 14);
    }

    #[test]
    fn usage_errors() {
        let ok = |c: &SweepConfig| run_sweep(c, |_| Ok(()));
        assert!(matches!(ok(&small(vec![Kernel::Mod2f], vec![])), Err(BenchError::Usage(_))));
        assert!(matches!(ok(&small(vec![Kernel::Mod2f], vec![12])), Err(BenchError::Usage(_))));
        assert!(matches!(ok(&small(vec![Kernel::Mod2amVec4], vec![6])), Err(BenchError::Usage(_))));
        assert!(matches!(ok(&SweepConfig { reps: 1, ..small(vec![Kernel::Mod2f], vec![8]) }), Err(BenchError::Usage(_))));
        assert!(matches!(ok(&SweepConfig { density: 0.0, ..small(vec![Kernel::Mod2as], vec![8]) }), Err(BenchError::Usage(_))));
    }

    #[test]
    fn failures_do_not_stop_the_sweep() {
        let mut c = small(vec![Kernel::Mod2as, Kernel::Mod2f], vec![16]);
        c.backends = vec![BackendKind::Interp];
        c.inject_fault = true;
        let out = run_sweep(&c, |_| Ok(())).unwrap();
        assert_eq!((out.records.len(), out.failures.len(), out.exit_code()), (0, 2, 3));
    }

    #[test]
    fn exit_code_priority() {
        let mut o = SweepOutcome::default();
        o.failures.push(("a".into(), BenchError::Nondeterministic { kernel: "k".into(), backend: "b".into() }));
        assert_eq!(o.exit_code(), 4);
        o.failures.push(("b".into(), BenchError::OracleMismatch { kernel: "k".into(), backend: "b".into(), error: 1.0, tolerance: 0.0 }));
        assert_eq!(o.exit_code(), 3);
    }
}
