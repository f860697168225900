//! Radix-2 decimation-in-time FFT: a bit-reversal pass, then one butterfly
//! program per stage writing fresh buffers.
//!
//! A stage runs over `grid(n/2)`, one butterfly per element, and has two
//! outputs: the `u + w*v` results land in the first half of the next buffer
//! and the `u - w*v` results in the second. Programs cannot scatter, so the
//! logical position of each value moves between stages; [`FftPlan`] tracks it
//! on the host and hands each stage a table of physical read positions. After
//! the last stage physical and logical order coincide.

use std::f64::consts::PI;

use super::KernelError;
use crate::array::{grid, Shape, StreamArray};
use crate::backend::Backend;
use crate::ir::{Bindings, Expr, Program, Stmt, Stream, VarId};
use crate::value::{Real, ScalarKind, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `X[k] = sum_j x[j] exp(-2 pi i j k / n)`
    Forward,
    /// Conjugate twiddles, then scale by `1/n`.
    Inverse,
}

/// Power-of-two complex sequence stored as width-2 `(re, im)` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    data: StreamArray,
}

impl ComplexSignal {
    /// From interleaved `re, im` pairs.
    pub fn from_interleaved<T: Real>(data: Vec<T>) -> Result<Self, KernelError> {
        let n = data.len() / 2;
        if data.len() % 2 != 0 || !n.is_power_of_two() {
            return Err(KernelError::NotPowerOfTwo(n));
        }
        Ok(ComplexSignal { data: StreamArray::from_vec(Shape::d1(n)?, 2, data)? })
    }

    pub fn from_pairs<T: Real>(pairs: &[[T; 2]]) -> Result<Self, KernelError> {
        ComplexSignal::from_interleaved(pairs.iter().flatten().copied().collect())
    }

    pub fn from_array(data: StreamArray) -> Result<Self, KernelError> {
        let n = data.len();
        if data.width() != 2 || data.shape().rank() != 1 || !data.kind().is_float() {
            return Err(KernelError::ShapeMismatch("signal must be a 1-D width-2 float array".into()));
        }
        if !n.is_power_of_two() {
            return Err(KernelError::NotPowerOfTwo(n));
        }
        Ok(ComplexSignal { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kind(&self) -> ScalarKind {
        self.data.kind()
    }

    pub fn as_array(&self) -> &StreamArray {
        &self.data
    }

    pub fn into_array(self) -> StreamArray {
        self.data
    }

    /// Samples widened to `f64` pairs.
    pub fn to_pairs_f64(&self) -> Vec<[f64; 2]> {
        let s = self.data.storage();
        (0..self.len()).map(|k| [s.get_f64(2 * k), s.get_f64(2 * k + 1)]).collect()
    }
}

/// Host-side tables for an `n`-point transform.
#[derive(Debug, Clone, PartialEq)]
pub struct FftPlan {
    n: usize,
    stages: usize,
    perm: Vec<i32>,
    twiddles: Vec<[f64; 2]>,
    /// Per stage, per butterfly: physical positions of `u` and `v`, twiddle index.
    reads: Vec<Vec<i32>>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self, KernelError> {
        if !n.is_power_of_two() || n > i32::MAX as usize {
            return Err(KernelError::NotPowerOfTwo(n));
        }
        let stages = n.trailing_zeros() as usize;
        let perm = (0..n).map(|i| bit_reverse(i, stages) as i32).collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / n as f64;
                [theta.cos(), theta.sin()]
            })
            .collect();

        let half_n = n / 2;
        let mut position: Vec<usize> = (0..n).collect();
        let mut reads = Vec::with_capacity(stages);
        for s in 0..stages {
            let half = 1usize << s;
            let mut table = Vec::with_capacity(3 * half_n);
            let mut next = vec![0usize; n];
            for t in 0..half_n {
                let (group, pos) = (t >> s, t & (half - 1));
                let i0 = (group << (s + 1)) + pos;
                let i1 = i0 + half;
                table.extend([position[i0] as i32, position[i1] as i32, (pos << (stages - s - 1)) as i32]);
                next[i0] = t;
                next[i1] = t + half_n;
            }
            position = next;
            reads.push(table);
        }
        debug_assert!(position.iter().enumerate().all(|(i, &p)| i == p));
        Ok(FftPlan { n, stages, perm, twiddles, reads })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Bit-reversal permutation.
    pub fn permutation(&self) -> &[i32] {
        &self.perm
    }

    /// `W_n^k = exp(-2 pi i k / n)` for `k < n/2`.
    pub fn twiddles(&self) -> &[[f64; 2]] {
        &self.twiddles
    }

    pub fn stage_reads(&self, stage: usize) -> &[i32] {
        &self.reads[stage]
    }
}

fn bit_reverse(i: usize, bits: usize) -> usize {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS as usize - bits)
    }
}

fn permute_program(kind: ScalarKind) -> Result<Program, KernelError> {
    Ok(Program::builder("bitrev")
        .input(ScalarKind::I32, 1)
        .output(kind, 2)
        .capture("x", kind, 2, 1)
        .capture("perm", ScalarKind::I32, 1, 1)
        .result(Expr::gather("x", Expr::gather("perm", Expr::input(0))))
        .build()?)
}

/// One radix-2 butterfly per element: `(u, v) -> (u + w*v, u - w*v)`.
fn butterfly_program(kind: ScalarKind) -> Result<Program, KernelError> {
    let (reads, u, v, w, t) = (VarId(0), VarId(1), VarId(2), VarId(3), VarId(4));
    let part = |var: VarId, c: usize| Expr::var(var).component(c);
    let re = part(w, 0) * part(v, 0) - part(w, 1) * part(v, 1);
    let im = part(w, 0) * part(v, 1) + part(w, 1) * part(v, 0);
    Ok(Program::builder("butterfly")
        .input(ScalarKind::I32, 1)
        .output(kind, 2)
        .output(kind, 2)
        .capture("x", kind, 2, 1)
        .capture("reads", ScalarKind::I32, 3, 1)
        .capture("tw", kind, 2, 1)
        .stmt(Stmt::Let(reads, Expr::gather("reads", Expr::input(0))))
        .stmt(Stmt::Let(u, Expr::gather("x", part(reads, 0))))
        .stmt(Stmt::Let(v, Expr::gather("x", part(reads, 1))))
        .stmt(Stmt::Let(w, Expr::gather("tw", part(reads, 2))))
        .stmt(Stmt::Let(t, Expr::pack(vec![re, im])))
        .result(Expr::var(u) + Expr::var(t))
        .result(Expr::var(u) - Expr::var(t))
        .build()?)
}

fn scale_program(kind: ScalarKind, factor: f64) -> Result<Program, KernelError> {
    Ok(Program::builder("scale")
        .input(kind, 2)
        .output(kind, 2)
        .result(Expr::input(0) * Expr::constant(Value::scalar(kind, factor)))
        .build()?)
}

/// Radix-2 FFT of a power-of-two signal.
pub fn mod2f(x: &ComplexSignal, direction: Direction, backend: &dyn Backend) -> Result<ComplexSignal, KernelError> {
    match x.kind() {
        ScalarKind::F32 => fft::<f32>(x, direction, backend),
        ScalarKind::F64 => fft::<f64>(x, direction, backend),
        k => Err(KernelError::UnsupportedKind(k)),
    }
}

fn fft<T: Real>(x: &ComplexSignal, direction: Direction, backend: &dyn Backend) -> Result<ComplexSignal, KernelError> {
    let n = x.len();
    let plan = FftPlan::new(n)?;
    let kind = T::KIND;

    let perm = StreamArray::vector(plan.perm.clone())?;
    let permuted = backend
        .run(&permute_program(kind)?, &[Stream::Grid(grid(&[n])?)], &Bindings::new().bind("x", x.as_array()).bind("perm", &perm))?
        .into_single();

    let mut current = permuted;
    if plan.stages > 0 {
        let sign = match direction {
            Direction::Forward => 1.0,
            Direction::Inverse => -1.0,
        };
        let tw: Vec<T> = plan.twiddles.iter().flat_map(|[re, im]| [T::from_f64(*re), T::from_f64(sign * im)]).collect();
        let tw = StreamArray::from_vec(Shape::d1(n / 2)?, 2, tw)?;
        let program = butterfly_program(kind)?;
        let half = grid(&[n / 2])?;
        for s in 0..plan.stages {
            let reads = StreamArray::from_vec(Shape::d1(n / 2)?, 3, plan.reads[s].clone())?;
            let captures = Bindings::new().bind("x", &current).bind("reads", &reads).bind("tw", &tw);
            let mut out = backend.run(&program, &[Stream::Grid(half)], &captures)?.outputs.into_iter();
            let (lo, hi) = (out.next().expect("two outputs"), out.next().expect("two outputs"));
            let mut joined = lo.try_slice::<T>()?.to_vec();
            joined.extend_from_slice(hi.try_slice::<T>()?);
            current = StreamArray::from_vec(Shape::d1(n)?, 2, joined)?;
        }
    }
    if direction == Direction::Inverse {
        let p = scale_program(kind, 1.0 / n as f64)?;
        current = backend.run(&p, &[Stream::Array(&current)], &Bindings::new())?.into_single();
    }
    ComplexSignal::from_array(current)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::backend::{Interpreter, ParallelBackend};
    use crate::oracles::{fft_error, fft_tolerance, rel_l2};

    fn random<T: Real>(seed: u64, n: usize) -> ComplexSignal {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexSignal::from_interleaved((0..2 * n).map(|_| T::from_f64(rng.gen_range(-1.0..1.0))).collect::<Vec<T>>()).unwrap()
    }

    fn pairs(p: &[[f64; 2]]) -> ComplexSignal {
        ComplexSignal::from_pairs(p).unwrap()
    }

    fn fwd(x: &ComplexSignal) -> Vec<[f64; 2]> {
        mod2f(x, Direction::Forward, &Interpreter).unwrap().to_pairs_f64()
    }

    #[test]
    fn length_one_is_identity() {
        assert_eq!(fwd(&pairs(&[[2.5, -1.0]])), vec![[2.5, -1.0]]);
        let inv = mod2f(&pairs(&[[2.5, -1.0]]), Direction::Inverse, &Interpreter).unwrap();
        assert_eq!(inv.to_pairs_f64(), vec![[2.5, -1.0]]);
    }

    #[test]
    fn impulse_and_constant() {
        assert_eq!(fwd(&pairs(&[[1., 0.], [0., 0.], [0., 0.], [0., 0.]])), vec![[1., 0.]; 4]);
        assert_eq!(fwd(&pairs(&[[1., 0.]; 4])), vec![[4., 0.], [0., 0.], [0., 0.], [0., 0.]]);
    }

    #[test]
    fn first_harmonic() {
        let y = fwd(&pairs(&[[1., 0.], [0., 1.], [-1., 0.], [0., -1.]]));
        assert!(rel_l2(&y, &[[0., 0.], [4., 0.], [0., 0.], [0., 0.]]) < 1e-15, "{y:?}");
    }

    #[test]
    fn random_1024_f32_matches_dft() {
        let x = random::<f32>(1, 1024);
        let y = mod2f(&x, Direction::Forward, &ParallelBackend::new(2)).unwrap();
        assert_eq!(y.kind(), ScalarKind::F32);
        assert!(fft_error(&y, &x, Direction::Forward) <= fft_tolerance(ScalarKind::F32));
    }

    #[test]
    fn inverse_f64_matches_dft() {
        for n in [2, 8, 128] {
            let x = random::<f64>(n as u64, n);
            let y = mod2f(&x, Direction::Inverse, &Interpreter).unwrap();
            assert!(fft_error(&y, &x, Direction::Inverse) <= fft_tolerance(ScalarKind::F64), "n = {n}");
        }
    }

    #[test]
    fn round_trip() {
        let x = random::<f32>(9, 4096);
        let back = mod2f(&mod2f(&x, Direction::Forward, &Interpreter).unwrap(), Direction::Inverse, &Interpreter).unwrap();
        assert!(rel_l2(&back.to_pairs_f64(), &x.to_pairs_f64()) <= 1e-5);
    }

    #[test]
    fn plan_tables() {
        let plan = FftPlan::new(16).unwrap();
        assert_eq!(plan.stages(), 4);
        let p = plan.permutation();
        assert!((0..16).all(|i| p[p[i] as usize] == i as i32));
        assert_eq!(&p[..4], &[0, 8, 4, 12]);
        assert!(plan.twiddles().iter().all(|w| (w[0].hypot(w[1]) - 1.0).abs() < 1e-6));
        assert_eq!(plan.twiddles().len(), 8);
        assert_eq!(plan.stage_reads(0).len(), 3 * 8);
        assert!(FftPlan::new(12).is_err());
        assert_eq!(FftPlan::new(1).unwrap().stages(), 0);
    }

    #[test]
    fn rejects_bad_signals() {
        assert!(matches!(ComplexSignal::from_interleaved(vec![0.0f32; 6]), Err(KernelError::NotPowerOfTwo(3))));
        assert!(ComplexSignal::from_interleaved(vec![0.0f32; 3]).is_err());
        assert!(ComplexSignal::from_interleaved(Vec::<f64>::new()).is_err());
        let ints = StreamArray::from_vec(Shape::d1(2).unwrap(), 2, vec![0i32; 4]).unwrap();
        assert!(ComplexSignal::from_array(ints).is_err());
    }
}
