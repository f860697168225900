//! Plain native reference implementations and the error measures used to
//! compare kernels against them. Reference results accumulate in `f64`
//! whatever the input precision.

use std::f64::consts::PI;

use crate::array::{Shape, StreamArray};
use crate::kernels::{check_operands, ComplexSignal, CsrMatrix, Direction, GemmDims, KernelError};
use crate::value::{Real, ScalarKind};

fn widened(a: &StreamArray) -> Vec<f64> {
    let s = a.storage();
    (0..s.len()).map(|i| s.get_f64(i)).collect()
}

/// Schoolbook triple loop, ascending `i, j, k`. Row-major `m x n` result.
pub fn gemm_oracle(a: &StreamArray, b: &StreamArray, dims: GemmDims) -> Result<Vec<f64>, KernelError> {
    check_operands(a, b, dims)?;
    let GemmDims { m, n, l } = dims;
    let a = widened(a);
    let b = widened(b);
    // column j of B stored contiguously
    let bt: Vec<f64> = (0..n * l).map(|e| b[(e % l) * n + e / l]).collect();
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let row = &a[i * l..(i + 1) * l];
        for j in 0..n {
            let col = &bt[j * l..(j + 1) * l];
            let mut acc = 0.0;
            for k in 0..l {
                acc += row[k] * col[k];
            }
            c[i * n + j] = acc;
        }
    }
    Ok(c)
}

const NB_J: usize = 256;
const NB_K: usize = 128;

/// Cache-blocked GEMM in the input precision: four rows of `C` are updated
/// per pass over a row of `B`.
pub fn gemm_fast_native(a: &StreamArray, b: &StreamArray, dims: GemmDims) -> Result<StreamArray, KernelError> {
    match check_operands(a, b, dims)? {
        ScalarKind::F32 => fast_typed::<f32>(a, b, dims),
        ScalarKind::F64 => fast_typed::<f64>(a, b, dims),
        k => Err(KernelError::UnsupportedKind(k)),
    }
}

fn fast_typed<T: Real>(a: &StreamArray, b: &StreamArray, dims: GemmDims) -> Result<StreamArray, KernelError> {
    let (a, b) = (a.try_slice::<T>()?, b.try_slice::<T>()?);
    let GemmDims { m, n, l } = dims;
    let mut c = vec![T::ZERO; m * n];
    for j0 in (0..n).step_by(NB_J) {
        let j1 = (j0 + NB_J).min(n);
        for k0 in (0..l).step_by(NB_K) {
            let k1 = (k0 + NB_K).min(l);
            let mut i = 0;
            while i + 4 <= m {
                let (c0, rest) = c[i * n..(i + 4) * n].split_at_mut(n);
                let (c1, rest) = rest.split_at_mut(n);
                let (c2, c3) = rest.split_at_mut(n);
                let (c0, c1, c2, c3) = (&mut c0[j0..j1], &mut c1[j0..j1], &mut c2[j0..j1], &mut c3[j0..j1]);
                for k in k0..k1 {
                    let (x0, x1, x2, x3) = (a[i * l + k], a[(i + 1) * l + k], a[(i + 2) * l + k], a[(i + 3) * l + k]);
                    let brow = &b[k * n + j0..k * n + j1];
                    for (t, &y) in brow.iter().enumerate() {
                        c0[t] += x0 * y;
                        c1[t] += x1 * y;
                        c2[t] += x2 * y;
                        c3[t] += x3 * y;
                    }
                }
                i += 4;
            }
            for i in i..m {
                let crow = &mut c[i * n + j0..i * n + j1];
                for k in k0..k1 {
                    let x = a[i * l + k];
                    for (cv, &y) in crow.iter_mut().zip(&b[k * n + j0..k * n + j1]) {
                        *cv += x * y;
                    }
                }
            }
        }
    }
    Ok(StreamArray::matrix(m, n, c)?)
}

fn check_invec<T: Real>(csr: &CsrMatrix<T>, invec: &StreamArray) -> Result<(), KernelError> {
    csr.validate()?;
    if invec.kind() != T::KIND || invec.width() != 1 || invec.len() != csr.ncols() {
        return Err(KernelError::ShapeMismatch(format!(
            "invec has {} {} values of width {}, expected {} {} values",
            invec.len(),
            invec.kind(),
            invec.width(),
            csr.ncols(),
            T::KIND
        )));
    }
    Ok(())
}

/// Nested-loop CSR product, ascending `j` within each row.
pub fn spmv_oracle<T: Real>(csr: &CsrMatrix<T>, invec: &StreamArray) -> Result<Vec<f64>, KernelError> {
    check_invec(csr, invec)?;
    let v = widened(invec);
    let (vals, indx, rowp) = (csr.matvals(), csr.indx(), csr.rowp());
    Ok((0..csr.nrows())
        .map(|i| {
            (rowp[i] as usize..rowp[i + 1] as usize).fold(0.0, |c, j| c + vals[j].to_f64() * v[indx[j] as usize])
        })
        .collect())
}

/// CSR product in the input precision.
pub fn spmv_native<T: Real>(csr: &CsrMatrix<T>, invec: &StreamArray) -> Result<StreamArray, KernelError> {
    check_invec(csr, invec)?;
    let v = invec.try_slice::<T>()?;
    let (vals, indx, rowp) = (csr.matvals(), csr.indx(), csr.rowp());
    let out = (0..csr.nrows())
        .map(|i| {
            let mut c = T::ZERO;
            for j in rowp[i] as usize..rowp[i + 1] as usize {
                c += vals[j] * v[indx[j] as usize];
            }
            c
        })
        .collect();
    Ok(StreamArray::vector(out)?)
}

fn sign(direction: Direction) -> f64 {
    match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    }
}

/// Direct `O(n^2)` transform of any length; the inverse includes `1/n`.
pub fn dft_oracle(x: &[[f64; 2]], direction: Direction) -> Vec<[f64; 2]> {
    let n = x.len();
    let s = sign(direction);
    let table: Vec<[f64; 2]> = (0..n)
        .map(|t| {
            let th = s * 2.0 * PI * t as f64 / n as f64;
            [th.cos(), th.sin()]
        })
        .collect();
    let scale = match direction {
        Direction::Forward => 1.0,
        Direction::Inverse => 1.0 / n as f64,
    };
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                let w = table[(j * k) % n];
                re += xj[0] * w[0] - xj[1] * w[1];
                im += xj[0] * w[1] + xj[1] * w[0];
            }
            [re * scale, im * scale]
        })
        .collect()
}

/// Iterative in-place radix-2 FFT in the input precision.
pub fn fft_native(x: &ComplexSignal, direction: Direction) -> Result<ComplexSignal, KernelError> {
    match x.kind() {
        ScalarKind::F32 => fft_typed::<f32>(x, direction),
        ScalarKind::F64 => fft_typed::<f64>(x, direction),
        k => Err(KernelError::UnsupportedKind(k)),
    }
}

fn fft_typed<T: Real>(x: &ComplexSignal, direction: Direction) -> Result<ComplexSignal, KernelError> {
    let n = x.len();
    let src = x.as_array().try_slice::<T>()?;
    let mut re: Vec<T> = src.iter().step_by(2).copied().collect();
    let mut im: Vec<T> = src.iter().skip(1).step_by(2).copied().collect();
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let r = i.reverse_bits() >> (usize::BITS - bits);
            if r > i {
                re.swap(i, r);
                im.swap(i, r);
            }
        }
    }
    let s = sign(direction);
    let tw: Vec<(T, T)> = (0..n / 2)
        .map(|k| {
            let th = s * 2.0 * PI * k as f64 / n as f64;
            (T::from_f64(th.cos()), T::from_f64(th.sin()))
        })
        .collect();
    let mut half = 1;
    while half < n {
        let step = n / (2 * half);
        for start in (0..n).step_by(2 * half) {
            for t in 0..half {
                let (wr, wi) = tw[t * step];
                let (u, v) = (start + t, start + t + half);
                let pr = wr * re[v] - wi * im[v];
                let pi = wr * im[v] + wi * re[v];
                let (ur, ui) = (re[u], im[u]);
                re[u] = ur + pr;
                im[u] = ui + pi;
                re[v] = ur - pr;
                im[v] = ui - pi;
            }
        }
        half *= 2;
    }
    if direction == Direction::Inverse {
        let inv = T::from_f64(1.0 / n as f64);
        re.iter_mut().chain(im.iter_mut()).for_each(|v| *v = *v * inv);
    }
    let data = re.iter().zip(&im).flat_map(|(&r, &i)| [r, i]).collect();
    ComplexSignal::from_interleaved(data)
}

/// Elementwise GEMM tolerance: `1e-5` for `f32`, `1e-12 * l` for `f64`.
pub fn gemm_tolerance(kind: ScalarKind, l: usize) -> f64 {
    match kind {
        ScalarKind::F32 => 1e-5,
        _ => 1e-12 * l as f64,
    }
}

/// Relative L2 tolerance for transforms.
pub fn fft_tolerance(kind: ScalarKind) -> f64 {
    match kind {
        ScalarKind::F32 => 1e-5,
        _ => 1e-10,
    }
}

/// Largest `|c - ref| / scale` over elements, where each scale is the sum
/// of the magnitudes of the products reduced into that element. Zero
/// scales require exact agreement.
pub fn scaled_error(c: &StreamArray, reference: &[f64], scale: &[f64]) -> f64 {
    let s = c.storage();
    assert_eq!(s.len(), reference.len(), "result and reference lengths differ");
    (0..s.len())
        .map(|i| {
            let d = (s.get_f64(i) - reference[i]).abs();
            match (d, scale[i]) {
                (d, _) if d == 0.0 => 0.0,
                (_, sc) if sc > 0.0 => d / sc,
                _ => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max)
}

/// `sum_k |a_ik| |b_kj|` per output element.
pub fn gemm_scale(a: &StreamArray, b: &StreamArray, dims: GemmDims) -> Result<Vec<f64>, KernelError> {
    check_operands(a, b, dims)?;
    let abs = |x: &StreamArray| widened(x).into_iter().map(f64::abs).collect::<Vec<_>>();
    let aa = StreamArray::from_vec(Shape::d2(dims.m, dims.l)?, 1, abs(a))?;
    let bb = StreamArray::from_vec(Shape::d2(dims.l, dims.n)?, 1, abs(b))?;
    gemm_oracle(&aa, &bb, dims)
}

/// Scaled elementwise error of `c` against the triple-loop product.
pub fn gemm_error(c: &StreamArray, a: &StreamArray, b: &StreamArray, dims: GemmDims) -> Result<f64, KernelError> {
    if c.len() != dims.m * dims.n || c.kind() != a.kind() {
        return Err(KernelError::ShapeMismatch(format!("C has {} {} values", c.len(), c.kind())));
    }
    Ok(scaled_error(c, &gemm_oracle(a, b, dims)?, &gemm_scale(a, b, dims)?))
}

/// Scaled elementwise error of `out` against the CSR reference.
pub fn spmv_error<T: Real>(out: &StreamArray, csr: &CsrMatrix<T>, invec: &StreamArray) -> Result<f64, KernelError> {
    if out.len() != csr.nrows() || out.kind() != T::KIND {
        return Err(KernelError::ShapeMismatch(format!("result has {} {} values", out.len(), out.kind())));
    }
    let reference = spmv_oracle(csr, invec)?;
    let abs_vals: Vec<f64> = csr.matvals().iter().map(|v| v.to_f64().abs()).collect();
    let abs_csr = CsrMatrix::new(csr.nrows(), csr.ncols(), abs_vals, csr.indx().to_vec(), csr.rowp().to_vec())?;
    let abs_in = StreamArray::vector(widened(invec).into_iter().map(f64::abs).collect())?;
    Ok(scaled_error(out, &reference, &spmv_oracle(&abs_csr, &abs_in)?))
}

/// `||x - ref||_2 / ||ref||_2`; exact agreement required when `ref` is zero.
pub fn rel_l2(x: &[[f64; 2]], reference: &[[f64; 2]]) -> f64 {
    assert_eq!(x.len(), reference.len(), "signal lengths differ");
    let sq = |p: [f64; 2]| p[0] * p[0] + p[1] * p[1];
    let num: f64 = x.iter().zip(reference).map(|(a, b)| sq([a[0] - b[0], a[1] - b[1]])).sum();
    let den: f64 = reference.iter().map(|&p| sq(p)).sum();
    match (num, den) {
        (n, _) if n == 0.0 => 0.0,
        (_, d) if d > 0.0 => (num / den).sqrt(),
        _ => f64::INFINITY,
    }
}

/// Largest length checked against the direct DFT; longer transforms use a
/// radix-2 FFT in `f64`.
pub const DFT_MAX_LEN: usize = 4096;

/// `f64` reference transform of `x`.
pub fn fft_reference(x: &ComplexSignal, direction: Direction) -> Result<Vec<[f64; 2]>, KernelError> {
    let pairs = x.to_pairs_f64();
    if pairs.len() <= DFT_MAX_LEN {
        return Ok(dft_oracle(&pairs, direction));
    }
    Ok(fft_native(&ComplexSignal::from_pairs(&pairs)?, direction)?.to_pairs_f64())
}

/// Relative L2 error of a transform result against [`fft_reference`].
pub fn fft_error(out: &ComplexSignal, input: &ComplexSignal, direction: Direction) -> f64 {
    let reference = fft_reference(input, direction).expect("input is a valid signal");
    rel_l2(&out.to_pairs_f64(), &reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m64(r: usize, c: usize, v: &[f64]) -> StreamArray {
        StreamArray::matrix(r, c, v.to_vec()).unwrap()
    }

    fn close(a: &[[f64; 2]], b: &[[f64; 2]]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12)
    }

    #[test]
    fn gemm_oracle_two_by_two() {
        let a = m64(2, 2, &[1., 2., 3., 4.]);
        let b = m64(2, 2, &[5., 6., 7., 8.]);
        let d = GemmDims::cube(2).unwrap();
        assert_eq!(gemm_oracle(&a, &b, d).unwrap(), vec![19., 22., 43., 50.]);
        assert_eq!(gemm_fast_native(&a, &b, d).unwrap().as_slice::<f64>().unwrap(), &[19., 22., 43., 50.]);
    }

    #[test]
    fn gemm_oracle_identity_and_scalar() {
        let b: Vec<f64> = (0..9).map(|x| x as f64 - 3.5).collect();
        let id = m64(3, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let d = GemmDims::cube(3).unwrap();
        assert_eq!(gemm_oracle(&id, &m64(3, 3, &b), d).unwrap(), b);
        assert_eq!(gemm_fast_native(&id, &m64(3, 3, &b), d).unwrap().as_slice::<f64>().unwrap(), &b[..]);
        let one = GemmDims::cube(1).unwrap();
        assert_eq!(gemm_oracle(&m64(1, 1, &[3.]), &m64(1, 1, &[-2.5]), one).unwrap(), vec![-7.5]);
    }

    #[test]
    fn gemm_oracle_rejects_mismatch() {
        let a = m64(2, 3, &[0.; 6]);
        let b = m64(2, 2, &[0.; 4]);
        assert!(matches!(gemm_oracle(&a, &b, GemmDims::new(2, 2, 3).unwrap()), Err(KernelError::ShapeMismatch(_))));
        assert!(gemm_fast_native(&a, &b, GemmDims::new(2, 2, 3).unwrap()).is_err());
    }

    #[test]
    fn fast_native_keeps_f32() {
        let a = StreamArray::matrix(5, 6, (0..30).map(|x| x as f32 * 0.25).collect()).unwrap();
        let b = StreamArray::matrix(6, 7, (0..42).map(|x| 1.0 - x as f32 * 0.125).collect()).unwrap();
        let d = GemmDims::new(5, 7, 6).unwrap();
        let c = gemm_fast_native(&a, &b, d).unwrap();
        assert_eq!(c.kind(), ScalarKind::F32);
        assert!(gemm_error(&c, &a, &b, d).unwrap() <= gemm_tolerance(ScalarKind::F32, 6));
    }

    #[test]
    fn spmv_oracle_examples() {
        let csr = CsrMatrix::new(3, 3, vec![1., 2., 3., 4.], vec![0, 2, 1, 2], vec![0, 2, 3, 4]).unwrap();
        let v = StreamArray::vector(vec![1.0f64; 3]).unwrap();
        assert_eq!(spmv_oracle(&csr, &v).unwrap(), vec![3., 3., 4.]);
        assert_eq!(spmv_native(&csr, &v).unwrap().as_slice::<f64>().unwrap(), &[3., 3., 4.]);

        let id = CsrMatrix::new(3, 3, vec![1.0f64; 3], vec![0, 1, 2], vec![0, 1, 2, 3]).unwrap();
        let v = StreamArray::vector(vec![2.0, -1.0, 0.5]).unwrap();
        assert_eq!(spmv_oracle(&id, &v).unwrap(), vec![2.0, -1.0, 0.5]);

        let empty = CsrMatrix::<f64>::new(2, 3, vec![], vec![], vec![0, 0, 0]).unwrap();
        assert_eq!(spmv_oracle(&empty, &StreamArray::vector(vec![1.0f64; 3]).unwrap()).unwrap(), vec![0., 0.]);
    }

    #[test]
    fn spmv_oracle_rejects_bad_format() {
        let bad = CsrMatrix::from_parts_unchecked(2, 2, vec![1.0f64], vec![5], vec![0, 1, 1]);
        let v = StreamArray::vector(vec![1.0f64; 2]).unwrap();
        assert!(matches!(spmv_oracle(&bad, &v), Err(KernelError::Format(_))));
    }

    #[test]
    fn dft_oracle_examples() {
        let fwd = Direction::Forward;
        assert!(close(&dft_oracle(&[[1., 0.], [0., 0.], [0., 0.], [0., 0.]], fwd), &[[1., 0.]; 4]));
        assert!(close(&dft_oracle(&[[1., 0.]; 4], fwd), &[[4., 0.], [0., 0.], [0., 0.], [0., 0.]]));
        let x = [[1., 0.], [0., 1.], [-1., 0.], [0., -1.]];
        assert!(close(&dft_oracle(&x, fwd), &[[0., 0.], [4., 0.], [0., 0.], [0., 0.]]));
    }

    #[test]
    fn dft_oracle_round_trip_any_length() {
        for n in [1, 3, 5, 12, 17] {
            let x: Vec<[f64; 2]> = (0..n).map(|j| [(j as f64).sin(), 0.5 - j as f64 * 0.1]).collect();
            let back = dft_oracle(&dft_oracle(&x, Direction::Forward), Direction::Inverse);
            assert!(rel_l2(&back, &x) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn fft_native_matches_dft() {
        for n in [1usize, 2, 8, 64, 256] {
            let x: Vec<[f64; 2]> = (0..n).map(|j| [(j as f64 * 0.7).cos(), (j as f64 * 1.3).sin()]).collect();
            let sig = ComplexSignal::from_pairs(&x).unwrap();
            for dir in [Direction::Forward, Direction::Inverse] {
                let y = fft_native(&sig, dir).unwrap();
                assert!(fft_error(&y, &sig, dir) < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn error_measures() {
        assert_eq!(rel_l2(&[[0., 0.]], &[[0., 0.]]), 0.0);
        assert_eq!(rel_l2(&[[1., 0.]], &[[0., 0.]]), f64::INFINITY);
        assert!((rel_l2(&[[1., 1.]], &[[1., 0.]]) - 1.0).abs() < 1e-15);
        let c = StreamArray::vector(vec![1.0f64, 2.0]).unwrap();
        assert_eq!(scaled_error(&c, &[1.0, 2.5], &[1.0, 5.0]), 0.1);
        assert_eq!(gemm_tolerance(ScalarKind::F64, 100), 1e-10);
    }
}
