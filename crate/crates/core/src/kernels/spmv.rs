//! Sparse matrix-vector product on the 3-array CSR layout.

use thiserror::Error;

use super::KernelError;
use crate::array::{grid, StreamArray};
use crate::backend::Backend;
use crate::ir::{Bindings, Expr, LoopId, LoopSpec, Program, Stmt, Stream, VarId};
use crate::value::{Real, ScalarKind, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsrError {
    #[error("matrix dimensions must be positive, got {nrows}x{ncols}")]
    EmptyDims { nrows: usize, ncols: usize },
    #[error("rowp has {found} entries, expected nrows + 1 = {expected}")]
    RowPointerLength { expected: usize, found: usize },
    #[error("matvals has {matvals} entries but indx has {indx}")]
    ValueIndexLength { matvals: usize, indx: usize },
    #[error("rowp[0] = {0}, expected 0")]
    RowPointerStart(i32),
    #[error("rowp[nrows] = {found}, expected nelmts = {expected}")]
    RowPointerEnd { expected: usize, found: i32 },
    #[error("rowp decreases at row {row}")]
    RowPointerDecreasing { row: usize },
    #[error("indx[{k}] = {col} outside 0..{ncols}")]
    ColumnOutOfRange { k: usize, col: i32, ncols: usize },
    #[error("more than i32::MAX stored entries")]
    TooLarge,
}

/// Compressed sparse row matrix: `matvals[k]` sits in column `indx[k]`, and
/// row `j` owns entries `rowp[j]..rowp[j + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    matvals: Vec<T>,
    indx: Vec<i32>,
    rowp: Vec<i32>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn new(nrows: usize, ncols: usize, matvals: Vec<T>, indx: Vec<i32>, rowp: Vec<i32>) -> Result<Self, CsrError> {
        let m = CsrMatrix { nrows, ncols, matvals, indx, rowp };
        m.validate()?;
        Ok(m)
    }

    /// Skips validation; [`mod2as`] still rejects a malformed matrix before
    /// running.
    pub fn from_parts_unchecked(nrows: usize, ncols: usize, matvals: Vec<T>, indx: Vec<i32>, rowp: Vec<i32>) -> Self {
        CsrMatrix { nrows, ncols, matvals, indx, rowp }
    }

    pub fn validate(&self) -> Result<(), CsrError> {
        if self.nrows == 0 || self.ncols == 0 {
            return Err(CsrError::EmptyDims { nrows: self.nrows, ncols: self.ncols });
        }
        if self.rowp.len() != self.nrows + 1 {
            return Err(CsrError::RowPointerLength { expected: self.nrows + 1, found: self.rowp.len() });
        }
        if self.matvals.len() != self.indx.len() {
            return Err(CsrError::ValueIndexLength { matvals: self.matvals.len(), indx: self.indx.len() });
        }
        if self.nelmts() > i32::MAX as usize || self.ncols > i32::MAX as usize {
            return Err(CsrError::TooLarge);
        }
        if self.rowp[0] != 0 {
            return Err(CsrError::RowPointerStart(self.rowp[0]));
        }
        let last = self.rowp[self.nrows];
        if last as usize != self.nelmts() || last < 0 {
            return Err(CsrError::RowPointerEnd { expected: self.nelmts(), found: last });
        }
        if let Some(row) = self.rowp.windows(2).position(|w| w[1] < w[0]) {
            return Err(CsrError::RowPointerDecreasing { row });
        }
        if let Some(k) = self.indx.iter().position(|&c| c < 0 || c as usize >= self.ncols) {
            return Err(CsrError::ColumnOutOfRange { k, col: self.indx[k], ncols: self.ncols });
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nelmts(&self) -> usize {
        self.matvals.len()
    }

    pub fn matvals(&self) -> &[T] {
        &self.matvals
    }

    pub fn indx(&self) -> &[i32] {
        &self.indx
    }

    pub fn rowp(&self) -> &[i32] {
        &self.rowp
    }

    /// Row-major dense expansion.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::ZERO; self.nrows * self.ncols];
        for r in 0..self.nrows {
            for k in self.rowp[r] as usize..self.rowp[r + 1] as usize {
                d[r * self.ncols + self.indx[k] as usize] += self.matvals[k];
            }
        }
        d
    }
}

/// Drops entries with `|d| <= zero_tol`; columns ascend within each row.
pub fn csr_from_dense<T: Real>(dense: &StreamArray, zero_tol: f64) -> Result<CsrMatrix<T>, KernelError> {
    let ext = dense.shape().extents().to_vec();
    if ext.len() != 2 || dense.width() != 1 {
        return Err(KernelError::ShapeMismatch(format!("expected a width-1 matrix, got {ext:?}")));
    }
    let (nrows, ncols) = (ext[0], ext[1]);
    let d = dense.try_slice::<T>()?;
    let mut matvals = Vec::new();
    let mut indx = Vec::new();
    let mut rowp = Vec::with_capacity(nrows + 1);
    rowp.push(0);
    for row in d.chunks_exact(ncols) {
        for (j, &x) in row.iter().enumerate() {
            if x.to_f64().abs() > zero_tol {
                matvals.push(x);
                indx.push(j as i32);
            }
        }
        rowp.push(i32::try_from(matvals.len()).map_err(|_| CsrError::TooLarge)?);
    }
    Ok(CsrMatrix::new(nrows, ncols, matvals, indx, rowp)?)
}

/// Per-row program over `grid(nrows)`:
/// `c = 0; for j in rowp[i]..rowp[i+1] { c += matvals[j] * invec[indx[j]] }`.
pub fn spmxv_program(kind: ScalarKind) -> Result<Program, KernelError> {
    let c = VarId(0);
    let j = LoopId(0);
    let i = Expr::input(0);
    let term = Expr::gather("matvals", Expr::loop_var(j))
        * Expr::gather("invec", Expr::gather("indx", Expr::loop_var(j)));
    Ok(Program::builder("spMXV")
        .input(ScalarKind::I32, 1)
        .output(kind, 1)
        .capture("matvals", kind, 1, 1)
        .capture("indx", ScalarKind::I32, 1, 1)
        .capture("rowp", ScalarKind::I32, 1, 1)
        .capture("invec", kind, 1, 1)
        .stmt(Stmt::Let(c, Expr::constant(Value::scalar(kind, 0.0))))
        .stmt(Stmt::Loop(LoopSpec::new(
            j,
            Expr::gather("rowp", i.clone()),
            Expr::gather("rowp", i + Expr::int(1)),
            vec![Stmt::Accumulate(c, term)],
        )))
        .result(Expr::var(c))
        .build()?)
}

/// `outvec = csr * invec`, one program instance per row, ascending `j`.
pub fn mod2as<T: Real>(csr: &CsrMatrix<T>, invec: &StreamArray, backend: &dyn Backend) -> Result<StreamArray, KernelError> {
    csr.validate()?;
    if invec.kind() != T::KIND || invec.width() != 1 || invec.shape().extents() != [csr.ncols] {
        return Err(KernelError::ShapeMismatch(format!(
            "invec is {:?} {}x{}, expected [{}] {}x1",
            invec.shape().extents(),
            invec.kind(),
            invec.width(),
            csr.ncols,
            T::KIND
        )));
    }
    // Arrays need at least one element; an all-empty matrix never reads the pad.
    let nnz = csr.nelmts().max(1);
    let mut vals = csr.matvals.clone();
    let mut cols = csr.indx.clone();
    vals.resize(nnz, T::ZERO);
    cols.resize(nnz, 0);
    let matvals = StreamArray::vector(vals)?;
    let indx = StreamArray::vector(cols)?;
    let rowp = StreamArray::vector(csr.rowp.clone())?;

    let p = spmxv_program(T::KIND)?;
    let captures = Bindings::new()
        .bind("matvals", &matvals)
        .bind("indx", &indx)
        .bind("rowp", &rowp)
        .bind("invec", invec);
    let out = backend.run(&p, &[Stream::Grid(grid(&[csr.nrows])?)], &captures)?;
    Ok(out.into_single())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::backend::{Interpreter, ParallelBackend};
    use crate::oracles::{gemm_tolerance, scaled_error, spmv_error};

    fn example() -> CsrMatrix<f64> {
        CsrMatrix::new(3, 3, vec![1., 2., 3., 4.], vec![0, 2, 1, 2], vec![0, 2, 3, 4]).unwrap()
    }

    #[test]
    fn three_row_example() {
        let v = StreamArray::vector(vec![1.0f64; 3]).unwrap();
        let out = mod2as(&example(), &v, &Interpreter).unwrap();
        assert_eq!(out.as_slice::<f64>().unwrap(), &[3., 3., 4.]);
    }

    #[test]
    fn identity_and_empty_rows() {
        let id = CsrMatrix::new(4, 4, vec![1.0f32; 4], vec![0, 1, 2, 3], vec![0, 1, 2, 3, 4]).unwrap();
        let v = StreamArray::vector(vec![0.5f32, -2.0, 3.25, 7.0]).unwrap();
        assert_eq!(mod2as(&id, &v, &ParallelBackend::new(3)).unwrap(), v);

        let gaps = CsrMatrix::new(3, 2, vec![5.0f64], vec![1], vec![0, 0, 1, 1]).unwrap();
        let v = StreamArray::vector(vec![1.0f64, 2.0]).unwrap();
        assert_eq!(mod2as(&gaps, &v, &Interpreter).unwrap().as_slice::<f64>().unwrap(), &[0., 10., 0.]);

        let none = CsrMatrix::<f64>::new(2, 2, vec![], vec![], vec![0, 0, 0]).unwrap();
        assert_eq!(mod2as(&none, &v, &Interpreter).unwrap().as_slice::<f64>().unwrap(), &[0., 0.]);
    }

    #[test]
    fn format_errors_before_running() {
        let v = StreamArray::vector(vec![1.0f64; 3]).unwrap();
        let cases = [
            (CsrMatrix::from_parts_unchecked(3, 3, vec![1.0], vec![0], vec![0, 1, 1]), "rowp length"),
            (CsrMatrix::from_parts_unchecked(3, 3, vec![1.0], vec![3], vec![0, 1, 1, 1]), "column"),
            (CsrMatrix::from_parts_unchecked(3, 3, vec![1.0, 2.0], vec![0, 1], vec![0, 2, 1, 2]), "decreasing"),
            (CsrMatrix::from_parts_unchecked(3, 3, vec![1.0], vec![0], vec![1, 1, 1, 1]), "start"),
            (CsrMatrix::from_parts_unchecked(3, 3, vec![1.0], vec![0], vec![0, 1, 1, 2]), "end"),
            (CsrMatrix::from_parts_unchecked(3, 3, vec![1.0], vec![0, 1], vec![0, 1, 1, 1]), "lengths"),
        ];
        for (m, what) in cases {
            assert!(matches!(mod2as(&m, &v, &Interpreter), Err(KernelError::Format(_))), "{what}");
        }
        let e = CsrMatrix::<f64>::new(3, 3, vec![1.0], vec![-1], vec![0, 1, 1, 1]).unwrap_err();
        assert_eq!(e, CsrError::ColumnOutOfRange { k: 0, col: -1, ncols: 3 });
    }

    #[test]
    fn invec_must_match() {
        let v = StreamArray::vector(vec![1.0f64; 4]).unwrap();
        assert!(matches!(mod2as(&example(), &v, &Interpreter), Err(KernelError::ShapeMismatch(_))));
        let v = StreamArray::vector(vec![1.0f32; 3]).unwrap();
        assert!(matches!(mod2as(&example(), &v, &Interpreter), Err(KernelError::ShapeMismatch(_))));
    }

    #[test]
    fn csr_from_dense_examples() {
        let z = StreamArray::matrix(2, 3, vec![0.0f64; 6]).unwrap();
        let c = csr_from_dense::<f64>(&z, 0.0).unwrap();
        assert_eq!((c.nelmts(), c.rowp()), (0, &[0, 0, 0][..]));

        let id = StreamArray::matrix(3, 3, vec![1.0f64, 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let c = csr_from_dense::<f64>(&id, 0.0).unwrap();
        assert_eq!((c.matvals(), c.indx(), c.rowp()), (&[1., 1., 1.][..], &[0, 1, 2][..], &[0, 1, 2, 3][..]));

        let ex = example();
        let dense = StreamArray::matrix(3, 3, ex.to_dense()).unwrap();
        assert_eq!(csr_from_dense::<f64>(&dense, 0.0).unwrap(), ex);

        let small = StreamArray::matrix(1, 3, vec![0.1f64, -0.5, 0.05]).unwrap();
        assert_eq!(csr_from_dense::<f64>(&small, 0.1).unwrap().indx(), &[1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matches_dense_product(seed in any::<u64>(), r in 1usize..30, c in 1usize..30, keep in 0.0f64..1.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d: Vec<f32> = (0..r * c)
                .map(|_| if rng.gen_bool(keep) { rng.gen_range(-1.0f32..1.0) } else { 0.0 })
                .collect();
            let v: Vec<f32> = (0..c).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let dense = StreamArray::matrix(r, c, d.clone()).unwrap();
            let invec = StreamArray::vector(v.clone()).unwrap();
            let csr = csr_from_dense::<f32>(&dense, 0.0).unwrap();
            let out = mod2as(&csr, &invec, &ParallelBackend::new(2)).unwrap();
            prop_assert!(spmv_error(&out, &csr, &invec).unwrap() <= gemm_tolerance(ScalarKind::F32, c));
            // dense matrix-vector product accumulated in f64
            let gemv: Vec<f64> = (0..r).map(|i| (0..c).map(|j| d[i * c + j] as f64 * v[j] as f64).sum()).collect();
            let scale: Vec<f64> = (0..r).map(|i| (0..c).map(|j| (d[i * c + j] as f64 * v[j] as f64).abs()).sum()).collect();
            prop_assert!(scaled_error(&out, &gemv, &scale) <= gemm_tolerance(ScalarKind::F32, c));
        }
    }
}
