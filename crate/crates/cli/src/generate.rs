//! Seeded inputs. Values are uniform in `[-1, 1]`; a fixed seed regenerates
//! bit-identical data.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamforge_core::kernels::{ComplexSignal, CsrMatrix};
use streamforge_core::{Real, StreamArray};

use crate::{nnz_per_row, BenchError, Precision};

fn uniform<T: Real>(rng: &mut ChaCha8Rng, len: usize) -> Vec<T> {
    (0..len).map(|_| T::from_f64(rng.gen_range(-1.0..=1.0))).collect()
}

/// Dense `m x n` matrix.
pub fn generate_dense(m: usize, n: usize, seed: u64, precision: Precision) -> Result<StreamArray, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = match precision {
        Precision::F32 => StreamArray::matrix(m, n, uniform::<f32>(&mut rng, m * n)),
        Precision::F64 => StreamArray::matrix(m, n, uniform::<f64>(&mut rng, m * n)),
    };
    a.map_err(|e| BenchError::Usage(e.to_string()))
}

/// Dense vector of length `n`.
pub fn generate_vector(n: usize, seed: u64, precision: Precision) -> Result<StreamArray, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = match precision {
        Precision::F32 => StreamArray::vector(uniform::<f32>(&mut rng, n)),
        Precision::F64 => StreamArray::vector(uniform::<f64>(&mut rng, n)),
    };
    v.map_err(|e| BenchError::Usage(e.to_string()))
}

/// CSR matrix of either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyCsr {
    F32(CsrMatrix<f32>),
    F64(CsrMatrix<f64>),
}

impl AnyCsr {
    pub fn nrows(&self) -> usize {
        match self {
            AnyCsr::F32(m) => m.nrows(),
            AnyCsr::F64(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            AnyCsr::F32(m) => m.ncols(),
            AnyCsr::F64(m) => m.ncols(),
        }
    }

    pub fn nelmts(&self) -> usize {
        match self {
            AnyCsr::F32(m) => m.nelmts(),
            AnyCsr::F64(m) => m.nelmts(),
        }
    }

    pub fn indx(&self) -> &[i32] {
        match self {
            AnyCsr::F32(m) => m.indx(),
            AnyCsr::F64(m) => m.indx(),
        }
    }

    pub fn rowp(&self) -> &[i32] {
        match self {
            AnyCsr::F32(m) => m.rowp(),
            AnyCsr::F64(m) => m.rowp(),
        }
    }
}

/// Each row holds `round(density * ncols)` distinct uniformly chosen
/// columns in ascending order.
pub fn generate_sparse(nrows: usize, ncols: usize, density: f64, seed: u64, precision: Precision) -> Result<AnyCsr, BenchError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(BenchError::Usage(format!("density {density} outside (0, 1]")));
    }
    if nrows == 0 || ncols == 0 {
        return Err(BenchError::Usage(format!("sparse matrix {nrows}x{ncols} is empty")));
    }
    let per_row = nnz_per_row(ncols, density);
    let nnz = nrows * per_row;
    if nnz > i32::MAX as usize || ncols > i32::MAX as usize {
        return Err(BenchError::Usage(format!("{nnz} stored entries is too many")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indx = Vec::with_capacity(nnz);
    let mut rowp = Vec::with_capacity(nrows + 1);
    rowp.push(0);
    for _ in 0..nrows {
        let mut cols: Vec<i32> = sample(&mut rng, ncols, per_row).into_iter().map(|c| c as i32).collect();
        cols.sort_unstable();
        indx.extend(cols);
        rowp.push(indx.len() as i32);
    }
    let bad = |e: streamforge_core::kernels::CsrError| BenchError::Usage(e.to_string());
    Ok(match precision {
        Precision::F32 => AnyCsr::F32(CsrMatrix::new(nrows, ncols, uniform(&mut rng, nnz), indx, rowp).map_err(bad)?),
        Precision::F64 => AnyCsr::F64(CsrMatrix::new(nrows, ncols, uniform(&mut rng, nnz), indx, rowp).map_err(bad)?),
    })
}

/// `n`-point complex signal; `n` must be a power of two.
pub fn generate_signal(n: usize, seed: u64, precision: Precision) -> Result<ComplexSignal, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sig = match precision {
        Precision::F32 => ComplexSignal::from_interleaved(uniform::<f32>(&mut rng, 2 * n)),
        Precision::F64 => ComplexSignal::from_interleaved(uniform::<f64>(&mut rng, 2 * n)),
    };
    sig.map_err(|e| BenchError::Usage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_density_is_dense() {
        let m = generate_sparse(4, 4, 1.0, 9, Precision::F64).unwrap();
        assert_eq!(m.nelmts(), 16);
        assert_eq!(m.rowp(), &[0, 4, 8, 12, 16]);
        assert_eq!(&m.indx()[..4], &[0, 1, 2, 3]);
    }

    #[test]
    fn one_percent_of_100_columns() {
        let m = generate_sparse(100, 100, 0.01, 3, Precision::F32).unwrap();
        assert_eq!(m.nelmts(), 100);
        assert!(m.rowp().windows(2).all(|w| w[1] - w[0] == 1));
    }

    #[test]
    fn rows_sorted_and_distinct() {
        let m = generate_sparse(50, 300, 0.1, 11, Precision::F64).unwrap();
        for r in m.rowp().windows(2) {
            let cols = &m.indx()[r[0] as usize..r[1] as usize];
            assert_eq!(cols.len(), 30);
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate_sparse(30, 40, 0.2, 5, Precision::F64).unwrap(), generate_sparse(30, 40, 0.2, 5, Precision::F64).unwrap());
        assert_ne!(generate_sparse(30, 40, 0.2, 5, Precision::F64).unwrap(), generate_sparse(30, 40, 0.2, 6, Precision::F64).unwrap());
        assert_eq!(generate_dense(7, 3, 1, Precision::F32).unwrap(), generate_dense(7, 3, 1, Precision::F32).unwrap());
        assert_eq!(generate_signal(64, 2, Precision::F64).unwrap(), generate_signal(64, 2, Precision::F64).unwrap());
    }

    #[test]
    fn values_in_range() {
        let a = generate_dense(20, 20, 4, Precision::F64).unwrap();
        assert!(a.as_slice::<f64>().unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));
        let s = generate_signal(32, 4, Precision::F32).unwrap();
        assert!(s.as_array().as_slice::<f32>().unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn invalid_inputs() {
        for d in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(generate_sparse(4, 4, d, 1, Precision::F64), Err(BenchError::Usage(_))));
        }
        assert!(generate_signal(12, 1, Precision::F32).is_err());
        assert!(generate_dense(0, 3, 1, Precision::F32).is_err());
    }
}
