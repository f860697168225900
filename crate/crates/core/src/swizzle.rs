//! Block-swizzled matrix storage: square blocks laid out contiguously, blocks
//! ordered row-major by block coordinate.

use crate::array::StreamArray;
use crate::error::CoreError;
use crate::value::Element;

pub const DEFAULT_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SwizzledMatrix<T> {
    rows: usize,
    cols: usize,
    block: usize,
    block_rows: usize,
    block_cols: usize,
    data: Vec<T>,
}

impl<T: Element> SwizzledMatrix<T> {
    /// Logical (unpadded) row count.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Number of blocks down and across.
    pub fn block_grid(&self) -> (usize, usize) {
        (self.block_rows, self.block_cols)
    }

    pub fn padded_rows(&self) -> usize {
        self.block_rows * self.block
    }

    pub fn padded_cols(&self) -> usize {
        self.block_cols * self.block
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Contiguous row-major storage of block `(br, bc)`.
    pub fn block_data(&self, br: usize, bc: usize) -> &[T] {
        let len = self.block * self.block;
        let start = (br * self.block_cols + bc) * len;
        &self.data[start..start + len]
    }

    pub fn block_data_mut(&mut self, br: usize, bc: usize) -> &mut [T] {
        let len = self.block * self.block;
        let start = (br * self.block_cols + bc) * len;
        &mut self.data[start..start + len]
    }

    /// Global storage offset of logical element `(i, j)`, valid in the padded range.
    #[inline]
    pub fn offset_of(&self, i: usize, j: usize) -> usize {
        let b = self.block;
        ((i / b) * self.block_cols + j / b) * b * b + (i % b) * b + (j % b)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[self.offset_of(i, j)]
    }

    /// Zero matrix with the given logical size, padded to block multiples.
    pub fn zeros(rows: usize, cols: usize, block: usize) -> Result<Self, CoreError> {
        if block == 0 {
            return Err(CoreError::InvalidBlock);
        }
        let block_rows = rows.div_ceil(block);
        let block_cols = cols.div_ceil(block);
        Ok(SwizzledMatrix {
            rows,
            cols,
            block,
            block_rows,
            block_cols,
            data: vec![T::default(); block_rows * block_cols * block * block],
        })
    }
}

/// Reorders a dense row-major `rows x cols` buffer into block-swizzled form,
/// zero-padding up to block multiples.
pub fn swizzle<T: Element>(data: &[T], rows: usize, cols: usize, block: usize) -> Result<SwizzledMatrix<T>, CoreError> {
    if data.len() != rows * cols {
        return Err(CoreError::LengthMismatch { expected: rows * cols, found: data.len() });
    }
    let mut s = SwizzledMatrix::zeros(rows, cols, block)?;
    for i in 0..rows {
        let src = &data[i * cols..(i + 1) * cols];
        for bc in 0..s.block_cols {
            let j0 = bc * block;
            if j0 >= cols {
                break;
            }
            let j1 = (j0 + block).min(cols);
            let dst = s.offset_of(i, j0);
            s.data[dst..dst + (j1 - j0)].copy_from_slice(&src[j0..j1]);
        }
    }
    Ok(s)
}

/// Swizzles a rank-2, width-1 array of element type `T`.
pub fn swizzle_array<T: Element>(a: &StreamArray, block: usize) -> Result<SwizzledMatrix<T>, CoreError> {
    let shape = a.shape();
    let ext = shape.extents();
    if ext.len() != 2 || a.width() != 1 {
        return Err(CoreError::InvalidShape(ext.to_vec()));
    }
    swizzle(a.try_slice::<T>()?, ext[0], ext[1], block)
}

/// Dense row-major copy with padding dropped.
pub fn unswizzle<T: Element>(s: &SwizzledMatrix<T>) -> Vec<T> {
    let mut out = vec![T::default(); s.rows * s.cols];
    for i in 0..s.rows {
        for bc in 0..s.block_cols {
            let j0 = bc * s.block;
            if j0 >= s.cols {
                break;
            }
            let j1 = (j0 + s.block).min(s.cols);
            let src = s.offset_of(i, j0);
            out[i * s.cols + j0..i * s.cols + j1].copy_from_slice(&s.data[src..src + (j1 - j0)]);
        }
    }
    out
}
