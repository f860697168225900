//! Array containers: dense [`StreamArray`]s and virtual [`GridArray`]s.

use crate::error::CoreError;
use crate::value::{Element, ScalarKind, Storage, Ty, Value, MAX_WIDTH};

/// Rank-1 or rank-2 extents, all positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    rank: usize,
    extents: [usize; 2],
}

impl Shape {
    pub fn new(extents: &[usize]) -> Result<Self, CoreError> {
        match *extents {
            [n] if n > 0 => Ok(Shape { rank: 1, extents: [n, 1] }),
            [r, c] if r > 0 && c > 0 => Ok(Shape { rank: 2, extents: [r, c] }),
            _ => Err(CoreError::InvalidShape(extents.to_vec())),
        }
    }

    pub fn d1(n: usize) -> Result<Self, CoreError> {
        Shape::new(&[n])
    }

    pub fn d2(rows: usize, cols: usize) -> Result<Self, CoreError> {
        Shape::new(&[rows, cols])
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.rank]
    }

    pub fn element_count(&self) -> usize {
        self.extents().iter().product()
    }

    /// Row-major linear offset of a multi-index; `None` if out of range.
    pub fn offset(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.rank || index.iter().zip(self.extents()).any(|(i, e)| i >= e) {
            return None;
        }
        Some(match self.rank {
            1 => index[0],
            _ => index[0] * self.extents[1] + index[1],
        })
    }

    /// Inverse of [`Shape::offset`]. Unused trailing entries are zero.
    #[inline]
    pub fn unravel(&self, linear: usize) -> [usize; 2] {
        match self.rank {
            1 => [linear, 0],
            _ => [linear / self.extents[1], linear % self.extents[1]],
        }
    }
}

/// Dense row-major array of [`Value`]s sharing one kind and width.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamArray {
    shape: Shape,
    width: usize,
    data: Storage,
}

impl StreamArray {
    /// Wraps a flat buffer holding `width` scalars per element.
    pub fn from_storage(shape: Shape, width: usize, data: Storage) -> Result<Self, CoreError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(CoreError::InvalidWidth(width));
        }
        let expected = shape.element_count() * width;
        if data.len() != expected {
            return Err(CoreError::LengthMismatch { expected, found: data.len() });
        }
        Ok(StreamArray { shape, width, data })
    }

    pub fn from_vec<T: Element>(shape: Shape, width: usize, data: Vec<T>) -> Result<Self, CoreError> {
        StreamArray::from_storage(shape, width, T::into_storage(data))
    }

    /// 2-D array of width-1 elements.
    pub fn matrix<T: Element>(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, CoreError> {
        StreamArray::from_vec(Shape::d2(rows, cols)?, 1, data)
    }

    /// 1-D array of width-1 elements.
    pub fn vector<T: Element>(data: Vec<T>) -> Result<Self, CoreError> {
        StreamArray::from_vec(Shape::d1(data.len())?, 1, data)
    }

    pub fn zeros(shape: Shape, kind: ScalarKind, width: usize) -> Result<Self, CoreError> {
        StreamArray::from_storage(shape, width, Storage::zeros(kind, shape.element_count() * width))
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn kind(&self) -> ScalarKind {
        self.data.kind()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn elem_ty(&self) -> Ty {
        Ty::new(self.kind(), self.width)
    }

    pub fn len(&self) -> usize {
        self.shape.element_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn storage(&self) -> &Storage {
        &self.data
    }

    pub fn into_storage(self) -> Storage {
        self.data
    }

    pub fn size_bytes(&self) -> usize {
        self.data.len() * self.kind().size_bytes()
    }

    /// Flat scalar view; `None` when `T` is not the array's kind.
    pub fn as_slice<T: Element>(&self) -> Option<&[T]> {
        T::slice(&self.data)
    }

    pub fn as_mut_slice<T: Element>(&mut self) -> Option<&mut [T]> {
        T::slice_mut(&mut self.data)
    }

    pub fn try_slice<T: Element>(&self) -> Result<&[T], CoreError> {
        self.as_slice().ok_or(CoreError::KindMismatch { expected: T::KIND, found: self.kind() })
    }

    pub fn get(&self, index: &[usize]) -> Result<Value, CoreError> {
        let off = self.shape.offset(index).ok_or_else(|| CoreError::IndexOutOfRange {
            index: index.to_vec(),
            extents: self.shape.extents().to_vec(),
        })?;
        Ok(self.get_linear(off))
    }

    /// Element at a row-major offset. Panics when out of range.
    pub fn get_linear(&self, offset: usize) -> Value {
        let lo = offset * self.width;
        let hi = lo + self.width;
        match &self.data {
            Storage::F32(v) => Value::from_lanes(&v[lo..hi]),
            Storage::F64(v) => Value::from_lanes(&v[lo..hi]),
            Storage::I32(v) => Value::from_lanes(&v[lo..hi]),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.len()).map(move |i| self.get_linear(i))
    }
}

/// Virtual index array: element `(i, j)` is the integer value `(i, j)`.
///
/// Holds no storage regardless of shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridArray {
    shape: Shape,
}

impl GridArray {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.element_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn elem_ty(&self) -> Ty {
        Ty::new(ScalarKind::I32, self.shape.rank())
    }

    #[inline]
    pub fn index_at(&self, linear: usize) -> [i32; 2] {
        let [i, j] = self.shape.unravel(linear);
        [i as i32, j as i32]
    }

    pub fn get_linear(&self, linear: usize) -> Value {
        let idx = self.index_at(linear);
        Value::from_i32s(&idx[..self.shape.rank()]).expect("rank is 1 or 2")
    }

    /// Logical elements in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.len()).map(move |i| self.get_linear(i))
    }
}

/// Virtual helper array over `extents`, enumerating `(0, 0)` up to but not
/// including `(m, n)`.
pub fn grid(extents: &[usize]) -> Result<GridArray, CoreError> {
    Ok(GridArray { shape: Shape::new(extents)? })
}

/// Builds an array by calling `fill` with each multi-index in row-major order.
pub fn make_array<F>(shape: Shape, kind: ScalarKind, width: usize, mut fill: F) -> Result<StreamArray, CoreError>
where
    F: FnMut(&[usize]) -> Value,
{
    let mut arr = StreamArray::zeros(shape, kind, width)?;
    let expected = Ty::new(kind, width);
    for e in 0..shape.element_count() {
        let idx = shape.unravel(e);
        let v = fill(&idx[..shape.rank()]);
        if v.ty() != expected {
            return Err(CoreError::TypeMismatch { expected, found: v.ty() });
        }
        let lo = e * width;
        match &mut arr.data {
            Storage::F32(d) => d[lo..lo + width].copy_from_slice(&v.lanes::<f32>()[..width]),
            Storage::F64(d) => d[lo..lo + width].copy_from_slice(&v.lanes::<f64>()[..width]),
            Storage::I32(d) => d[lo..lo + width].copy_from_slice(&v.lanes::<i32>()[..width]),
        }
    }
    Ok(arr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(g: &GridArray) -> Vec<Vec<i32>> {
        g.iter().map(|v| v.components().iter().map(|&c| c as i32).collect()).collect()
    }

    #[test]
    fn grid_2x2_is_half_open_and_lexicographic() {
        let g = grid(&[2, 2]).unwrap();
        assert_eq!(pairs(&g), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn grid_single_element() {
        assert_eq!(pairs(&grid(&[1]).unwrap()), vec![vec![0]]);
    }

    #[test]
    fn grid_3x1() {
        assert_eq!(pairs(&grid(&[3, 1]).unwrap()), vec![vec![0, 0], vec![1, 0], vec![2, 0]]);
    }

    #[test]
    fn grid_rejects_bad_extents() {
        assert!(matches!(grid(&[0]), Err(CoreError::InvalidShape(_))));
        assert!(matches!(grid(&[3, 0]), Err(CoreError::InvalidShape(_))));
        assert!(matches!(grid(&[]), Err(CoreError::InvalidShape(_))));
        assert!(matches!(grid(&[1, 1, 1]), Err(CoreError::InvalidShape(_))));
    }

    #[test]
    fn grid_is_storage_free() {
        assert_eq!(std::mem::size_of::<GridArray>(), std::mem::size_of::<Shape>());
        assert_eq!(grid(&[1 << 15, 1 << 15]).unwrap().len(), 1 << 30);
    }

    #[test]
    fn make_array_zeros() {
        let a = make_array(Shape::d2(2, 2).unwrap(), ScalarKind::F64, 1, |_| Value::f64(0.0)).unwrap();
        assert!(a.as_slice::<f64>().unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn make_array_from_grid() {
        let g = grid(&[2, 2]).unwrap();
        let a = make_array(Shape::d1(4).unwrap(), ScalarKind::I32, 2, |idx| g.get_linear(idx[0])).unwrap();
        let got: Vec<Value> = a.values().collect();
        let want: Vec<Value> = g.iter().collect();
        assert_eq!(got, want);
        assert_eq!(a.as_slice::<i32>().unwrap(), &[0, 0, 0, 1, 1, 0, 1, 1]);
    }

    #[test]
    fn make_array_identity() {
        let a = make_array(Shape::d2(3, 3).unwrap(), ScalarKind::F32, 1, |idx| {
            Value::f32(if idx[0] == idx[1] { 1.0 } else { 0.0 })
        })
        .unwrap();
        assert_eq!(a.as_slice::<f32>().unwrap(), &[1., 0., 0., 0., 1., 0., 0., 0., 1.]);
    }

    #[test]
    fn make_array_rejects_wrong_value_type() {
        let r = make_array(Shape::d1(2).unwrap(), ScalarKind::F32, 1, |_| Value::f64(1.0));
        assert!(matches!(r, Err(CoreError::TypeMismatch { .. })));
    }

    #[test]
    fn storage_length_is_checked() {
        let r = StreamArray::from_vec(Shape::d2(2, 2).unwrap(), 2, vec![0.0f32; 4]);
        assert_eq!(r, Err(CoreError::LengthMismatch { expected: 8, found: 4 }));
    }

    #[test]
    fn get_out_of_range() {
        let a = StreamArray::matrix(2, 3, vec![0i32; 6]).unwrap();
        assert!(a.get(&[2, 0]).is_err());
        assert!(a.get(&[0, 3]).is_err());
        assert!(a.get(&[0]).is_err());
    }
}
