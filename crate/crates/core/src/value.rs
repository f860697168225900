//! Scalar kinds, small fixed-width values, and the typed element trait used
//! by array storage.

use std::fmt;

use crate::error::CoreError;

/// Maximum number of components in a [`Value`].
pub const MAX_WIDTH: usize = 4;

/// Element scalar type. Every value and array carries exactly one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    F32,
    F64,
    I32,
}

impl ScalarKind {
    pub fn size_bytes(self) -> usize {
        match self {
            ScalarKind::F32 | ScalarKind::I32 => 4,
            ScalarKind::F64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        !matches!(self, ScalarKind::I32)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarKind::F32 => "f32",
            ScalarKind::F64 => "f64",
            ScalarKind::I32 => "i32",
        }
    }
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kind plus component count: the static type of a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ty {
    pub kind: ScalarKind,
    pub width: usize,
}

impl Ty {
    pub const fn new(kind: ScalarKind, width: usize) -> Self {
        Ty { kind, width }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.kind, self.width)
    }
}

/// A tuple of 1 to 4 scalars of one kind (`Value1f`, `Value2i`, `Value4f`, ...).
///
/// Components are held as `f64`, which represents every `f32` and `i32`
/// exactly; the kind tag decides how they are interpreted.
#[derive(Clone, Copy, PartialEq)]
pub struct Value {
    kind: ScalarKind,
    width: u8,
    comps: [f64; MAX_WIDTH],
}

impl Value {
    pub fn new(kind: ScalarKind, comps: &[f64]) -> Result<Self, CoreError> {
        if comps.is_empty() || comps.len() > MAX_WIDTH {
            return Err(CoreError::InvalidWidth(comps.len()));
        }
        let mut v = Value { kind, width: comps.len() as u8, comps: [0.0; MAX_WIDTH] };
        for (dst, &c) in v.comps.iter_mut().zip(comps) {
            *dst = match kind {
                ScalarKind::F32 => c as f32 as f64,
                ScalarKind::F64 => c,
                ScalarKind::I32 => c as i32 as f64,
            };
        }
        Ok(v)
    }

    pub fn zero(kind: ScalarKind, width: usize) -> Result<Self, CoreError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(CoreError::InvalidWidth(width));
        }
        Value::new(kind, &[0.0; MAX_WIDTH][..width])
    }

    pub fn f32(x: f32) -> Self {
        Value { kind: ScalarKind::F32, width: 1, comps: [x as f64, 0.0, 0.0, 0.0] }
    }

    pub fn f64(x: f64) -> Self {
        Value { kind: ScalarKind::F64, width: 1, comps: [x, 0.0, 0.0, 0.0] }
    }

    pub fn i32(x: i32) -> Self {
        Value { kind: ScalarKind::I32, width: 1, comps: [x as f64, 0.0, 0.0, 0.0] }
    }

    /// Scalar of the given kind, converting `x` into it.
    pub fn scalar(kind: ScalarKind, x: f64) -> Self {
        Value::new(kind, &[x]).expect("width 1 is valid")
    }

    pub fn from_i32s(xs: &[i32]) -> Result<Self, CoreError> {
        let c: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        Value::new(ScalarKind::I32, &c)
    }

    pub fn from_f32s(xs: &[f32]) -> Result<Self, CoreError> {
        let c: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        Value::new(ScalarKind::F32, &c)
    }

    pub fn from_f64s(xs: &[f64]) -> Result<Self, CoreError> {
        Value::new(ScalarKind::F64, xs)
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn ty(&self) -> Ty {
        Ty::new(self.kind, self.width())
    }

    pub fn component(&self, i: usize) -> Result<f64, CoreError> {
        if i < self.width() {
            Ok(self.comps[i])
        } else {
            Err(CoreError::ComponentOutOfRange { index: i, width: self.width() })
        }
    }

    pub fn components(&self) -> &[f64] {
        &self.comps[..self.width()]
    }

    /// Components converted to the element type `T`, zero-padded to four lanes.
    pub fn lanes<T: Element>(&self) -> [T; MAX_WIDTH] {
        let mut out = [T::default(); MAX_WIDTH];
        for (o, &c) in out.iter_mut().zip(self.components()) {
            *o = T::from_f64(c);
        }
        out
    }

    pub(crate) fn from_lanes<T: Element>(lanes: &[T]) -> Self {
        let mut v = Value { kind: T::KIND, width: lanes.len() as u8, comps: [0.0; MAX_WIDTH] };
        for (dst, &c) in v.comps.iter_mut().zip(lanes) {
            *dst = c.to_f64();
        }
        v
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Value{}{}(", self.width, &self.kind.name()[..1])?;
        for (i, c) in self.components().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match self.kind {
                ScalarKind::I32 => write!(f, "{}", *c as i32)?,
                _ => write!(f, "{c}")?,
            }
        }
        f.write_str(")")
    }
}

/// Typed buffer behind a [`crate::StreamArray`].
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I32(Vec<i32>),
}

impl Storage {
    pub fn zeros(kind: ScalarKind, len: usize) -> Self {
        match kind {
            ScalarKind::F32 => Storage::F32(vec![0.0; len]),
            ScalarKind::F64 => Storage::F64(vec![0.0; len]),
            ScalarKind::I32 => Storage::I32(vec![0; len]),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            Storage::F32(_) => ScalarKind::F32,
            Storage::F64(_) => ScalarKind::F64,
            Storage::I32(_) => ScalarKind::I32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Storage::F32(v) => v.len(),
            Storage::F64(v) => v.len(),
            Storage::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            Storage::F32(v) => v[i] as f64,
            Storage::F64(v) => v[i],
            Storage::I32(v) => v[i] as f64,
        }
    }
}

/// Rust scalar types that can back a [`Storage`].
pub trait Element: Copy + Default + PartialEq + Send + Sync + fmt::Debug + 'static {
    const KIND: ScalarKind;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn slice(storage: &Storage) -> Option<&[Self]>;
    fn slice_mut(storage: &mut Storage) -> Option<&mut [Self]>;
    fn into_storage(v: Vec<Self>) -> Storage;
}

macro_rules! impl_element {
    ($t:ty, $kind:ident) => {
        impl Element for $t {
            const KIND: ScalarKind = ScalarKind::$kind;

            #[inline]
            fn from_f64(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }

            fn slice(storage: &Storage) -> Option<&[Self]> {
                match storage {
                    Storage::$kind(v) => Some(v),
                    _ => None,
                }
            }

            fn slice_mut(storage: &mut Storage) -> Option<&mut [Self]> {
                match storage {
                    Storage::$kind(v) => Some(v),
                    _ => None,
                }
            }

            fn into_storage(v: Vec<Self>) -> Storage {
                Storage::$kind(v)
            }
        }
    };
}

impl_element!(f32, F32);
impl_element!(f64, F64);
impl_element!(i32, I32);

/// Floating-point element types, for kernels that only make sense on reals.
pub trait Real:
    Element
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::AddAssign
{
    const ZERO: Self;
    const ONE: Self;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
}
