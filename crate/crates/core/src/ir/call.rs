use thiserror::Error;

use super::compile::Kernel;
use super::Program;
use crate::array::{GridArray, Shape, StreamArray};
use crate::backend::RunError;
use crate::value::{Ty, Value};

/// An input stream: a dense array or a storage-free grid.
#[derive(Debug, Clone, Copy)]
pub enum Stream<'a> {
    Array(&'a StreamArray),
    Grid(GridArray),
}

impl Stream<'_> {
    pub fn shape(&self) -> Shape {
        match self {
            Stream::Array(a) => a.shape(),
            Stream::Grid(g) => g.shape(),
        }
    }

    pub fn elem_ty(&self) -> Ty {
        match self {
            Stream::Array(a) => a.elem_ty(),
            Stream::Grid(g) => g.elem_ty(),
        }
    }

    /// Bytes that must be moved to bind this stream (grids are virtual).
    pub fn size_bytes(&self) -> usize {
        match self {
            Stream::Array(a) => a.size_bytes(),
            Stream::Grid(_) => 0,
        }
    }
}

impl<'a> From<&'a StreamArray> for Stream<'a> {
    fn from(a: &'a StreamArray) -> Self {
        Stream::Array(a)
    }
}

impl From<GridArray> for Stream<'_> {
    fn from(g: GridArray) -> Self {
        Stream::Grid(g)
    }
}

/// Named arrays supplied for a program's captures.
#[derive(Debug, Clone, Default)]
pub struct Bindings<'a> {
    entries: Vec<(String, &'a StreamArray)>,
}

impl<'a> Bindings<'a> {
    pub fn new() -> Self {
        Bindings::default()
    }

    /// Adds or replaces the array bound to `name`.
    pub fn bind(mut self, name: impl Into<String>, array: &'a StreamArray) -> Self {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = array,
            None => self.entries.push((name, array)),
        }
        self
    }

    pub fn get(&self, name: &str) -> Option<&'a StreamArray> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, a)| *a)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CallError {
    #[error("program `{program}` takes {expected} inputs, called with {found}")]
    Arity { program: String, expected: usize, found: usize },
    #[error("input {slot}: expected {expected} elements, got {found}")]
    InputType { slot: usize, expected: Ty, found: Ty },
    #[error("input {slot} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { slot: usize, expected: Vec<usize>, found: Vec<usize> },
    #[error("capture `{0}` is not bound")]
    UnresolvedCapture(String),
    #[error("capture `{name}`: declared {expected} rank {expected_rank}, bound {found} rank {found_rank}")]
    CaptureType { name: String, expected: Ty, expected_rank: usize, found: Ty, found_rank: usize },
}

/// A checked call: inputs, captures resolved in declaration order, and the
/// output shape.
#[derive(Debug, Clone)]
pub struct CallPlan<'p, 'a> {
    pub program: &'p Program,
    pub inputs: Vec<Stream<'a>>,
    pub captures: Vec<&'a StreamArray>,
    pub shape: Shape,
}

impl CallPlan<'_, '_> {
    /// Input, capture and output bytes touched by the call.
    pub fn bytes_bound(&self) -> usize {
        let inputs: usize = self.inputs.iter().map(Stream::size_bytes).sum();
        let captures: usize = self.captures.iter().map(|a| a.size_bytes()).sum();
        let n = self.shape.element_count();
        let outputs: usize = self.program.outputs().iter().map(|t| n * t.width * t.kind.size_bytes()).sum();
        inputs + captures + outputs
    }
}

/// Checks arity, element types, shapes and capture bindings of a call.
pub fn validate_call<'p, 'a>(
    p: &'p Program,
    inputs: &[Stream<'a>],
    captures: &Bindings<'a>,
) -> Result<CallPlan<'p, 'a>, CallError> {
    if inputs.len() != p.inputs().len() {
        return Err(CallError::Arity { program: p.name().to_string(), expected: p.inputs().len(), found: inputs.len() });
    }
    let shape = inputs[0].shape();
    for (slot, (s, want)) in inputs.iter().zip(p.inputs()).enumerate() {
        if s.elem_ty() != *want {
            return Err(CallError::InputType { slot, expected: *want, found: s.elem_ty() });
        }
        if s.shape() != shape {
            return Err(CallError::ShapeMismatch {
                slot,
                expected: shape.extents().to_vec(),
                found: s.shape().extents().to_vec(),
            });
        }
    }
    let mut resolved = Vec::with_capacity(p.captures().len());
    for decl in p.captures() {
        let a = captures.get(&decl.name).ok_or_else(|| CallError::UnresolvedCapture(decl.name.clone()))?;
        if a.elem_ty() != decl.elem || a.shape().rank() != decl.rank {
            return Err(CallError::CaptureType {
                name: decl.name.clone(),
                expected: decl.elem,
                expected_rank: decl.rank,
                found: a.elem_ty(),
                found_rank: a.shape().rank(),
            });
        }
        resolved.push(a);
    }
    Ok(CallPlan { program: p, inputs: inputs.to_vec(), captures: resolved, shape })
}

/// Evaluates a single output element, returning one value per program output.
pub fn eval_element(
    p: &Program,
    element: &[usize],
    inputs: &[Stream<'_>],
    captures: &Bindings<'_>,
) -> Result<Vec<Value>, RunError> {
    let plan = validate_call(p, inputs, captures)?;
    let linear = plan.shape.offset(element).ok_or_else(|| RunError::ElementOutOfRange {
        index: element.to_vec(),
        extents: plan.shape.extents().to_vec(),
    })?;
    let kernel = Kernel::compile(p, &plan.inputs, &plan.captures, plan.shape, true);
    let mut frame = kernel.new_frame();
    kernel
        .eval_values(&mut frame, linear)
        .map_err(|fault| RunError::Element { index: element.to_vec(), fault: fault.into_kind() })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::array::grid;
    use crate::ir::{Expr, Program};
    use crate::kernels::mxm_program;
    use crate::value::ScalarKind;

    fn m64(r: usize, c: usize, v: &[f64]) -> StreamArray {
        StreamArray::matrix(r, c, v.to_vec()).unwrap()
    }

    fn identity() -> Program {
        Program::builder("id").input(ScalarKind::F64, 1).output(ScalarKind::F64, 1).result(Expr::input(0)).build().unwrap()
    }

    #[test]
    fn mxm_call_plan_shape() {
        let a = m64(3, 5, &[0.0; 15]);
        let b = m64(5, 4, &[0.0; 20]);
        let p = mxm_program(ScalarKind::F64, 5).unwrap();
        let caps = Bindings::new().bind("A", &a).bind("B", &b);
        let plan = validate_call(&p, &[grid(&[3, 4]).unwrap().into()], &caps).unwrap();
        assert_eq!(plan.shape.extents(), &[3, 4]);
        assert_eq!(plan.captures.len(), 2);
        // The grid input has no storage.
        assert_eq!(plan.bytes_bound(), 15 * 8 + 20 * 8 + 12 * 8);
    }

    #[test]
    fn arity_error() {
        let x = StreamArray::vector(vec![1.0f64]).unwrap();
        let e = validate_call(&identity(), &[(&x).into(), (&x).into()], &Bindings::new()).unwrap_err();
        assert!(matches!(e, CallError::Arity { expected: 1, found: 2, .. }), "{e:?}");
    }

    #[test]
    fn input_shape_mismatch() {
        let p = Program::builder("add")
            .input(ScalarKind::F64, 1)
            .input(ScalarKind::F64, 1)
            .output(ScalarKind::F64, 1)
            .result(Expr::input(0) + Expr::input(1))
            .build()
            .unwrap();
        let x = StreamArray::vector(vec![0.0f64; 4]).unwrap();
        let y = StreamArray::vector(vec![0.0f64; 5]).unwrap();
        let e = validate_call(&p, &[(&x).into(), (&y).into()], &Bindings::new()).unwrap_err();
        assert!(matches!(e, CallError::ShapeMismatch { slot: 1, .. }), "{e:?}");
    }

    #[test]
    fn input_type_and_capture_errors() {
        let x = StreamArray::vector(vec![0.0f32; 2]).unwrap();
        let e = validate_call(&identity(), &[(&x).into()], &Bindings::new()).unwrap_err();
        assert!(matches!(e, CallError::InputType { slot: 0, .. }), "{e:?}");

        let p = mxm_program(ScalarKind::F64, 1).unwrap();
        let a = m64(1, 1, &[1.0]);
        let g = grid(&[1, 1]).unwrap();
        let e = validate_call(&p, &[g.into()], &Bindings::new().bind("A", &a)).unwrap_err();
        assert_eq!(e, CallError::UnresolvedCapture("B".into()));
        let v = StreamArray::vector(vec![1.0f64]).unwrap();
        let e = validate_call(&p, &[g.into()], &Bindings::new().bind("A", &a).bind("B", &v)).unwrap_err();
        assert!(matches!(e, CallError::CaptureType { .. }), "{e:?}");
    }

    #[test]
    fn eval_identity() {
        let x = StreamArray::vector(vec![7.0f64]).unwrap();
        let out = eval_element(&identity(), &[0], &[(&x).into()], &Bindings::new()).unwrap();
        assert_eq!(out, vec![Value::f64(7.0)]);
    }

    #[test]
    fn eval_mxm_elements() {
        let p = mxm_program(ScalarKind::F64, 2).unwrap();
        let g: Stream = grid(&[2, 2]).unwrap().into();
        let id = m64(2, 2, &[1., 0., 0., 1.]);
        let out = eval_element(&p, &[0, 0], &[g.clone()], &Bindings::new().bind("A", &id).bind("B", &id)).unwrap();
        assert_eq!(out, vec![Value::f64(1.0)]);

        let a = m64(2, 2, &[1., 2., 3., 4.]);
        let b = m64(2, 2, &[5., 6., 7., 8.]);
        let out = eval_element(&p, &[1, 0], &[g], &Bindings::new().bind("A", &a).bind("B", &b)).unwrap();
        assert_eq!(out, vec![Value::f64(43.0)]);
    }

    #[test]
    fn eval_element_outside_shape() {
        let x = StreamArray::vector(vec![1.0f64; 3]).unwrap();
        let e = eval_element(&identity(), &[3], &[(&x).into()], &Bindings::new()).unwrap_err();
        assert!(matches!(e, RunError::ElementOutOfRange { .. }), "{e:?}");
    }

    fn random_mxm(seed: u64, m: usize, n: usize, l: usize) -> (StreamArray, StreamArray) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |len| (0..len).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>();
        (StreamArray::matrix(m, l, gen(m * l)).unwrap(), StreamArray::matrix(l, n, gen(l * n)).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn evaluation_is_deterministic(seed in any::<u64>(), m in 1usize..6, n in 1usize..6, l in 1usize..9) {
            let (a, b) = random_mxm(seed, m, n, l);
            let p = mxm_program(ScalarKind::F32, l).unwrap();
            let g: Stream = grid(&[m, n]).unwrap().into();
            let caps = Bindings::new().bind("A", &a).bind("B", &b);
            for i in 0..m {
                for j in 0..n {
                    let x = eval_element(&p, &[i, j], &[g.clone()], &caps).unwrap();
                    let y = eval_element(&p, &[i, j], &[g.clone()], &caps).unwrap();
                    prop_assert_eq!(x[0].lanes::<f32>()[0].to_bits(), y[0].lanes::<f32>()[0].to_bits());
                }
            }
        }

        #[test]
        fn shuffled_order_matches_backend(seed in any::<u64>(), m in 1usize..6, n in 1usize..6, l in 1usize..9) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            use crate::backend::{Backend, Interpreter};
            let (a, b) = random_mxm(seed, m, n, l);
            let p = mxm_program(ScalarKind::F32, l).unwrap();
            let g: Stream = grid(&[m, n]).unwrap().into();
            let caps = Bindings::new().bind("A", &a).bind("B", &b);
            let whole = Interpreter.run(&p, &[g.clone()], &caps).unwrap().into_single();
            let mut order: Vec<usize> = (0..m * n).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1));
            let mut out = vec![0.0f32; m * n];
            for e in order {
                out[e] = eval_element(&p, &[e / n, e % n], &[g.clone()], &caps).unwrap()[0].lanes::<f32>()[0];
            }
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&out), bits(whole.as_slice::<f32>().unwrap()));
        }
    }
}
