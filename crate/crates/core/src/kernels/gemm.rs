//! `C = A * B` as stream programs.

use super::KernelError;
use crate::array::{grid, Shape, StreamArray};
use crate::backend::Backend;
use crate::ir::{Bindings, Expr, LoopId, LoopSpec, Program, Stmt, Stream, VarId};
use crate::swizzle::{swizzle_array, unswizzle, SwizzledMatrix};
use crate::value::{Real, ScalarKind, Value};

/// `C (m x n) = A (m x l) * B (l x n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmDims {
    pub m: usize,
    pub n: usize,
    pub l: usize,
}

impl GemmDims {
    pub fn new(m: usize, n: usize, l: usize) -> Result<Self, KernelError> {
        if m == 0 || n == 0 || l == 0 {
            return Err(KernelError::Dimension(format!("{m}x{n}x{l}: all dimensions must be positive")));
        }
        Ok(GemmDims { m, n, l })
    }

    pub fn cube(n: usize) -> Result<Self, KernelError> {
        GemmDims::new(n, n, n)
    }

    pub fn flops(&self) -> f64 {
        2.0 * self.m as f64 * self.n as f64 * self.l as f64
    }
}

/// Checks `a` is m x l and `b` is l x n, both width-1 float of one kind.
pub(crate) fn check_operands(a: &StreamArray, b: &StreamArray, dims: GemmDims) -> Result<ScalarKind, KernelError> {
    let kind = a.kind();
    if !kind.is_float() {
        return Err(KernelError::UnsupportedKind(kind));
    }
    if b.kind() != kind {
        return Err(KernelError::ShapeMismatch(format!("A is {kind}, B is {}", b.kind())));
    }
    let want_a = [dims.m, dims.l];
    let want_b = [dims.l, dims.n];
    for (name, arr, want) in [("A", a, want_a), ("B", b, want_b)] {
        if arr.width() != 1 || arr.shape().extents() != want {
            return Err(KernelError::ShapeMismatch(format!(
                "{name} is {:?} of width {}, expected {want:?} of width 1",
                arr.shape().extents(),
                arr.width()
            )));
        }
    }
    Ok(kind)
}

/// The per-element GEMM program: for output `(i, j)`,
/// `c = 0; for k in 0..l { c += A[i, k] * B[k, j] }`.
pub fn mxm_program(kind: ScalarKind, l: usize) -> Result<Program, KernelError> {
    let c = VarId(0);
    let k = LoopId(0);
    let ind = Expr::input(0);
    let term = Expr::gather("A", Expr::index2(ind.clone().component(0), Expr::loop_var(k)))
        * Expr::gather("B", Expr::index2(Expr::loop_var(k), ind.component(1)));
    Ok(Program::builder("mxm")
        .input(ScalarKind::I32, 2)
        .output(kind, 1)
        .capture("A", kind, 1, 2)
        .capture("B", kind, 1, 2)
        .stmt(Stmt::Let(c, Expr::constant(Value::scalar(kind, 0.0))))
        .stmt(Stmt::Loop(LoopSpec::new(k, Expr::int(0), Expr::int(l as i32), vec![Stmt::Accumulate(c, term)])))
        .result(Expr::var(c))
        .build()?)
}

/// One program instance per element of `grid(m, n)`, summing in ascending `k`.
pub fn mod2am_simple(
    a: &StreamArray,
    b: &StreamArray,
    dims: GemmDims,
    backend: &dyn Backend,
) -> Result<StreamArray, KernelError> {
    let kind = check_operands(a, b, dims)?;
    let p = mxm_program(kind, dims.l)?;
    let out = backend.run(&p, &[Stream::Grid(grid(&[dims.m, dims.n])?)], &Bindings::new().bind("A", a).bind("B", b))?;
    Ok(out.into_single())
}

/// Program over `grid(m/4, n/4)`: each element accumulates a 4x4 block of C
/// as four width-4 rows. `A4` and `B4` hold four row-adjacent scalars per value.
fn vec4_program(kind: ScalarKind, l: usize) -> Result<Program, KernelError> {
    let kk = LoopId(0);
    let acc = |r: u32| VarId(r);
    let a_row = |r: u32| VarId(4 + r);
    let b_row = |c: u32| VarId(8 + c);
    let row_base = |r: u32| VarId(12 + r);
    let k_base = VarId(16);

    let ind = Expr::input(0);
    let mut b = Program::builder("mxm4")
        .input(ScalarKind::I32, 2)
        .capture("A4", kind, 4, 2)
        .capture("B4", kind, 4, 2);
    for r in 0..4 {
        b = b
            .output(kind, 4)
            .stmt(Stmt::Let(acc(r), Expr::constant(Value::zero(kind, 4)?)))
            .stmt(Stmt::Let(row_base(r), ind.clone().component(0) * Expr::int(4) + Expr::int(r as i32)));
    }
    let mut body = vec![Stmt::Let(k_base, Expr::loop_var(kk) * Expr::int(4))];
    for r in 0..4 {
        body.push(Stmt::Let(a_row(r), Expr::gather("A4", Expr::index2(Expr::var(row_base(r)), Expr::loop_var(kk)))));
    }
    for c in 0..4 {
        let k_row = Expr::var(k_base) + Expr::int(c as i32);
        body.push(Stmt::Let(b_row(c), Expr::gather("B4", Expr::index2(k_row, ind.clone().component(1)))));
    }
    for r in 0..4 {
        for c in 0..4 {
            body.push(Stmt::Accumulate(acc(r), Expr::var(a_row(r)).component(c as usize) * Expr::var(b_row(c))));
        }
    }
    b = b.stmt(Stmt::Loop(LoopSpec::new(kk, Expr::int(0), Expr::int((l / 4) as i32), body)));
    for r in 0..4 {
        b = b.result(Expr::var(acc(r)));
    }
    Ok(b.build()?)
}

/// GEMM on width-4 values: 4x4 submatrices multiplied and accumulated.
/// Requires m, n and l to be multiples of 4.
pub fn mod2am_vec4(
    a: &StreamArray,
    b: &StreamArray,
    dims: GemmDims,
    backend: &dyn Backend,
) -> Result<StreamArray, KernelError> {
    let kind = check_operands(a, b, dims)?;
    if dims.m % 4 != 0 || dims.n % 4 != 0 || dims.l % 4 != 0 {
        return Err(KernelError::Dimension(format!(
            "{}x{}x{}: vec4 GEMM needs multiples of 4",
            dims.m, dims.n, dims.l
        )));
    }
    // Row-major m x l scalars are exactly m x (l/4) row-packed width-4 values.
    let a4 = StreamArray::from_storage(Shape::d2(dims.m, dims.l / 4)?, 4, a.storage().clone())?;
    let b4 = StreamArray::from_storage(Shape::d2(dims.l, dims.n / 4)?, 4, b.storage().clone())?;
    let p = vec4_program(kind, dims.l)?;
    let (mb, nb) = (dims.m / 4, dims.n / 4);
    let out = backend.run(&p, &[Stream::Grid(grid(&[mb, nb])?)], &Bindings::new().bind("A4", &a4).bind("B4", &b4))?;
    match kind {
        ScalarKind::F32 => unpack_vec4::<f32>(&out.outputs, dims),
        ScalarKind::F64 => unpack_vec4::<f64>(&out.outputs, dims),
        ScalarKind::I32 => Err(KernelError::UnsupportedKind(kind)),
    }
}

fn unpack_vec4<T: Real>(rows: &[StreamArray], dims: GemmDims) -> Result<StreamArray, KernelError> {
    let nb = dims.n / 4;
    let mut c = vec![T::ZERO; dims.m * dims.n];
    for (r, out) in rows.iter().enumerate() {
        let src = out.try_slice::<T>()?;
        for (e, lanes) in src.chunks_exact(4).enumerate() {
            let (bi, bj) = (e / nb, e % nb);
            let dst = (4 * bi + r) * dims.n + 4 * bj;
            c[dst..dst + 4].copy_from_slice(lanes);
        }
    }
    Ok(StreamArray::matrix(dims.m, dims.n, c)?)
}

/// Block microkernel: `C_blk + A_blk * B_blk` over `grid(block, block)`.
fn block_program(kind: ScalarKind, block: usize) -> Result<Program, KernelError> {
    let acc = VarId(0);
    let k = LoopId(0);
    let ind = Expr::input(0);
    let term = Expr::gather("a", Expr::index2(ind.clone().component(0), Expr::loop_var(k)))
        * Expr::gather("b", Expr::index2(Expr::loop_var(k), ind.clone().component(1)));
    Ok(Program::builder("block_mxm")
        .input(ScalarKind::I32, 2)
        .output(kind, 1)
        .capture("a", kind, 1, 2)
        .capture("b", kind, 1, 2)
        .capture("c", kind, 1, 2)
        .stmt(Stmt::Let(acc, Expr::gather("c", ind)))
        .stmt(Stmt::Loop(LoopSpec::new(k, Expr::int(0), Expr::int(block as i32), vec![Stmt::Accumulate(acc, term)])))
        .result(Expr::var(acc))
        .build()?)
}

/// Cache-blocked GEMM over block-swizzled operands (zero-padded to multiples
/// of `block`).
///
/// For each output block the `(A, B)` block pairs along the inner dimension
/// flow through two staging slots: while the microkernel program runs on one
/// slot, a helper thread copies the next pair into the other.
pub fn mod2am_blocked(
    a: &StreamArray,
    b: &StreamArray,
    dims: GemmDims,
    backend: &dyn Backend,
    block: usize,
) -> Result<StreamArray, KernelError> {
    let kind = check_operands(a, b, dims)?;
    if block == 0 {
        return Err(KernelError::Dimension("block edge must be positive".into()));
    }
    match kind {
        ScalarKind::F32 => blocked::<f32>(a, b, dims, backend, block),
        ScalarKind::F64 => blocked::<f64>(a, b, dims, backend, block),
        ScalarKind::I32 => Err(KernelError::UnsupportedKind(kind)),
    }
}

struct Slot {
    a: StreamArray,
    b: StreamArray,
}

impl Slot {
    fn new<T: Real>(block: usize) -> Result<Self, KernelError> {
        let z = || StreamArray::matrix(block, block, vec![T::ZERO; block * block]);
        Ok(Slot { a: z()?, b: z()? })
    }

    fn stage<T: Real>(&mut self, a: &[T], b: &[T]) {
        self.a.as_mut_slice::<T>().expect("slot kind").copy_from_slice(a);
        self.b.as_mut_slice::<T>().expect("slot kind").copy_from_slice(b);
    }
}

fn blocked<T: Real>(
    a: &StreamArray,
    b: &StreamArray,
    dims: GemmDims,
    backend: &dyn Backend,
    block: usize,
) -> Result<StreamArray, KernelError> {
    let sa: SwizzledMatrix<T> = swizzle_array(a, block)?;
    let sb: SwizzledMatrix<T> = swizzle_array(b, block)?;
    let mut sc = SwizzledMatrix::<T>::zeros(dims.m, dims.n, block)?;
    let (mb, lb) = sa.block_grid();
    let nb = sb.block_grid().1;

    let program = block_program(T::KIND, block)?;
    let tile = grid(&[block, block])?;
    let mut slots = [Slot::new::<T>(block)?, Slot::new::<T>(block)?];

    for bi in 0..mb {
        for bj in 0..nb {
            let mut c_blk = StreamArray::matrix(block, block, vec![T::ZERO; block * block])?;
            slots[0].stage(sa.block_data(bi, 0), sb.block_data(0, bj));
            for kb in 0..lb {
                let (lo, hi) = slots.split_at_mut(1);
                let (cur, next) = if kb % 2 == 0 { (&lo[0], &mut hi[0]) } else { (&hi[0], &mut lo[0]) };
                let captures = Bindings::new().bind("a", &cur.a).bind("b", &cur.b).bind("c", &c_blk);
                let result = std::thread::scope(|s| {
                    if kb + 1 < lb {
                        s.spawn(|| next.stage(sa.block_data(bi, kb + 1), sb.block_data(kb + 1, bj)));
                    }
                    backend.run(&program, &[Stream::Grid(tile)], &captures)
                })?;
                c_blk = result.into_single();
            }
            sc.block_data_mut(bi, bj).copy_from_slice(c_blk.try_slice::<T>()?);
        }
    }
    Ok(StreamArray::matrix(dims.m, dims.n, unswizzle(&sc))?)
}
