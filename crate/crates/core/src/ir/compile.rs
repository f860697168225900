//! Lowers a validated [`Program`] bound to concrete arrays into a tree of
//! closures. Slices of the bound arrays are captured directly, scalar reads of
//! registers are resolved at compile time, and `acc += a * b` is fused.
//!
//! Fusion never changes results: every fused form performs the same IEEE
//! operations, in the same order, as the unfused statements.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

use super::{ArithOp, CaptureDecl, Expr, LoopId, LoopSpec, Program, Stmt, Stream, VarId};
use crate::array::{Shape, StreamArray};
use crate::value::{Element, ScalarKind, Storage, Ty, Value, MAX_WIDTH};

/// Runtime failure while evaluating one element.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultKind {
    #[error("gather into `{capture}` at {index:?} outside extents {extents:?}")]
    IndexOutOfBounds { capture: String, index: Vec<i64>, extents: Vec<usize> },
    #[error("integer division by zero")]
    DivisionByZero,
}

/// Boxed [`FaultKind`], kept pointer-sized so the hot path stays cheap.
#[derive(Clone, PartialEq)]
pub struct Fault(Box<FaultKind>);

impl Fault {
    fn new(kind: FaultKind) -> Self {
        Fault(Box::new(kind))
    }

    pub fn kind(&self) -> &FaultKind {
        &self.0
    }

    pub fn into_kind(self) -> FaultKind {
        *self.0
    }
}

impl fmt::Debug for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Per-worker register file: one 4-lane register per input, variable and
/// loop counter, split by scalar kind.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    f32s: Vec<[f32; MAX_WIDTH]>,
    f64s: Vec<[f64; MAX_WIDTH]>,
    i32s: Vec<[i32; MAX_WIDTH]>,
}

pub(crate) trait Num: Element {
    fn regs(f: &Frame) -> &[[Self; MAX_WIDTH]];
    fn regs_mut(f: &mut Frame) -> &mut [[Self; MAX_WIDTH]];
    fn add(a: Self, b: Self) -> Self;
    fn sub(a: Self, b: Self) -> Self;
    fn mul(a: Self, b: Self) -> Self;
    fn div(a: Self, b: Self) -> Result<Self, Fault>;
    fn fma(a: Self, b: Self, c: Self) -> Self;
}

macro_rules! impl_float_num {
    ($t:ty, $field:ident) => {
        impl Num for $t {
            #[inline(always)]
            fn regs(f: &Frame) -> &[[Self; MAX_WIDTH]] {
                &f.$field
            }
            #[inline(always)]
            fn regs_mut(f: &mut Frame) -> &mut [[Self; MAX_WIDTH]] {
                &mut f.$field
            }
            #[inline(always)]
            fn add(a: Self, b: Self) -> Self {
                a + b
            }
            #[inline(always)]
            fn sub(a: Self, b: Self) -> Self {
                a - b
            }
            #[inline(always)]
            fn mul(a: Self, b: Self) -> Self {
                a * b
            }
            #[inline(always)]
            fn div(a: Self, b: Self) -> Result<Self, Fault> {
                Ok(a / b)
            }
            #[inline(always)]
            fn fma(a: Self, b: Self, c: Self) -> Self {
                a.mul_add(b, c)
            }
        }
    };
}

impl_float_num!(f32, f32s);
impl_float_num!(f64, f64s);

impl Num for i32 {
    #[inline(always)]
    fn regs(f: &Frame) -> &[[Self; MAX_WIDTH]] {
        &f.i32s
    }
    #[inline(always)]
    fn regs_mut(f: &mut Frame) -> &mut [[Self; MAX_WIDTH]] {
        &mut f.i32s
    }
    #[inline(always)]
    fn add(a: Self, b: Self) -> Self {
        a.wrapping_add(b)
    }
    #[inline(always)]
    fn sub(a: Self, b: Self) -> Self {
        a.wrapping_sub(b)
    }
    #[inline(always)]
    fn mul(a: Self, b: Self) -> Self {
        a.wrapping_mul(b)
    }
    #[inline(always)]
    fn div(a: Self, b: Self) -> Result<Self, Fault> {
        if b == 0 {
            Err(Fault::new(FaultKind::DivisionByZero))
        } else {
            Ok(a.wrapping_div(b))
        }
    }
    #[inline(always)]
    fn fma(a: Self, b: Self, c: Self) -> Self {
        a.wrapping_mul(b).wrapping_add(c)
    }
}

type Lanes<T> = [T; MAX_WIDTH];
type Node<'a, T> = Box<dyn Fn(&Frame) -> Result<Lanes<T>, Fault> + Send + Sync + 'a>;
type StmtFn<'a> = Box<dyn Fn(&mut Frame) -> Result<(), Fault> + Send + Sync + 'a>;

/// Scalar operand: constant, register lane, or a computed lane.
enum Leaf<'a, T> {
    Const(T),
    Reg(usize, usize),
    Node(Node<'a, T>, usize),
}

impl<T: Num> Leaf<'_, T> {
    #[inline(always)]
    fn eval(&self, f: &Frame) -> Result<T, Fault> {
        match self {
            Leaf::Const(c) => Ok(*c),
            Leaf::Reg(s, l) => Ok(T::regs(f)[*s][*l]),
            Leaf::Node(n, l) => Ok(n(f)?[*l]),
        }
    }
}

/// Arithmetic operand; scalars are splatted across lanes.
enum Operand<'a, T> {
    Scalar(Leaf<'a, T>),
    Reg(usize),
    Node(Node<'a, T>),
}

impl<T: Num> Operand<'_, T> {
    #[inline(always)]
    fn eval(&self, f: &Frame) -> Result<Lanes<T>, Fault> {
        match self {
            Operand::Scalar(l) => Ok([l.eval(f)?; MAX_WIDTH]),
            Operand::Reg(s) => Ok(T::regs(f)[*s]),
            Operand::Node(n) => n(f),
        }
    }
}

/// Index part of a strided gather.
enum Part<'a> {
    Counter,
    Fixed(Leaf<'a, i32>),
}

/// Width-1 gather whose offset is affine in the loop counter. Rank-1 arrays
/// are treated as a single column.
struct Strided<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
    row: Part<'a>,
    col: Part<'a>,
}

impl<T> Strided<'_, T> {
    /// Offset at `lo` and per-iteration stride, or `None` if some iteration
    /// in `lo..hi` would index outside the array.
    #[inline]
    fn plan(&self, f: &Frame, lo: i32, hi: i32) -> Option<(usize, usize)> {
        let at = |p: &Part, k: i32| -> i32 {
            match p {
                Part::Counter => k,
                Part::Fixed(Leaf::Const(c)) => *c,
                Part::Fixed(Leaf::Reg(s, l)) => f.i32s[*s][*l],
                Part::Fixed(Leaf::Node(..)) => unreachable!("strided parts are constants or registers"),
            }
        };
        let ok = |i: i32, n: usize| (i as u32 as usize) < n;
        let (r0, r1, c0, c1) = (at(&self.row, lo), at(&self.row, hi - 1), at(&self.col, lo), at(&self.col, hi - 1));
        if !(ok(r0, self.rows) && ok(r1, self.rows) && ok(c0, self.cols) && ok(c1, self.cols)) {
            return None;
        }
        let stride = usize::from(matches!(self.row, Part::Counter)) * self.cols + usize::from(matches!(self.col, Part::Counter));
        Some((r0 as usize * self.cols + c0 as usize, stride))
    }
}

#[inline(always)]
fn read_lanes<T: Copy + Default>(data: &[T], off: usize, w: usize) -> Lanes<T> {
    let mut o = [T::default(); MAX_WIDTH];
    if w == 1 {
        o[0] = data[off];
    } else {
        o[..w].copy_from_slice(&data[off..off + w]);
    }
    o
}

#[cold]
fn out_of_bounds(name: &str, index: &[i32], extents: &[usize]) -> Fault {
    Fault::new(FaultKind::IndexOutOfBounds {
        capture: name.to_string(),
        index: index.iter().map(|&i| i as i64).collect(),
        extents: extents.to_vec(),
    })
}

enum Feed<'a> {
    Grid { slot: usize },
    F32 { data: &'a [f32], width: usize, slot: usize },
    F64 { data: &'a [f64], width: usize, slot: usize },
    I32 { data: &'a [i32], width: usize, slot: usize },
}

enum ResultFn<'a> {
    F32(Node<'a, f32>, usize),
    F64(Node<'a, f64>, usize),
    I32(Node<'a, i32>, usize),
}

/// Mutable view of one output buffer (or a chunk of it).
#[derive(Debug)]
pub(crate) enum OutBuf<'b> {
    F32(&'b mut [f32]),
    F64(&'b mut [f64]),
    I32(&'b mut [i32]),
}

impl<'b> OutBuf<'b> {
    pub(crate) fn of(storage: &'b mut Storage) -> Self {
        match storage {
            Storage::F32(v) => OutBuf::F32(v),
            Storage::F64(v) => OutBuf::F64(v),
            Storage::I32(v) => OutBuf::I32(v),
        }
    }

    /// Splits at scalar offset `mid`.
    pub(crate) fn split_at(self, mid: usize) -> (OutBuf<'b>, OutBuf<'b>) {
        match self {
            OutBuf::F32(v) => {
                let (a, b) = v.split_at_mut(mid);
                (OutBuf::F32(a), OutBuf::F32(b))
            }
            OutBuf::F64(v) => {
                let (a, b) = v.split_at_mut(mid);
                (OutBuf::F64(a), OutBuf::F64(b))
            }
            OutBuf::I32(v) => {
                let (a, b) = v.split_at_mut(mid);
                (OutBuf::I32(a), OutBuf::I32(b))
            }
        }
    }
}

/// A program compiled against one call's arrays.
pub(crate) struct Kernel<'a> {
    feeds: Vec<Feed<'a>>,
    body: Vec<StmtFn<'a>>,
    results: Vec<ResultFn<'a>>,
    counts: [usize; 3],
    shape: Shape,
}

struct Ctx<'a> {
    inputs: Vec<(Ty, usize)>,
    vars: HashMap<VarId, (Ty, usize)>,
    loops: HashMap<LoopId, usize>,
    captures: HashMap<&'a str, (&'a CaptureDecl, &'a StreamArray)>,
    checked: bool,
}

fn kind_index(k: ScalarKind) -> usize {
    match k {
        ScalarKind::F32 => 0,
        ScalarKind::F64 => 1,
        ScalarKind::I32 => 2,
    }
}

impl<'a> Kernel<'a> {
    /// `checked` enables bounds checks on gathers. With it off, an index
    /// outside the array's extents but inside its storage reads the wrong
    /// element silently; one outside storage panics.
    pub(crate) fn compile(
        program: &'a Program,
        inputs: &[Stream<'a>],
        captures: &[&'a StreamArray],
        shape: Shape,
        checked: bool,
    ) -> Kernel<'a> {
        let mut counts = [0usize; 3];
        let mut alloc = |k: ScalarKind| {
            let c = &mut counts[kind_index(k)];
            *c += 1;
            *c - 1
        };
        let input_slots: Vec<(Ty, usize)> = program.inputs().iter().map(|t| (*t, alloc(t.kind))).collect();
        let vars = program.vars().iter().map(|(v, t)| (*v, (*t, alloc(t.kind)))).collect();
        let loops = program.loops().iter().map(|l| (*l, alloc(ScalarKind::I32))).collect();
        let captures = program
            .captures()
            .iter()
            .zip(captures)
            .map(|(d, a)| (d.name.as_str(), (d, *a)))
            .collect();
        let ctx = Ctx { inputs: input_slots, vars, loops, captures, checked };

        let feeds = inputs
            .iter()
            .zip(&ctx.inputs)
            .map(|(s, (ty, slot))| match s {
                Stream::Grid(_) => Feed::Grid { slot: *slot },
                Stream::Array(a) => match a.storage() {
                    Storage::F32(d) => Feed::F32 { data: d, width: ty.width, slot: *slot },
                    Storage::F64(d) => Feed::F64 { data: d, width: ty.width, slot: *slot },
                    Storage::I32(d) => Feed::I32 { data: d, width: ty.width, slot: *slot },
                },
            })
            .collect();
        let body = program.body().iter().map(|s| ctx.stmt(s)).collect();
        let results = program
            .results()
            .iter()
            .zip(program.outputs())
            .map(|(e, t)| match t.kind {
                ScalarKind::F32 => ResultFn::F32(ctx.node(e), t.width),
                ScalarKind::F64 => ResultFn::F64(ctx.node(e), t.width),
                ScalarKind::I32 => ResultFn::I32(ctx.node(e), t.width),
            })
            .collect();
        Kernel { feeds, body, results, counts, shape }
    }

    /// Number of output elements.
    pub(crate) fn len(&self) -> usize {
        self.shape.element_count()
    }

    pub(crate) fn new_frame(&self) -> Frame {
        Frame {
            f32s: vec![[0.0; MAX_WIDTH]; self.counts[0]],
            f64s: vec![[0.0; MAX_WIDTH]; self.counts[1]],
            i32s: vec![[0; MAX_WIDTH]; self.counts[2]],
        }
    }

    #[inline]
    fn run_body(&self, f: &mut Frame, e: usize) -> Result<(), Fault> {
        for feed in &self.feeds {
            match *feed {
                Feed::Grid { slot } => {
                    let [i, j] = self.shape.unravel(e);
                    f.i32s[slot] = [i as i32, j as i32, 0, 0];
                }
                Feed::F32 { data, width, slot } => f.f32s[slot] = read_lanes(data, e * width, width),
                Feed::F64 { data, width, slot } => f.f64s[slot] = read_lanes(data, e * width, width),
                Feed::I32 { data, width, slot } => f.i32s[slot] = read_lanes(data, e * width, width),
            }
        }
        for s in &self.body {
            s(f)?;
        }
        Ok(())
    }

    /// Evaluates element `e` and stores its outputs at chunk-local element `local`.
    #[inline]
    pub(crate) fn eval_into(&self, f: &mut Frame, e: usize, outs: &mut [OutBuf<'_>], local: usize) -> Result<(), Fault> {
        self.run_body(f, e)?;
        for (r, out) in self.results.iter().zip(outs.iter_mut()) {
            match (r, out) {
                (ResultFn::F32(n, w), OutBuf::F32(o)) => o[local * w..(local + 1) * w].copy_from_slice(&n(f)?[..*w]),
                (ResultFn::F64(n, w), OutBuf::F64(o)) => o[local * w..(local + 1) * w].copy_from_slice(&n(f)?[..*w]),
                (ResultFn::I32(n, w), OutBuf::I32(o)) => o[local * w..(local + 1) * w].copy_from_slice(&n(f)?[..*w]),
                _ => unreachable!("output buffers are allocated from the signature"),
            }
        }
        Ok(())
    }

    pub(crate) fn eval_values(&self, f: &mut Frame, e: usize) -> Result<Vec<Value>, Fault> {
        self.run_body(f, e)?;
        self.results
            .iter()
            .map(|r| {
                Ok(match r {
                    ResultFn::F32(n, w) => Value::from_lanes(&n(f)?[..*w]),
                    ResultFn::F64(n, w) => Value::from_lanes(&n(f)?[..*w]),
                    ResultFn::I32(n, w) => Value::from_lanes(&n(f)?[..*w]),
                })
            })
            .collect()
    }

    /// Evaluates a contiguous range of elements into chunk buffers that start
    /// at `range.start`. Stops at the first failing element.
    pub(crate) fn run_range(&self, range: Range<usize>, outs: &mut [OutBuf<'_>]) -> Result<(), (usize, Fault)> {
        let mut frame = self.new_frame();
        for (local, e) in range.enumerate() {
            self.eval_into(&mut frame, e, outs, local).map_err(|fault| (e, fault))?;
        }
        Ok(())
    }
}

impl<'a> Ctx<'a> {
    fn reg(&self, e: &Expr) -> Option<(Ty, usize)> {
        match e {
            Expr::Input(s) => Some(self.inputs[*s]),
            Expr::Var(v) => Some(self.vars[v]),
            Expr::LoopVar(l) => Some((Ty::new(ScalarKind::I32, 1), self.loops[l])),
            _ => None,
        }
    }

    fn ty(&self, e: &Expr) -> Ty {
        match e {
            Expr::Const(v) => v.ty(),
            Expr::Input(_) | Expr::Var(_) | Expr::LoopVar(_) => self.reg(e).expect("register expression").0,
            Expr::Gather { capture, .. } => self.captures[capture.as_str()].0.elem,
            Expr::Component(inner, _) => Ty::new(self.ty(inner).kind, 1),
            Expr::Pack(parts) => Ty::new(self.ty(&parts[0]).kind, parts.len()),
            Expr::Arith(_, args) => {
                let tys: Vec<Ty> = args.iter().map(|a| self.ty(a)).collect();
                Ty::new(tys[0].kind, tys.iter().map(|t| t.width).max().unwrap_or(1))
            }
        }
    }

    fn leaf<T: Num>(&self, e: &Expr) -> Leaf<'a, T> {
        match e {
            Expr::Const(v) => Leaf::Const(v.lanes::<T>()[0]),
            Expr::Input(_) | Expr::Var(_) | Expr::LoopVar(_) => Leaf::Reg(self.reg(e).expect("register").1, 0),
            Expr::Component(inner, i) => match (self.reg(inner), &**inner) {
                (Some((_, slot)), _) => Leaf::Reg(slot, *i),
                (None, Expr::Const(v)) => Leaf::Const(v.lanes::<T>()[*i]),
                (None, _) => Leaf::Node(self.node(inner), *i),
            },
            _ => Leaf::Node(self.node(e), 0),
        }
    }

    fn operand<T: Num>(&self, e: &Expr) -> Operand<'a, T> {
        if self.ty(e).width == 1 {
            return Operand::Scalar(self.leaf(e));
        }
        match self.reg(e) {
            Some((_, slot)) => Operand::Reg(slot),
            None => Operand::Node(self.node(e)),
        }
    }

    fn node<T: Num>(&self, e: &Expr) -> Node<'a, T> {
        match e {
            Expr::Const(v) => {
                let l = v.lanes::<T>();
                Box::new(move |_| Ok(l))
            }
            Expr::Input(_) | Expr::Var(_) | Expr::LoopVar(_) => {
                let slot = self.reg(e).expect("register").1;
                Box::new(move |f| Ok(T::regs(f)[slot]))
            }
            Expr::Component(..) => {
                let leaf = self.leaf::<T>(e);
                Box::new(move |f| {
                    let mut o = [T::default(); MAX_WIDTH];
                    o[0] = leaf.eval(f)?;
                    Ok(o)
                })
            }
            Expr::Pack(parts) => {
                let leaves: Vec<Leaf<'a, T>> = parts.iter().map(|p| self.leaf(p)).collect();
                Box::new(move |f| {
                    let mut o = [T::default(); MAX_WIDTH];
                    for (dst, l) in o.iter_mut().zip(&leaves) {
                        *dst = l.eval(f)?;
                    }
                    Ok(o)
                })
            }
            Expr::Gather { capture, index } => self.gather(capture, index),
            Expr::Arith(op, args) => self.arith(*op, args, self.ty(e).width),
        }
    }

    fn gather<T: Num>(&self, capture: &str, index: &Expr) -> Node<'a, T> {
        let (decl, arr) = self.captures[capture];
        let data: &'a [T] = arr.as_slice::<T>().expect("capture kind checked at call");
        let w = decl.elem.width;
        let name: &'a str = &decl.name;
        let checked = self.checked;
        let shape = arr.shape();
        let ext = shape.extents();
        if decl.rank == 1 {
            let n = ext[0];
            let idx = self.leaf::<i32>(index);
            return Box::new(move |f| {
                let i = idx.eval(f)?;
                if checked && i as u32 as usize >= n {
                    return Err(out_of_bounds(name, &[i], &[n]));
                }
                Ok(read_lanes(data, (i as usize).wrapping_mul(w), w))
            });
        }
        let (rows, cols) = (ext[0], ext[1]);
        let offset = move |i: i32, j: i32| -> Result<usize, Fault> {
            if checked && (i as u32 as usize >= rows || j as u32 as usize >= cols) {
                return Err(out_of_bounds(name, &[i, j], &[rows, cols]));
            }
            Ok((i as usize).wrapping_mul(cols).wrapping_add(j as usize).wrapping_mul(w))
        };
        match index {
            Expr::Pack(parts) => {
                let (li, lj) = (self.leaf::<i32>(&parts[0]), self.leaf::<i32>(&parts[1]));
                Box::new(move |f| {
                    let off = offset(li.eval(f)?, lj.eval(f)?)?;
                    Ok(read_lanes(data, off, w))
                })
            }
            _ => {
                let n = self.node::<i32>(index);
                Box::new(move |f| {
                    let ij = n(f)?;
                    let off = offset(ij[0], ij[1])?;
                    Ok(read_lanes(data, off, w))
                })
            }
        }
    }

    fn arith<T: Num>(&self, op: ArithOp, args: &[Expr], w: usize) -> Node<'a, T> {
        let a = self.operand::<T>(&args[0]);
        let b = self.operand::<T>(&args[1]);
        fn lanewise<'a, T, F>(a: Operand<'a, T>, b: Operand<'a, T>, w: usize, op: F) -> Node<'a, T>
        where
            T: Num,
            F: Fn(T, T) -> T + Send + Sync + 'a,
        {
            Box::new(move |f| {
                let (x, y) = (a.eval(f)?, b.eval(f)?);
                let mut o = [T::default(); MAX_WIDTH];
                for k in 0..w {
                    o[k] = op(x[k], y[k]);
                }
                Ok(o)
            })
        }
        match op {
            ArithOp::Add => lanewise(a, b, w, T::add),
            ArithOp::Sub => lanewise(a, b, w, T::sub),
            ArithOp::Mul => lanewise(a, b, w, T::mul),
            ArithOp::Div => Box::new(move |f| {
                let (x, y) = (a.eval(f)?, b.eval(f)?);
                let mut o = [T::default(); MAX_WIDTH];
                for k in 0..w {
                    o[k] = T::div(x[k], y[k])?;
                }
                Ok(o)
            }),
            ArithOp::Fma => {
                let c = self.operand::<T>(&args[2]);
                Box::new(move |f| {
                    let (x, y, z) = (a.eval(f)?, b.eval(f)?, c.eval(f)?);
                    let mut o = [T::default(); MAX_WIDTH];
                    for k in 0..w {
                        o[k] = T::fma(x[k], y[k], z[k]);
                    }
                    Ok(o)
                })
            }
        }
    }

    fn stmt(&self, s: &Stmt) -> StmtFn<'a> {
        match s {
            Stmt::Let(v, e) => {
                let (ty, slot) = self.vars[v];
                match ty.kind {
                    ScalarKind::F32 => self.let_stmt::<f32>(slot, e),
                    ScalarKind::F64 => self.let_stmt::<f64>(slot, e),
                    ScalarKind::I32 => self.let_stmt::<i32>(slot, e),
                }
            }
            Stmt::Accumulate(v, e) => {
                let (ty, slot) = self.vars[v];
                match ty.kind {
                    ScalarKind::F32 => self.accumulate::<f32>(slot, ty.width, e),
                    ScalarKind::F64 => self.accumulate::<f64>(slot, ty.width, e),
                    ScalarKind::I32 => self.accumulate::<i32>(slot, ty.width, e),
                }
            }
            Stmt::Loop(l) => {
                if let Some(fast) = self.strided_dot(l) {
                    return fast;
                }
                self.generic_loop(l)
            }
        }
    }

    fn generic_loop(&self, l: &LoopSpec) -> StmtFn<'a> {
        {
            {
                let slot = self.loops[&l.var];
                let init = self.leaf::<i32>(&l.init);
                let bound = self.leaf::<i32>(&l.bound);
                let mut body: Vec<StmtFn<'a>> = l.body.iter().map(|s| self.stmt(s)).collect();
                if body.len() == 1 {
                    let only = body.pop().expect("one statement");
                    return Box::new(move |f| {
                        let (lo, hi) = (init.eval(f)?, bound.eval(f)?);
                        for k in lo..hi {
                            f.i32s[slot][0] = k;
                            only(f)?;
                        }
                        Ok(())
                    });
                }
                Box::new(move |f| {
                    let (lo, hi) = (init.eval(f)?, bound.eval(f)?);
                    for k in lo..hi {
                        f.i32s[slot][0] = k;
                        for s in &body {
                            s(f)?;
                        }
                    }
                    Ok(())
                })
            }
        }
    }

    /// `for k in lo..hi { acc += X[..k..] * Y[..k..] }` with scalar `acc`,
    /// width-1 captures, and every other index part a constant or an
    /// unchanging register. Bounds are checked once at the endpoints; if they
    /// fail, the checked per-iteration loop runs instead and reports the fault.
    fn strided_dot(&self, l: &LoopSpec) -> Option<StmtFn<'a>> {
        let [Stmt::Accumulate(acc, Expr::Arith(ArithOp::Mul, args))] = l.body.as_slice() else {
            return None;
        };
        let (ty, slot) = self.vars[acc];
        if ty.width != 1 {
            return None;
        }
        match ty.kind {
            ScalarKind::F32 => self.strided_dot_typed::<f32>(l, slot, args),
            ScalarKind::F64 => self.strided_dot_typed::<f64>(l, slot, args),
            ScalarKind::I32 => self.strided_dot_typed::<i32>(l, slot, args),
        }
    }

    fn strided_dot_typed<T: Num>(&self, l: &LoopSpec, slot: usize, args: &[Expr]) -> Option<StmtFn<'a>> {
        let x = self.strided::<T>(&args[0], l.var)?;
        let y = self.strided::<T>(&args[1], l.var)?;
        let init = self.leaf::<i32>(&l.init);
        let bound = self.leaf::<i32>(&l.bound);
        let fallback = self.generic_loop(l);
        Some(Box::new(move |f| {
            let (lo, hi) = (init.eval(f)?, bound.eval(f)?);
            if lo >= hi {
                return Ok(());
            }
            let (Some((ox, sx)), Some((oy, sy))) = (x.plan(f, lo, hi), y.plan(f, lo, hi)) else {
                return fallback(f);
            };
            let mut acc = T::regs(f)[slot][0];
            for t in 0..(hi - lo) as usize {
                acc = T::add(acc, T::mul(x.data[ox + sx * t], y.data[oy + sy * t]));
            }
            T::regs_mut(f)[slot][0] = acc;
            Ok(())
        }))
    }

    fn strided<T: Num>(&self, e: &Expr, counter: LoopId) -> Option<Strided<'a, T>> {
        let Expr::Gather { capture, index } = e else {
            return None;
        };
        let (decl, arr) = self.captures[capture.as_str()];
        if decl.elem.width != 1 {
            return None;
        }
        let part = |p: &Expr| -> Option<Part> {
            match p {
                Expr::LoopVar(v) if *v == counter => Some(Part::Counter),
                Expr::Const(v) => Some(Part::Fixed(Leaf::Const(v.lanes::<i32>()[0]))),
                Expr::Input(_) | Expr::LoopVar(_) => Some(Part::Fixed(Leaf::Reg(self.reg(p)?.1, 0))),
                Expr::Component(inner, i) => match &**inner {
                    Expr::Input(_) => Some(Part::Fixed(Leaf::Reg(self.reg(inner)?.1, *i))),
                    Expr::LoopVar(v) if *v != counter => Some(Part::Fixed(Leaf::Reg(self.reg(inner)?.1, *i))),
                    _ => None,
                },
                _ => None,
            }
        };
        let shape = arr.shape();
        let (row, col) = match (decl.rank, &**index) {
            (1, p) => (part(p)?, Part::Fixed(Leaf::Const(0))),
            (2, Expr::Pack(parts)) => (part(&parts[0])?, part(&parts[1])?),
            _ => return None,
        };
        let ext = shape.extents();
        Some(Strided {
            data: arr.as_slice::<T>()?,
            rows: ext[0],
            cols: if decl.rank == 2 { ext[1] } else { 1 },
            row,
            col,
        })
    }

    fn let_stmt<T: Num>(&self, slot: usize, e: &Expr) -> StmtFn<'a> {
        let n = self.node::<T>(e);
        Box::new(move |f| {
            let x = n(f)?;
            T::regs_mut(f)[slot] = x;
            Ok(())
        })
    }

    fn accumulate<T: Num>(&self, slot: usize, w: usize, e: &Expr) -> StmtFn<'a> {
        if let Expr::Arith(ArithOp::Mul, args) = e {
            let a = self.operand::<T>(&args[0]);
            let b = self.operand::<T>(&args[1]);
            return Box::new(move |f| {
                let (x, y) = (a.eval(f)?, b.eval(f)?);
                let r = &mut T::regs_mut(f)[slot];
                for k in 0..w {
                    r[k] = T::add(r[k], T::mul(x[k], y[k]));
                }
                Ok(())
            });
        }
        let a = self.operand::<T>(e);
        Box::new(move |f| {
            let x = a.eval(f)?;
            let r = &mut T::regs_mut(f)[slot];
            for k in 0..w {
                r[k] = T::add(r[k], x[k]);
            }
            Ok(())
        })
    }
}
