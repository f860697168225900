//! Stream program IR: pure per-element expression graphs with gathers from
//! captured arrays and a counted loop.
//!
//! A [`Program`] is built once, type-checked, and then executed element by
//! element over the common shape of its input streams. Each element reads its
//! inputs and any captured array, and writes only its own outputs.

mod call;
mod check;
pub(crate) mod compile;

use std::ops;

use thiserror::Error;

use crate::value::{ScalarKind, Ty, Value};

pub use call::{eval_element, validate_call, Bindings, CallError, CallPlan, Stream};
pub use compile::{Fault, FaultKind};

/// Program-local variable (accumulator or temporary).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

/// Counter of a [`LoopSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoopId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    /// `a * b + c`, single rounding.
    Fma,
}

impl ArithOp {
    pub fn arity(self) -> usize {
        match self {
            ArithOp::Fma => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Value),
    /// Current element of input stream `slot`.
    Input(usize),
    LoopVar(LoopId),
    Var(VarId),
    /// Bounds-checked read from a captured array; the index is an integer
    /// value whose width equals the array's rank (row first).
    Gather { capture: String, index: Box<Expr> },
    Component(Box<Expr>, usize),
    /// Builds a value from 1..=4 scalars of one kind (`Value2i(a, b)`).
    Pack(Vec<Expr>),
    Arith(ArithOp, Vec<Expr>),
}

impl Expr {
    pub fn constant(v: Value) -> Self {
        Expr::Const(v)
    }

    pub fn input(slot: usize) -> Self {
        Expr::Input(slot)
    }

    pub fn var(v: VarId) -> Self {
        Expr::Var(v)
    }

    pub fn loop_var(l: LoopId) -> Self {
        Expr::LoopVar(l)
    }

    pub fn int(x: i32) -> Self {
        Expr::Const(Value::i32(x))
    }

    pub fn gather(capture: impl Into<String>, index: Expr) -> Self {
        Expr::Gather { capture: capture.into(), index: Box::new(index) }
    }

    pub fn component(self, i: usize) -> Self {
        Expr::Component(Box::new(self), i)
    }

    pub fn index2(row: Expr, col: Expr) -> Self {
        Expr::Pack(vec![row, col])
    }

    pub fn pack(parts: Vec<Expr>) -> Self {
        Expr::Pack(parts)
    }

    pub fn fma(a: Expr, b: Expr, c: Expr) -> Self {
        Expr::Arith(ArithOp::Fma, vec![a, b, c])
    }

    /// True if the expression reads any program variable.
    pub fn reads_vars(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Const(_) | Expr::Input(_) | Expr::LoopVar(_) => false,
            Expr::Gather { index, .. } => index.reads_vars(),
            Expr::Component(e, _) => e.reads_vars(),
            Expr::Pack(es) | Expr::Arith(_, es) => es.iter().any(Expr::reads_vars),
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $method:ident, $op:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;

            fn $method(self, rhs: Expr) -> Expr {
                Expr::Arith(ArithOp::$op, vec![self, rhs])
            }
        }
    };
}

expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    /// Declares `var` on first use, assigns on later uses.
    Let(VarId, Expr),
    /// `var += expr`; a scalar expr broadcasts over a wider variable.
    Accumulate(VarId, Expr),
    Loop(LoopSpec),
}

/// `for var in init..bound { body }`, step +1. `bound` is exclusive and
/// evaluated once on loop entry; a bound at or below `init` runs zero times.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSpec {
    pub var: LoopId,
    pub init: Expr,
    pub bound: Expr,
    pub body: Vec<Stmt>,
}

impl LoopSpec {
    pub fn new(var: LoopId, init: Expr, bound: Expr, body: Vec<Stmt>) -> Self {
        LoopSpec { var, init, bound, body }
    }
}

/// Declared array environment entry, resolved by name at call time.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureDecl {
    pub name: String,
    pub elem: Ty,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("gather into undeclared capture `{0}`")]
    UndeclaredCapture(String),
    #[error("capture `{0}` declared twice")]
    DuplicateCapture(String),
    #[error("invalid capture `{name}`: {reason}")]
    InvalidCapture { name: String, reason: String },
    #[error("malformed loop: {0}")]
    MalformedLoop(String),
    #[error("input slot {0} not in signature")]
    UnknownInput(usize),
    #[error("variable {0:?} used before assignment")]
    UndeclaredVariable(VarId),
    #[error("loop variable {0:?} used outside its loop")]
    LoopVarOutOfScope(LoopId),
    #[error("program declares {declared} outputs but defines {defined} results")]
    OutputCount { declared: usize, defined: usize },
    #[error("program needs at least one input stream")]
    NoInputs,
    #[error("invalid signature width {0}")]
    InvalidWidth(usize),
}

/// A validated, immutable stream program.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    name: String,
    inputs: Vec<Ty>,
    outputs: Vec<Ty>,
    captures: Vec<CaptureDecl>,
    body: Vec<Stmt>,
    results: Vec<Expr>,
    vars: Vec<(VarId, Ty)>,
    loops: Vec<LoopId>,
}

impl Program {
    pub fn builder(name: impl Into<String>) -> ProgramBuilder {
        ProgramBuilder { name: name.into(), ..Default::default() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[Ty] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Ty] {
        &self.outputs
    }

    pub fn captures(&self) -> &[CaptureDecl] {
        &self.captures
    }

    pub fn body(&self) -> &[Stmt] {
        &self.body
    }

    pub fn results(&self) -> &[Expr] {
        &self.results
    }

    pub(crate) fn vars(&self) -> &[(VarId, Ty)] {
        &self.vars
    }

    pub(crate) fn loops(&self) -> &[LoopId] {
        &self.loops
    }
}

/// Collects signatures, captures, statements and result expressions, then
/// type-checks them in [`ProgramBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    name: String,
    inputs: Vec<Ty>,
    outputs: Vec<Ty>,
    captures: Vec<CaptureDecl>,
    body: Vec<Stmt>,
    results: Vec<Expr>,
}

impl ProgramBuilder {
    pub fn input(mut self, kind: ScalarKind, width: usize) -> Self {
        self.inputs.push(Ty::new(kind, width));
        self
    }

    pub fn output(mut self, kind: ScalarKind, width: usize) -> Self {
        self.outputs.push(Ty::new(kind, width));
        self
    }

    pub fn capture(mut self, name: impl Into<String>, kind: ScalarKind, width: usize, rank: usize) -> Self {
        self.captures.push(CaptureDecl { name: name.into(), elem: Ty::new(kind, width), rank });
        self
    }

    pub fn stmt(mut self, s: Stmt) -> Self {
        self.body.push(s);
        self
    }

    pub fn stmts(mut self, s: impl IntoIterator<Item = Stmt>) -> Self {
        self.body.extend(s);
        self
    }

    /// Expression assigned to the next output, evaluated after the body.
    pub fn result(mut self, e: Expr) -> Self {
        self.results.push(e);
        self
    }

    pub fn build(self) -> Result<Program, ProgramError> {
        build_program(self)
    }
}

/// Type-checks the collected pieces into a [`Program`].
pub fn build_program(b: ProgramBuilder) -> Result<Program, ProgramError> {
    let checked = check::check(&b)?;
    Ok(Program {
        name: b.name,
        inputs: b.inputs,
        outputs: b.outputs,
        captures: b.captures,
        body: b.body,
        results: b.results,
        vars: checked.vars,
        loops: checked.loops,
    })
}
