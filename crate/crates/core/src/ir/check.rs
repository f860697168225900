use std::collections::{HashMap, HashSet};

use super::{ArithOp, CaptureDecl, Expr, LoopId, LoopSpec, ProgramBuilder, ProgramError, Stmt, VarId};
use crate::value::{ScalarKind, Ty, MAX_WIDTH};

pub(super) struct Checked {
    pub vars: Vec<(VarId, Ty)>,
    pub loops: Vec<LoopId>,
}

struct Checker<'b> {
    inputs: &'b [Ty],
    captures: HashMap<&'b str, &'b CaptureDecl>,
    vars: HashMap<VarId, Ty>,
    visible: HashSet<VarId>,
    var_order: Vec<VarId>,
    active_loops: Vec<LoopId>,
    all_loops: HashSet<LoopId>,
}

fn mismatch(msg: String) -> ProgramError {
    ProgramError::TypeMismatch(msg)
}

pub(super) fn check(b: &ProgramBuilder) -> Result<Checked, ProgramError> {
    if b.inputs.is_empty() {
        return Err(ProgramError::NoInputs);
    }
    for ty in b.inputs.iter().chain(&b.outputs) {
        if ty.width == 0 || ty.width > MAX_WIDTH {
            return Err(ProgramError::InvalidWidth(ty.width));
        }
    }
    let mut captures = HashMap::new();
    for c in &b.captures {
        if c.rank != 1 && c.rank != 2 {
            return Err(ProgramError::InvalidCapture { name: c.name.clone(), reason: format!("rank {}", c.rank) });
        }
        if c.elem.width == 0 || c.elem.width > MAX_WIDTH {
            return Err(ProgramError::InvalidCapture {
                name: c.name.clone(),
                reason: format!("width {}", c.elem.width),
            });
        }
        if captures.insert(c.name.as_str(), c).is_some() {
            return Err(ProgramError::DuplicateCapture(c.name.clone()));
        }
    }
    let mut ck = Checker {
        inputs: &b.inputs,
        captures,
        vars: HashMap::new(),
        visible: HashSet::new(),
        var_order: Vec::new(),
        active_loops: Vec::new(),
        all_loops: HashSet::new(),
    };
    for s in &b.body {
        ck.stmt(s)?;
    }
    if b.results.len() != b.outputs.len() {
        return Err(ProgramError::OutputCount { declared: b.outputs.len(), defined: b.results.len() });
    }
    for (k, (e, want)) in b.results.iter().zip(&b.outputs).enumerate() {
        let got = ck.expr(e)?;
        if got != *want {
            return Err(mismatch(format!("output {k} declared {want}, result is {got}")));
        }
    }
    let vars = ck.var_order.iter().map(|v| (*v, ck.vars[v])).collect();
    let mut loops: Vec<LoopId> = ck.all_loops.into_iter().collect();
    loops.sort();
    Ok(Checked { vars, loops })
}

impl Checker<'_> {
    fn stmt(&mut self, s: &Stmt) -> Result<(), ProgramError> {
        match s {
            Stmt::Let(v, e) => {
                let ty = self.expr(e)?;
                match self.vars.get(v) {
                    Some(prev) if *prev != ty => {
                        return Err(mismatch(format!("{v:?} is {prev}, assigned {ty}")));
                    }
                    Some(_) => {}
                    None => {
                        self.vars.insert(*v, ty);
                        self.var_order.push(*v);
                    }
                }
                self.visible.insert(*v);
                Ok(())
            }
            Stmt::Accumulate(v, e) => {
                if !self.visible.contains(v) {
                    return Err(ProgramError::UndeclaredVariable(*v));
                }
                let target = self.vars[v];
                let ty = self.expr(e)?;
                if ty.kind != target.kind || (ty.width != target.width && ty.width != 1) {
                    return Err(mismatch(format!("cannot accumulate {ty} into {v:?} of type {target}")));
                }
                Ok(())
            }
            Stmt::Loop(l) => self.loop_spec(l),
        }
    }

    fn loop_spec(&mut self, l: &LoopSpec) -> Result<(), ProgramError> {
        if self.active_loops.contains(&l.var) {
            return Err(ProgramError::MalformedLoop(format!("{:?} shadows an enclosing loop", l.var)));
        }
        for (what, e) in [("init", &l.init), ("bound", &l.bound)] {
            if e.reads_vars() {
                return Err(ProgramError::MalformedLoop(format!("{what} reads a program variable")));
            }
            let ty = self.expr(e)?;
            if ty != Ty::new(ScalarKind::I32, 1) {
                return Err(ProgramError::MalformedLoop(format!("{what} must be i32x1, found {ty}")));
            }
        }
        self.all_loops.insert(l.var);
        self.active_loops.push(l.var);
        // Variables first assigned inside the body go out of scope with it.
        let outer = self.visible.clone();
        let r = l.body.iter().try_for_each(|s| self.stmt(s));
        self.visible = outer;
        self.active_loops.pop();
        r
    }

    pub(super) fn expr(&self, e: &Expr) -> Result<Ty, ProgramError> {
        match e {
            Expr::Const(v) => Ok(v.ty()),
            Expr::Input(s) => self.inputs.get(*s).copied().ok_or(ProgramError::UnknownInput(*s)),
            Expr::LoopVar(l) => {
                if self.active_loops.contains(l) {
                    Ok(Ty::new(ScalarKind::I32, 1))
                } else {
                    Err(ProgramError::LoopVarOutOfScope(*l))
                }
            }
            Expr::Var(v) if self.visible.contains(v) => Ok(self.vars[v]),
            Expr::Var(v) => Err(ProgramError::UndeclaredVariable(*v)),
            Expr::Gather { capture, index } => {
                let decl = self.captures.get(capture.as_str()).ok_or_else(|| ProgramError::UndeclaredCapture(capture.clone()))?;
                let ity = self.expr(index)?;
                if ity != Ty::new(ScalarKind::I32, decl.rank) {
                    return Err(mismatch(format!(
                        "gather into rank-{} `{}` needs an i32x{} index, found {ity}",
                        decl.rank, capture, decl.rank
                    )));
                }
                Ok(decl.elem)
            }
            Expr::Component(inner, i) => {
                let ty = self.expr(inner)?;
                if *i >= ty.width {
                    return Err(mismatch(format!("component {i} of {ty}")));
                }
                Ok(Ty::new(ty.kind, 1))
            }
            Expr::Pack(parts) => {
                if parts.is_empty() || parts.len() > MAX_WIDTH {
                    return Err(mismatch(format!("pack of {} parts", parts.len())));
                }
                let first = self.expr(&parts[0])?;
                for p in parts {
                    let ty = self.expr(p)?;
                    if ty != Ty::new(first.kind, 1) {
                        return Err(mismatch(format!("pack parts must be scalars of one kind, found {ty}")));
                    }
                }
                Ok(Ty::new(first.kind, parts.len()))
            }
            Expr::Arith(op, args) => {
                if args.len() != op.arity() {
                    return Err(mismatch(format!("{op:?} takes {} operands, got {}", op.arity(), args.len())));
                }
                let tys = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                let kind = tys[0].kind;
                let width = tys.iter().map(|t| t.width).max().unwrap_or(1);
                for t in &tys {
                    if t.kind != kind {
                        return Err(mismatch(format!("{op:?} mixes {kind} and {}", t.kind)));
                    }
                    if t.width != width && t.width != 1 {
                        return Err(mismatch(format!("{op:?} mixes widths {} and {width}", t.width)));
                    }
                }
                if *op == ArithOp::Fma && !kind.is_float() {
                    return Err(mismatch("fma needs float operands".into()));
                }
                Ok(Ty::new(kind, width))
            }
        }
    }
}
