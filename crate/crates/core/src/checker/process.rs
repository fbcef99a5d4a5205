use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::protocol::{check_cell_protocol, check_prefix, CellOp};
use super::{data_prim, free_names, value_prim, ExpTy, ProcSig};
use crate::diag::{Diagnostic, Span};
use crate::ir::{Disposal, Ir, IrArg};
use crate::syntax::{Arg, BinOp, Expr, ProcKind, Process};
use crate::types::{dual, resolve, Prim, SessionType as T, TypeEnv};

type R<X> = Result<X, Diagnostic>;

#[derive(Debug, Clone, Default)]
struct Ctx {
    lin: BTreeMap<String, T>,
    exp: BTreeMap<String, ExpTy>,
    /// Linear names already consumed on this path, for better messages.
    gone: BTreeSet<String>,
    /// Cell operations performed on each live usage name.
    ops: BTreeMap<String, Vec<CellOp>>,
}

impl Ctx {
    fn split(&mut self, names: &BTreeSet<String>) -> Ctx {
        let mut other = Ctx { exp: self.exp.clone(), gone: self.gone.clone(), ..Default::default() };
        for n in names {
            if let Some(t) = self.lin.remove(n) {
                other.lin.insert(n.clone(), t);
                if let Some(o) = self.ops.remove(n) {
                    other.ops.insert(n.clone(), o);
                }
            }
        }
        other
    }
}

/// Operations inserted in front of the next IR node.
enum Pre {
    Use(String),
    Promote(String, bool),
}

fn wrap(pre: Vec<Pre>, ir: Ir) -> Ir {
    pre.into_iter().rev().fold(ir, |cont, p| match p {
        Pre::Use(chan) => Ir::Use { chan, cont: Arc::new(cont) },
        Pre::Promote(chan, data) => Ir::Promote { chan, data, cont: Arc::new(cont) },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ety {
    Int,
    Str,
    Bool,
}

impl From<Prim> for Ety {
    fn from(p: Prim) -> Self {
        match p {
            Prim::Int => Ety::Int,
            Prim::Str => Ety::Str,
        }
    }
}

fn mismatch(msg: impl Into<String>, span: Span) -> Diagnostic {
    Diagnostic::error("type-mismatch", msg, span)
}

struct Checker<'a> {
    types: &'a TypeEnv,
    sigs: &'a BTreeMap<String, ProcSig>,
    tparams: &'a [String],
}

pub(super) fn check_body(
    types: &TypeEnv,
    sigs: &BTreeMap<String, ProcSig>,
    sig: &ProcSig,
    body: &Process,
) -> R<Ir> {
    let ck = Checker { types, sigs, tparams: &sig.type_params };
    let mut ctx = Ctx::default();
    for (n, e) in &sig.exp_params {
        ctx.exp.insert(n.clone(), e.clone());
    }
    let mut pre = Vec::new();
    for (n, t) in &sig.params {
        ck.bind(&mut ctx, n, t.clone(), sig.span, &mut pre)?;
    }
    Ok(wrap(pre, ck.process(body, ctx)?))
}

impl Checker<'_> {
    fn whnf(&self, t: &T) -> T {
        self.types.whnf(t).unwrap_or_else(|_| t.clone())
    }

    /// Introduce a name. Consumer-side data becomes unrestricted at once,
    /// `?A` sessions become callable, everything else is linear.
    fn bind(&self, ctx: &mut Ctx, name: &str, t: T, span: Span, pre: &mut Vec<Pre>) -> R<()> {
        if ctx.lin.contains_key(name) {
            let msg = format!("{name} is bound again while the previous {name} is still unused");
            return Err(Diagnostic::error("linear-leak", msg, span));
        }
        ctx.exp.remove(name);
        ctx.gone.remove(name);
        ctx.ops.remove(name);
        let head = self.whnf(&t);
        if let Some(p) = data_prim(self.types, &t) {
            if matches!(head, T::Coaffine(_)) {
                pre.push(Pre::Use(name.into()));
            }
            pre.push(Pre::Promote(name.into(), true));
            ctx.exp.insert(name.into(), ExpTy::Data(p));
        } else if let T::Quest(inner) = head {
            pre.push(Pre::Promote(name.into(), false));
            ctx.exp.insert(name.into(), ExpTy::Session(*inner));
        } else {
            if let T::UsageLocked(_) = head {
                ctx.ops.insert(name.into(), vec![CellOp::Take]);
            }
            ctx.lin.insert(name.into(), t);
        }
        Ok(())
    }

    /// Give a live linear name its continuation type.
    fn rebind(&self, ctx: &mut Ctx, name: &str, t: T, span: Span, pre: &mut Vec<Pre>) -> R<()> {
        let ops = ctx.ops.remove(name);
        ctx.lin.remove(name);
        self.bind(ctx, name, t, span, pre)?;
        if let (Some(o), true) = (ops, ctx.lin.contains_key(name)) {
            ctx.ops.insert(name.into(), o);
        }
        Ok(())
    }

    fn missing(&self, ctx: &Ctx, name: &str, span: Span) -> Diagnostic {
        match ctx.exp.get(name) {
            Some(ExpTy::Session(t)) => mismatch(
                format!("{name} is an unrestricted session of type ?{t}; the only use allowed is call {name}(x)"),
                span,
            ),
            Some(ExpTy::Data(p)) => {
                mismatch(format!("{name} is a {p} value and cannot be used as a session here"), span)
            }
            None if ctx.gone.contains(name) => {
                Diagnostic::error("linearity-reuse", format!("{name} is used after it was consumed"), span)
            }
            None => Diagnostic::error("unbound-name", format!("{name} is not in scope"), span),
        }
    }

    fn lin_ty(&self, ctx: &Ctx, name: &str, span: Span) -> R<T> {
        ctx.lin.get(name).cloned().ok_or_else(|| self.missing(ctx, name, span))
    }

    fn consume(&self, ctx: &mut Ctx, name: &str, span: Span) -> R<T> {
        let t = self.lin_ty(ctx, name, span)?;
        ctx.lin.remove(name);
        ctx.ops.remove(name);
        ctx.gone.insert(name.into());
        Ok(t)
    }

    /// Type of a live name for a structural operation; a coaffine session
    /// is used implicitly first.
    fn open(&self, ctx: &mut Ctx, name: &str, span: Span, pre: &mut Vec<Pre>) -> R<T> {
        let mut t = self.whnf(&self.lin_ty(ctx, name, span)?);
        while let T::Coaffine(inner) = t {
            pre.push(Pre::Use(name.into()));
            ctx.lin.insert(name.into(), (*inner).clone());
            t = self.whnf(&inner);
        }
        Ok(t)
    }

    fn ensure_empty(&self, ctx: &Ctx, span: Span) -> R<()> {
        let Some((n, t)) = ctx.lin.iter().next() else { return Ok(()) };
        Err(match self.whnf(t) {
            T::Usage(_) => Diagnostic::error("cell-leak", format!("cell usage {n} is never dropped"), span),
            T::UsageLocked(_) => {
                Diagnostic::error("cell-leak", format!("cell {n} is taken but never put back and dropped"), span)
            }
            _ => Diagnostic::error("linear-leak", format!("{n} of type {t} is never consumed"), span),
        })
    }

    fn cell_op(&self, ctx: &mut Ctx, name: &str, op: CellOp, span: Span) -> R<()> {
        let ops = ctx.ops.entry(name.into()).or_default();
        ops.push(op);
        let res = if op == CellOp::Drop { check_cell_protocol(ops) } else { check_prefix(ops) };
        res.map_err(|d| d.with_message_prefix(&format!("cell {name}: ")).at(span))
    }

    fn process(&self, p: &Process, mut ctx: Ctx) -> R<Ir> {
        let mut pre = Vec::new();
        let ir = self.step(p, &mut ctx, &mut pre)?;
        Ok(wrap(pre, ir))
    }

    /// Check a continuation after rebinding `binds`; the first entry may
    /// be a live name getting its next type.
    fn then(&self, mut ctx: Ctx, binds: Vec<(&str, T)>, p: &Process, span: Span) -> R<Arc<Ir>> {
        let mut pre = Vec::new();
        for (i, (n, t)) in binds.into_iter().enumerate() {
            if i == 0 {
                self.rebind(&mut ctx, n, t, span, &mut pre)?;
            } else {
                self.bind(&mut ctx, n, t, span, &mut pre)?;
            }
        }
        Ok(Arc::new(wrap(pre, self.process(p, ctx)?)))
    }

    fn step(&self, p: &Process, ctx: &mut Ctx, pre: &mut Vec<Pre>) -> R<Ir> {
        use ProcKind as K;
        let span = p.span;
        let take = std::mem::take;
        match &p.kind {
            K::Inert => {
                self.ensure_empty(ctx, span)?;
                Ok(Ir::Inert)
            }
            K::Forward(a, b) => self.forward(ctx, a, b, span, pre),
            K::Par { left, right, implicit } => {
                let (fl, fr) = (free_names(left), free_names(right));
                if let Some(n) = self.shared(ctx, &fl, &fr, None).into_iter().next() {
                    return Err(if *implicit {
                        Diagnostic::error("linearity-reuse", format!("{n} is used on both sides of `;`"), span)
                    } else {
                        let msg = format!("par branches must not share linear names, but both use {n}");
                        Diagnostic::error("par-arity", msg, span)
                    });
                }
                let lctx = ctx.split(&fl);
                let left_names = lctx.lin.keys().cloned().collect();
                Ok(Ir::Par {
                    left_names,
                    left: Arc::new(self.process(left, lctx)?),
                    right: Arc::new(self.process(right, take(ctx))?),
                })
            }
            K::Cut { chan, ty, left, right } => {
                let t = match ty {
                    Some(te) => self.resolve(te, span)?,
                    None => self.fill_hole(chan, left, span)?,
                };
                let (fl, fr) = (free_names(left), free_names(right));
                let shared = self.shared(ctx, &fl, &fr, Some(chan));
                if let Some(n) = shared.into_iter().next() {
                    let msg = format!("cut on {chan} shares exactly one name, but {n} is also used on both sides");
                    return Err(Diagnostic::error("cut-arity", msg, span));
                }
                if ctx.lin.contains_key(chan) {
                    let msg = format!("{chan} is bound again while the previous {chan} is still unused");
                    return Err(Diagnostic::error("linear-leak", msg, span));
                }
                let lctx = ctx.split(&fl);
                let left_names = lctx.lin.keys().cloned().collect();
                let dt = dual(&t);
                Ok(Ir::Cut {
                    chan: chan.clone(),
                    left_names,
                    left: self.bind_then(lctx, chan, t, left, span)?,
                    right: self.bind_then(take(ctx), chan, dt, right, span)?,
                })
            }
            K::Share { chan, left, right } => {
                match self.whnf(&self.lin_ty(ctx, chan, span)?) {
                    T::Usage(_) => {}
                    T::UsageLocked(_) => {
                        let msg = format!("cell {chan} cannot be shared while it is taken");
                        return Err(Diagnostic::error("cell-protocol", msg, span));
                    }
                    t => return Err(mismatch(format!("share needs a cell usage, but {chan} has type {t}"), span)),
                }
                let (fl, fr) = (free_names(left), free_names(right));
                if let Some(n) = self.shared(ctx, &fl, &fr, Some(chan)).into_iter().next() {
                    let msg = format!("share on {chan} splits exactly one usage, but {n} is also used on both sides");
                    return Err(Diagnostic::error("share-arity", msg, span));
                }
                let t = ctx.lin[chan].clone();
                let ops = ctx.ops.get(chan).cloned();
                let mut names: BTreeSet<String> = fl;
                names.remove(chan);
                let mut lctx = ctx.split(&names);
                lctx.lin.insert(chan.clone(), t);
                if let Some(o) = ops {
                    lctx.ops.insert(chan.clone(), o);
                }
                let left_names = lctx.lin.keys().filter(|n| *n != chan).cloned().collect();
                Ok(Ir::Share {
                    chan: chan.clone(),
                    left_names,
                    left: Arc::new(self.process(left, lctx)?),
                    right: Arc::new(self.process(right, take(ctx))?),
                })
            }
            K::Call { name, type_args, args, exp_args } => self.call(ctx, name, type_args, args, exp_args, span, pre),
            K::Send { chan, arg, cont } => {
                let T::Send(pl, c) = self.open(ctx, chan, span, pre)? else {
                    return Err(self.wrong_op(ctx, chan, "send on", span));
                };
                if matches!(arg, Arg::Name(n) if n == chan) {
                    let msg = format!("{chan} cannot be sent over itself");
                    return Err(Diagnostic::error("linearity-reuse", msg, span));
                }
                let arg = self.slot_arg(ctx, arg, &pl, span, pre)?;
                Ok(Ir::Send { chan: chan.clone(), arg, cont: self.then(take(ctx), vec![(chan, *c)], cont, span)? })
            }
            K::Recv { chan, bind, cont } => {
                let T::Recv(pl, c) = self.open(ctx, chan, span, pre)? else {
                    return Err(self.wrong_op(ctx, chan, "receive on", span));
                };
                if bind == chan {
                    return Err(mismatch(format!("the received name must differ from {chan}"), span));
                }
                let cont = self.then(take(ctx), vec![(chan, *c), (bind, *pl)], cont, span)?;
                Ok(Ir::Recv { chan: chan.clone(), bind: bind.clone(), cont })
            }
            K::Select { label, chan, cont } => {
                let T::Choice(bs) = self.open(ctx, chan, span, pre)? else {
                    return Err(self.wrong_op(ctx, chan, "select on", span));
                };
                let Some((_, bt)) = bs.into_iter().find(|(l, _)| l == label) else {
                    return Err(mismatch(format!("#{label} is not a choice available on {chan}"), span));
                };
                let cont = self.then(take(ctx), vec![(chan, bt)], cont, span)?;
                Ok(Ir::Select { chan: chan.clone(), label: label.clone(), cont })
            }
            K::Case { chan, branches } => {
                let T::Offer(bs) = self.open(ctx, chan, span, pre)? else {
                    return Err(self.wrong_op(ctx, chan, "case on", span));
                };
                let want: BTreeSet<&String> = bs.iter().map(|(l, _)| l).collect();
                let have: BTreeSet<&String> = branches.iter().map(|(l, _)| l).collect();
                if let Some(l) = want.difference(&have).next() {
                    return Err(Diagnostic::error("case-coverage", format!("case on {chan} misses branch #{l}"), span));
                }
                if let Some(l) = have.difference(&want).next() {
                    let msg = format!("case on {chan} has branch #{l}, which its type does not offer");
                    return Err(Diagnostic::error("case-coverage", msg, span));
                }
                if have.len() != branches.len() {
                    return Err(Diagnostic::error("case-coverage", format!("case on {chan} repeats a branch"), span));
                }
                let mut out = Vec::new();
                for (l, body) in branches {
                    let bt = bs.iter().find(|(x, _)| x == l).unwrap().1.clone();
                    out.push((l.clone(), self.then(ctx.clone(), vec![(chan, bt)], body, body.span)?));
                }
                ctx.lin.clear();
                Ok(Ir::Case { chan: chan.clone(), branches: out })
            }
            K::Close(c) => {
                if !matches!(self.open(ctx, c, span, pre)?, T::Close) {
                    return Err(self.wrong_op(ctx, c, "close", span));
                }
                self.consume(ctx, c, span)?;
                self.ensure_empty(ctx, span)?;
                Ok(Ir::Close(c.clone()))
            }
            K::Wait { chan, cont } => {
                if !matches!(self.open(ctx, chan, span, pre)?, T::Wait) {
                    return Err(self.wrong_op(ctx, chan, "wait on", span));
                }
                self.consume(ctx, chan, span)?;
                Ok(Ir::Wait { chan: chan.clone(), cont: Arc::new(self.process(cont, take(ctx))?) })
            }
            K::Server { chan, bind, body } => {
                let T::Bang(a) = self.whnf(&self.lin_ty(ctx, chan, span)?) else {
                    return Err(self.wrong_op(ctx, chan, "offer a replicated server on", span));
                };
                self.consume(ctx, chan, span)?;
                if let Some(n) = ctx.lin.keys().next() {
                    let msg = format!("replicated server {chan} may only capture unrestricted names, but {n} is linear");
                    return Err(Diagnostic::error("bang-promotion", msg, span));
                }
                let mut bctx = Ctx { exp: ctx.exp.clone(), ..Default::default() };
                let mut bpre = Vec::new();
                self.bind(&mut bctx, bind, *a, span, &mut bpre)?;
                let body = wrap(bpre, self.process(body, bctx)?);
                Ok(Ir::Server { chan: chan.clone(), bind: bind.clone(), body: Arc::new(body) })
            }
            K::CallRepl { chan, bind, cont } => {
                let Some(ExpTy::Session(t)) = ctx.exp.get(chan).cloned() else {
                    if ctx.exp.contains_key(chan) {
                        return Err(mismatch(format!("{chan} is a value, not a replicated session"), span));
                    }
                    return Err(match ctx.lin.get(chan) {
                        Some(t) => mismatch(format!("call needs an unrestricted session, but {chan} has type {t}"), span),
                        None => self.missing(ctx, chan, span),
                    });
                };
                let cont = self.bind_then(take(ctx), bind, t, cont, span)?;
                Ok(Ir::CallRepl { chan: chan.clone(), bind: bind.clone(), cont })
            }
            K::Affine { chan, cont } => {
                let T::Affine(a) = self.whnf(&self.lin_ty(ctx, chan, span)?) else {
                    return Err(self.wrong_op(ctx, chan, "introduce affine on", span));
                };
                let mut cancel = Vec::new();
                for (n, t) in &ctx.lin {
                    if n == chan {
                        continue;
                    }
                    let d = match self.whnf(t) {
                        T::Usage(_) => Disposal::DropCell,
                        _ if self.types.is_disposable(t) => Disposal::Discard,
                        _ => {
                            let msg = format!(
                                "affine {chan} may be discarded, so every other linear name must be disposable, but {n} has type {t}"
                            );
                            return Err(Diagnostic::error("affine-promotion", msg, span));
                        }
                    };
                    cancel.push((n.clone(), d));
                }
                let cont = self.then(take(ctx), vec![(chan, *a)], cont, span)?;
                Ok(Ir::Affine { chan: chan.clone(), cancel, cont })
            }
            K::Use { chan, cont } => {
                let T::Coaffine(a) = self.whnf(&self.lin_ty(ctx, chan, span)?) else {
                    return Err(self.wrong_op(ctx, chan, "use", span));
                };
                Ok(Ir::Use { chan: chan.clone(), cont: self.then(take(ctx), vec![(chan, *a)], cont, span)? })
            }
            K::Discard(c) => self.discard(ctx, c, false, span),
            K::Drop(c) => self.discard(ctx, c, true, span),
            K::Cell { chan, init } => {
                let s = match self.whnf(&self.lin_ty(ctx, chan, span)?) {
                    T::State(s) => *s,
                    _ => return Err(self.wrong_op(ctx, chan, "create a cell at", span)),
                };
                self.consume(ctx, chan, span)?;
                let init = self.cell_arg(ctx, init, &s, span, pre)?;
                self.ensure_empty(ctx, span)?;
                let dispose = match self.whnf(&s) {
                    T::State(_) => Disposal::DropCell,
                    _ => Disposal::Discard,
                };
                Ok(Ir::CellNew { chan: chan.clone(), init, dispose })
            }
            K::Take { chan, bind, cont } => {
                let t = self.whnf(&self.lin_ty(ctx, chan, span)?);
                if !matches!(t, T::Usage(_) | T::UsageLocked(_)) {
                    return Err(self.wrong_op(ctx, chan, "take from", span));
                }
                self.cell_op(ctx, chan, CellOp::Take, span)?;
                let T::Usage(u) = t else {
                    let msg = format!("cell {chan} is taken again before being put back");
                    return Err(Diagnostic::error("cell-protocol", msg, span));
                };
                if bind == chan {
                    return Err(mismatch(format!("the taken name must differ from {chan}"), span));
                }
                ctx.lin.insert(chan.clone(), T::UsageLocked(u.clone()));
                let cont = self.bind_then(take(ctx), bind, *u, cont, span)?;
                Ok(Ir::Take { chan: chan.clone(), bind: bind.clone(), cont })
            }
            K::Put { chan, arg, cont } => {
                let t = self.whnf(&self.lin_ty(ctx, chan, span)?);
                if !matches!(t, T::Usage(_) | T::UsageLocked(_)) {
                    return Err(self.wrong_op(ctx, chan, "put into", span));
                }
                self.cell_op(ctx, chan, CellOp::Put, span)?;
                let T::UsageLocked(u) = t else {
                    let msg = format!("put into {chan} without a preceding take");
                    return Err(Diagnostic::error("cell-protocol", msg, span));
                };
                if matches!(arg, Arg::Name(n) if n == chan) {
                    let msg = format!("{chan} cannot be put into itself");
                    return Err(Diagnostic::error("linearity-reuse", msg, span));
                }
                let arg = self.cell_arg(ctx, arg, &dual(&u), span, pre)?;
                ctx.lin.insert(chan.clone(), T::Usage(u));
                Ok(Ir::Put { chan: chan.clone(), arg, cont: Arc::new(self.process(cont, take(ctx))?) })
            }
            K::If { cond, then, els } => {
                let ct = self.expr(ctx, cond, span)?;
                if ct != Ety::Bool {
                    return Err(mismatch("the condition of if must be a comparison", span));
                }
                let t = self.process(then, ctx.clone())?;
                let e = self.process(els, take(ctx))?;
                Ok(Ir::If { cond: cond.clone(), then: Arc::new(t), els: Arc::new(e) })
            }
            K::Print { expr, newline, cont } => {
                self.expr(ctx, expr, span)?;
                let cont = Arc::new(self.process(cont, take(ctx))?);
                Ok(Ir::Print { expr: expr.clone(), newline: *newline, cont })
            }
            K::Sleep { ticks, cont } => {
                if self.expr(ctx, ticks, span)? != Ety::Int {
                    return Err(mismatch("sleep needs an integer", span));
                }
                Ok(Ir::Sleep { ticks: ticks.clone(), cont: Arc::new(self.process(cont, take(ctx))?) })
            }
            K::Letc { .. } | K::Then { .. } => {
                unreachable!("sugar is removed before checking")
            }
        }
    }

    fn bind_then(&self, mut ctx: Ctx, name: &str, t: T, p: &Process, span: Span) -> R<Arc<Ir>> {
        let mut pre = Vec::new();
        self.bind(&mut ctx, name, t, span, &mut pre)?;
        Ok(Arc::new(wrap(pre, self.process(p, ctx)?)))
    }

    fn wrong_op(&self, ctx: &Ctx, name: &str, what: &str, span: Span) -> Diagnostic {
        match ctx.lin.get(name) {
            Some(t) => mismatch(format!("cannot {what} {name}, which has type {t}"), span),
            None => self.missing(ctx, name, span),
        }
    }

    /// Linear names live in `ctx` and free on both sides, except `except`.
    fn shared(&self, ctx: &Ctx, fl: &BTreeSet<String>, fr: &BTreeSet<String>, except: Option<&String>) -> Vec<String> {
        fl.intersection(fr)
            .filter(|n| Some(*n) != except && ctx.lin.contains_key(*n))
            .cloned()
            .collect()
    }

    fn resolve(&self, te: &crate::syntax::TypeExpr, span: Span) -> R<T> {
        self.types.well_formed(&resolve(te, self.tparams)).map_err(|d| d.at(span))
    }

    fn forward(&self, ctx: &mut Ctx, a: &str, b: &str, span: Span, pre: &mut Vec<Pre>) -> R<Ir> {
        let data = |n: &str| match ctx.exp.get(n) {
            Some(ExpTy::Data(p)) => Some(*p),
            _ => None,
        };
        let (da, db) = (data(a), data(b));
        if da.is_some() || db.is_some() {
            let (chan, v, p) = match (da, db) {
                (Some(_), Some(_)) => {
                    return Err(mismatch(format!("fwd needs at least one session, but {a} and {b} are values"), span))
                }
                (Some(p), None) => (b, a, p),
                (None, Some(p)) => (a, b, p),
                (None, None) => unreachable!(),
            };
            let t = self.consume(ctx, chan, span)?;
            if value_prim(self.types, &t) != Some(p) {
                return Err(mismatch(format!("{chan} of type {t} cannot be fulfilled with the {p} value {v}"), span));
            }
            self.ensure_empty(ctx, span)?;
            return Ok(Ir::Deliver { chan: chan.into(), expr: Expr::Var(v.into()) });
        }
        if a == b {
            return Err(Diagnostic::error("linearity-reuse", format!("fwd {a} {a} uses {a} twice"), span));
        }
        let ta = self.consume(ctx, a, span)?;
        let tb = self.consume(ctx, b, span)?;
        if !self.types.equiv(&tb, &dual(&ta)) {
            match (self.whnf(&ta), self.whnf(&tb)) {
                (T::Coaffine(x), _) if self.types.equiv(&tb, &dual(&x)) => pre.push(Pre::Use(a.into())),
                (_, T::Coaffine(y)) if self.types.equiv(&ta, &dual(&y)) => pre.push(Pre::Use(b.into())),
                _ => {
                    let msg = format!("fwd needs dual types, but {a} has type {ta} and {b} has type {tb}");
                    return Err(mismatch(msg, span));
                }
            }
        }
        self.ensure_empty(ctx, span)?;
        Ok(Ir::Forward(a.into(), b.into()))
    }

    fn discard(&self, ctx: &mut Ctx, c: &str, is_drop: bool, span: Span) -> R<Ir> {
        if let Some(ExpTy::Data(_)) = ctx.exp.get(c) {
            self.ensure_empty(ctx, span)?;
            return Ok(Ir::Inert);
        }
        let t = self.whnf(&self.lin_ty(ctx, c, span)?);
        let ir = match t {
            T::Coaffine(_) => Ir::Discard(c.into()),
            T::Usage(_) | T::UsageLocked(_) if is_drop => {
                self.cell_op(ctx, c, CellOp::Drop, span)?;
                Ir::DropCell(c.into())
            }
            T::Usage(_) | T::UsageLocked(_) => {
                return Err(mismatch(format!("{c} is a cell usage; release it with drop"), span));
            }
            _ => return Err(self.wrong_op(ctx, c, if is_drop { "drop" } else { "discard" }, span)),
        };
        self.consume(ctx, c, span)?;
        self.ensure_empty(ctx, span)?;
        Ok(ir)
    }

    /// An argument filling a slot of type `slot` (a send payload, cell
    /// content or, dualized, a procedure parameter). A name passed must have
    /// the dual of the slot; a closure's bound name gets the slot itself.
    fn slot_arg(&self, ctx: &mut Ctx, arg: &Arg, slot: &T, span: Span, pre: &mut Vec<Pre>) -> R<IrArg> {
        match arg {
            Arg::Name(n) if ctx.lin.contains_key(n) => {
                let t = ctx.lin[n].clone();
                let need = dual(slot);
                if !self.types.equiv(&t, &need) {
                    match self.whnf(&t) {
                        T::Coaffine(x) if self.types.equiv(&x, &need) => pre.push(Pre::Use(n.clone())),
                        _ => return Err(mismatch(format!("{n} has type {t}, but {need} is expected"), span)),
                    }
                }
                self.consume(ctx, n, span)?;
                Ok(IrArg::Name(n.clone()))
            }
            Arg::Name(n) => match ctx.exp.get(n) {
                Some(ExpTy::Data(p)) => {
                    self.value_slot(slot, (*p).into(), span)?;
                    Ok(IrArg::Expr(Expr::Var(n.clone())))
                }
                _ => Err(self.missing(ctx, n, span)),
            },
            Arg::Expr(e) => {
                let et = self.expr(ctx, e, span)?;
                self.value_slot(slot, et, span)?;
                Ok(IrArg::Expr(e.clone()))
            }
            Arg::Closure(x, body) => {
                let mut fv = free_names(body);
                fv.remove(x);
                let mut cctx = ctx.split(&fv);
                ctx.gone.extend(cctx.lin.keys().cloned());
                let captures: Vec<String> = cctx.lin.keys().cloned().collect();
                let mut cpre = Vec::new();
                cctx.gone.remove(x);
                self.bind(&mut cctx, x, slot.clone(), span, &mut cpre)?;
                let body = wrap(cpre, self.process(body, cctx)?);
                Ok(IrArg::Closure { bind: x.clone(), body: Arc::new(body), captures })
            }
        }
    }

    /// Like `slot_arg`, but a rejected name that could never live in a
    /// cell gets a more specific diagnostic.
    fn cell_arg(&self, ctx: &mut Ctx, arg: &Arg, slot: &T, span: Span, pre: &mut Vec<Pre>) -> R<IrArg> {
        let before = match arg {
            Arg::Name(n) => ctx.lin.get(n).cloned().map(|t| (n.clone(), t)),
            _ => None,
        };
        self.slot_arg(ctx, arg, slot, span, pre).map_err(|d| match before {
            Some((n, t)) if d.rule == "type-mismatch" && !self.types.is_disposable(&t) => {
                let msg = format!("cell contents must be affine or state, but {n} has type {t}");
                Diagnostic::error("cell-content", msg, span)
            }
            _ => d,
        })
    }

    fn value_slot(&self, slot: &T, et: Ety, span: Span) -> R<()> {
        match value_prim(self.types, slot) {
            Some(p) if Ety::from(p) == et => Ok(()),
            Some(p) => Err(mismatch(format!("a {p} value is expected here"), span)),
            None => Err(mismatch(format!("a value is passed where a session of type {slot} is expected"), span)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn call(
        &self,
        ctx: &mut Ctx,
        name: &str,
        type_args: &[crate::syntax::TypeExpr],
        args: &[Arg],
        exp_args: &[Expr],
        span: Span,
        pre: &mut Vec<Pre>,
    ) -> R<Ir> {
        let Some(sig) = self.sigs.get(name) else {
            return Err(Diagnostic::error("unknown-proc", format!("no procedure named {name}"), span));
        };
        let arity = |what: &str, want: usize, got: usize| {
            let msg = format!("{name} expects {want} {what}, got {got}");
            Err(Diagnostic::error("arity", msg, span))
        };
        if sig.type_params.len() != type_args.len() {
            return arity("type argument(s)", sig.type_params.len(), type_args.len());
        }
        if sig.params.len() != args.len() {
            return arity("linear argument(s)", sig.params.len(), args.len());
        }
        if sig.exp_params.len() != exp_args.len() {
            return arity("unrestricted argument(s)", sig.exp_params.len(), exp_args.len());
        }
        let targs = type_args.iter().map(|te| self.resolve(te, span)).collect::<R<Vec<_>>>()?;
        let inst = |t: &T| instantiate(t, &sig.type_params, &targs);
        let mut lin_args = Vec::new();
        for (arg, (_, pt)) in args.iter().zip(&sig.params) {
            lin_args.push(self.slot_arg(ctx, arg, &dual(&inst(pt)), span, pre)?);
        }
        for (e, (pn, pt)) in exp_args.iter().zip(&sig.exp_params) {
            match pt {
                ExpTy::Data(p) => {
                    if self.expr(ctx, e, span)? != (*p).into() {
                        return Err(mismatch(format!("argument {pn} of {name} must be a {p} value"), span));
                    }
                }
                ExpTy::Session(t) => {
                    let ok = match e {
                        Expr::Var(v) => match ctx.exp.get(v) {
                            Some(ExpTy::Session(have)) => self.types.equiv(have, &inst(t)),
                            _ => false,
                        },
                        _ => false,
                    };
                    if !ok {
                        let msg = format!("argument {pn} of {name} must be an unrestricted session of type ?{}", inst(t));
                        return Err(mismatch(msg, span));
                    }
                }
            }
        }
        self.ensure_empty(ctx, span)?;
        Ok(Ir::Call { proc: name.into(), lin_args, exp_args: exp_args.to_vec() })
    }

    fn fill_hole(&self, chan: &str, left: &Process, span: Span) -> R<T> {
        let mut found = None;
        left.visit(&mut |p| {
            if found.is_some() {
                return;
            }
            if let ProcKind::Call { name, type_args, args, .. } = &p.kind {
                if let Some(i) = args.iter().position(|a| matches!(a, Arg::Name(n) if n == chan)) {
                    found = Some((name.clone(), type_args.clone(), i));
                }
            }
        });
        let Some((name, type_args, i)) = found else {
            let msg = format!("the type of {chan} cannot be inferred; annotate it");
            return Err(Diagnostic::error("cannot-infer", msg, span));
        };
        let Some(sig) = self.sigs.get(&name) else {
            return Err(Diagnostic::error("unknown-proc", format!("no procedure named {name}"), span));
        };
        if sig.type_params.len() != type_args.len() {
            let msg = format!("{name} expects {} type argument(s), got {}", sig.type_params.len(), type_args.len());
            return Err(Diagnostic::error("arity", msg, span));
        }
        let targs = type_args.iter().map(|te| self.resolve(te, span)).collect::<R<Vec<_>>>()?;
        let (_, pt) = sig.params.get(i).ok_or_else(|| {
            Diagnostic::error("arity", format!("{name} has no linear parameter {}", i + 1), span)
        })?;
        Ok(instantiate(pt, &sig.type_params, &targs))
    }

    fn expr(&self, ctx: &Ctx, e: &Expr, span: Span) -> R<Ety> {
        Ok(match e {
            Expr::Int(_) => Ety::Int,
            Expr::Str(_) => Ety::Str,
            Expr::Var(v) => match ctx.exp.get(v) {
                Some(ExpTy::Data(p)) => (*p).into(),
                Some(ExpTy::Session(_)) => {
                    return Err(mismatch(format!("{v} is a replicated session, not a value"), span));
                }
                None if ctx.lin.contains_key(v) => {
                    let msg = format!("{v} has session type {} and cannot be used as a value", ctx.lin[v]);
                    return Err(mismatch(msg, span));
                }
                None => return Err(self.missing(ctx, v, span)),
            },
            Expr::Neg(a) => match self.expr(ctx, a, span)? {
                Ety::Int => Ety::Int,
                _ => return Err(mismatch("unary minus needs an integer", span)),
            },
            Expr::Bin(op, a, b) => {
                let (ta, tb) = (self.expr(ctx, a, span)?, self.expr(ctx, b, span)?);
                match (op, ta, tb) {
                    (_, Ety::Bool, _) | (_, _, Ety::Bool) => {
                        return Err(mismatch("comparisons cannot be combined with other operators", span));
                    }
                    (BinOp::Add, Ety::Str, _) | (BinOp::Add, _, Ety::Str) => Ety::Str,
                    (BinOp::Eq, x, y) if x == y => Ety::Bool,
                    (BinOp::Eq, ..) => return Err(mismatch("== compares values of the same type", span)),
                    (_, Ety::Int, Ety::Int) => Ety::Int,
                    _ => return Err(mismatch("arithmetic needs integers", span)),
                }
            }
        })
    }
}

/// Simultaneous substitution of `args` for `params`.
pub(super) fn instantiate(t: &T, params: &[String], args: &[T]) -> T {
    let mut out = t.clone();
    for (i, p) in params.iter().enumerate() {
        out = out.subst(p, &T::Var(format!("'{i}"), false));
    }
    for (i, a) in args.iter().enumerate() {
        out = out.subst(&format!("'{i}"), a);
    }
    out
}
