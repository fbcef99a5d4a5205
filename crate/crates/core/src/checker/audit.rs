//! Independent re-check of elaborated code: every linear name is consumed
//! exactly once on every path, compositions split contexts as recorded, and
//! cell usages follow the take/put/drop protocol.

use std::collections::{BTreeMap, BTreeSet};

use super::protocol::{check_cell_protocol, check_prefix, CellOp};
use super::ProcSig;
use crate::ir::{Ir, IrArg};
use crate::syntax::Expr;
use crate::types::{SessionType, TypeEnv};

#[derive(Clone, Default)]
struct St {
    lin: BTreeSet<String>,
    exp: BTreeSet<String>,
    ops: BTreeMap<String, Vec<CellOp>>,
}

type R = Result<(), String>;

impl St {
    fn live(&self, n: &str, at: &str) -> R {
        if self.lin.contains(n) {
            Ok(())
        } else {
            Err(format!("{at}: {n} is not live"))
        }
    }

    fn consume(&mut self, n: &str, at: &str) -> R {
        if !self.lin.remove(n) {
            return Err(format!("{at}: {n} consumed twice or never bound"));
        }
        if let Some(ops) = self.ops.remove(n) {
            check_prefix(&ops).map_err(|d| format!("{at}: {n}: {}", d.message))?;
        }
        Ok(())
    }

    fn fresh(&mut self, n: &str, at: &str) -> R {
        if self.lin.contains(n) {
            return Err(format!("{at}: {n} rebound while live"));
        }
        self.exp.remove(n);
        self.lin.insert(n.into());
        Ok(())
    }

    fn done(&self, at: &str) -> R {
        match self.lin.iter().next() {
            Some(n) => Err(format!("{at}: {n} left unconsumed")),
            None => Ok(()),
        }
    }

    fn expr(&self, e: &Expr, at: &str) -> R {
        let mut names = Vec::new();
        e.names(&mut names);
        match names.iter().find(|n| !self.exp.contains(*n)) {
            Some(n) => Err(format!("{at}: {n} is not an unrestricted value")),
            None => Ok(()),
        }
    }

    fn split(&mut self, names: &[String], at: &str) -> Result<St, String> {
        let mut other = St { exp: self.exp.clone(), ..Default::default() };
        for n in names {
            if !self.lin.remove(n) {
                return Err(format!("{at}: split names {n}, which is not live"));
            }
            other.lin.insert(n.clone());
            if let Some(o) = self.ops.remove(n) {
                other.ops.insert(n.clone(), o);
            }
        }
        Ok(other)
    }

    fn op(&mut self, n: &str, op: CellOp, at: &str) -> R {
        let ops = self.ops.entry(n.into()).or_default();
        ops.push(op);
        let res = if op == CellOp::Drop { check_cell_protocol(ops) } else { check_prefix(ops) };
        res.map_err(|d| format!("{at}: {n}: {}", d.message))
    }
}

pub fn audit_proc(types: &TypeEnv, sig: &ProcSig, body: &Ir) -> R {
    let mut st = St::default();
    st.exp.extend(sig.exp_params.iter().map(|(n, _)| n.clone()));
    for (n, t) in &sig.params {
        st.lin.insert(n.clone());
        if let Ok(SessionType::UsageLocked(_)) = types.whnf(t) {
            st.ops.insert(n.clone(), vec![CellOp::Take]);
        }
    }
    walk(body, st)
}

fn arg(a: &IrArg, st: &mut St, at: &str) -> R {
    match a {
        IrArg::Name(n) => st.consume(n, at),
        IrArg::Expr(e) => st.expr(e, at),
        IrArg::Closure { bind, body, captures } => {
            let mut inner = st.split(captures, at)?;
            inner.fresh(bind, at)?;
            walk(body, inner)
        }
    }
}

fn walk(ir: &Ir, mut st: St) -> R {
    let at = ir.tag();
    match ir {
        Ir::Inert => st.done(at),
        Ir::Forward(a, b) => {
            st.consume(a, at)?;
            st.consume(b, at)?;
            st.done(at)
        }
        Ir::Deliver { chan, expr } => {
            st.consume(chan, at)?;
            st.expr(expr, at)?;
            st.done(at)
        }
        Ir::Par { left_names, left, right } => {
            let l = st.split(left_names, at)?;
            walk(left, l)?;
            walk(right, st)
        }
        Ir::Cut { chan, left_names, left, right } => {
            if st.lin.contains(chan) {
                return Err(format!("{at}: {chan} is already live"));
            }
            let mut l = st.split(left_names, at)?;
            l.fresh(chan, at)?;
            st.fresh(chan, at)?;
            walk(left, l)?;
            walk(right, st)
        }
        Ir::Share { chan, left_names, left, right } => {
            st.live(chan, at)?;
            let ops = st.ops.get(chan).cloned().unwrap_or_default();
            if ops.last() == Some(&CellOp::Take) {
                return Err(format!("{at}: {chan} shared while taken"));
            }
            let mut l = st.split(left_names, at)?;
            l.lin.insert(chan.clone());
            l.ops.insert(chan.clone(), ops);
            walk(left, l)?;
            walk(right, st)
        }
        Ir::Call { lin_args, exp_args, .. } => {
            for a in lin_args {
                arg(a, &mut st, at)?;
            }
            for e in exp_args {
                st.expr(e, at)?;
            }
            st.done(at)
        }
        Ir::Send { chan, arg: a, cont } => {
            st.live(chan, at)?;
            arg(a, &mut st, at)?;
            walk(cont, st)
        }
        Ir::Recv { chan, bind, cont } => {
            st.live(chan, at)?;
            st.fresh(bind, at)?;
            walk(cont, st)
        }
        Ir::Select { chan, cont, .. } | Ir::Use { chan, cont } => {
            st.live(chan, at)?;
            walk(cont, st)
        }
        Ir::Case { chan, branches } => {
            st.live(chan, at)?;
            branches.iter().try_for_each(|(_, b)| walk(b, st.clone()))
        }
        Ir::Close(c) | Ir::Discard(c) => {
            st.consume(c, at)?;
            st.done(at)
        }
        Ir::DropCell(c) => {
            st.op(c, CellOp::Drop, at)?;
            st.ops.remove(c);
            st.consume(c, at)?;
            st.done(at)
        }
        Ir::Wait { chan, cont } => {
            st.consume(chan, at)?;
            walk(cont, st)
        }
        Ir::Server { chan, bind, body } => {
            st.consume(chan, at)?;
            st.done(at)?;
            let mut inner = St { exp: st.exp.clone(), ..Default::default() };
            inner.fresh(bind, at)?;
            walk(body, inner)
        }
        Ir::CallRepl { chan, bind, cont } => {
            if !st.exp.contains(chan) {
                return Err(format!("{at}: {chan} is not unrestricted"));
            }
            st.fresh(bind, at)?;
            walk(cont, st)
        }
        Ir::Affine { chan, cancel, cont } => {
            st.live(chan, at)?;
            let others: BTreeSet<&String> = st.lin.iter().filter(|n| *n != chan).collect();
            let listed: BTreeSet<&String> = cancel.iter().map(|(n, _)| n).collect();
            if others != listed {
                return Err(format!("{at}: cancel list of {chan} does not match the context"));
            }
            walk(cont, st)
        }
        Ir::Promote { chan, cont, .. } => {
            st.consume(chan, at)?;
            st.exp.insert(chan.clone());
            walk(cont, st)
        }
        Ir::CellNew { chan, init, .. } => {
            st.consume(chan, at)?;
            arg(init, &mut st, at)?;
            st.done(at)
        }
        Ir::Take { chan, bind, cont } => {
            st.live(chan, at)?;
            st.op(chan, CellOp::Take, at)?;
            st.fresh(bind, at)?;
            walk(cont, st)
        }
        Ir::Put { chan, arg: a, cont } => {
            st.live(chan, at)?;
            st.op(chan, CellOp::Put, at)?;
            arg(a, &mut st, at)?;
            walk(cont, st)
        }
        Ir::If { cond, then, els } => {
            st.expr(cond, at)?;
            walk(then, st.clone())?;
            walk(els, st)
        }
        Ir::Print { expr, cont, .. } | Ir::Sleep { ticks: expr, cont } => {
            st.expr(expr, at)?;
            walk(cont, st)
        }
    }
}
