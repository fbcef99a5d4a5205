//! Linear session type checking and elaboration to [`crate::ir`].

mod audit;
mod guard;
mod process;
mod protocol;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

pub use audit::audit_proc;
pub use guard::check_guardedness;
pub use protocol::{check_cell_protocol, CellOp};

use crate::diag::{Diagnostic, Span};
use crate::ir::Ir;
use crate::syntax::{desugar_decl, Arg, Decl, Expr, ProcDef, ProcKind, Process, RecFlag};
use crate::types::{resolve, Prim, SessionType, TypeEnv};

/// Type of an unrestricted (exponential) name.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpTy {
    /// A primitive value, usable any number of times in expressions.
    Data(Prim),
    /// A replicated session; each `call` yields a fresh session of this type.
    Session(SessionType),
}

#[derive(Debug, Clone)]
pub struct ProcSig {
    pub name: String,
    pub rec: RecFlag,
    pub type_params: Vec<String>,
    pub params: Vec<(String, SessionType)>,
    pub exp_params: Vec<(String, ExpTy)>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct CheckedProc {
    pub sig: ProcSig,
    pub body: Arc<Ir>,
}

/// A checked program: type definitions plus elaborated procedures.
#[derive(Debug, Clone, Default)]
pub struct Program {
    pub types: TypeEnv,
    pub procs: BTreeMap<String, Arc<CheckedProc>>,
}

impl Program {
    pub fn get(&self, name: &str) -> Option<&Arc<CheckedProc>> {
        self.procs.get(name)
    }
}

/// Check every declaration. Each faulty declaration contributes its first
/// diagnostic; the order follows the source.
pub fn check_program(decls: &[Decl]) -> Result<Program, Vec<Diagnostic>> {
    let decls: Vec<Decl> = decls.iter().cloned().map(desugar_decl).collect();
    let mut diags: Vec<(usize, Diagnostic)> = Vec::new();
    let mut types = TypeEnv::new();
    let mut type_names = HashSet::new();
    let mut proc_names = HashSet::new();
    let mut procs: Vec<(usize, &ProcDef)> = Vec::new();
    let mut type_decls: Vec<(usize, String)> = Vec::new();

    for (i, d) in decls.iter().enumerate() {
        match d {
            Decl::Types(g) => {
                let dup = g.defs.iter().find(|t| !type_names.insert(t.name.clone()));
                if let Some(t) = dup {
                    let msg = format!("type {} is defined more than once", t.name);
                    diags.push((i, Diagnostic::error("duplicate-definition", msg, t.span)));
                    continue;
                }
                types.insert_group(g);
                type_decls.extend(g.defs.iter().map(|t| (i, t.name.clone())));
            }
            Decl::Proc(p) => {
                if !proc_names.insert(p.name.clone()) {
                    let msg = format!("procedure {} is defined more than once", p.name);
                    diags.push((i, Diagnostic::error("duplicate-definition", msg, p.span)));
                    continue;
                }
                procs.push((i, p));
            }
        }
    }

    let mut bad_decls = BTreeSet::new();
    for (i, name) in &type_decls {
        if bad_decls.contains(i) {
            continue;
        }
        if let Err(e) = types.validate_def(name) {
            bad_decls.insert(*i);
            diags.push((*i, e));
        }
    }

    let mut sigs = BTreeMap::new();
    let mut ok_procs = Vec::new();
    for (i, p) in &procs {
        match signature(&types, p) {
            Ok(sig) => {
                sigs.insert(p.name.clone(), sig);
                ok_procs.push((*i, *p));
            }
            Err(e) => diags.push((*i, e)),
        }
    }

    let guard_errs: BTreeMap<String, Diagnostic> =
        check_guardedness(&procs.iter().map(|(_, p)| *p).collect::<Vec<_>>()).into_iter().collect();

    let mut checked = BTreeMap::new();
    for (i, p) in ok_procs {
        if let Some(d) = guard_errs.get(&p.name) {
            diags.push((i, d.clone()));
            continue;
        }
        let sig = &sigs[&p.name];
        match process::check_body(&types, &sigs, sig, &p.body) {
            Ok(body) => {
                if let Err(msg) = audit_proc(&types, sig, &body) {
                    diags.push((i, Diagnostic::error("internal-audit", msg, p.span)));
                    continue;
                }
                checked.insert(p.name.clone(), Arc::new(CheckedProc { sig: sig.clone(), body: Arc::new(body) }));
            }
            Err(e) => diags.push((i, e)),
        }
    }

    if diags.is_empty() {
        Ok(Program { types, procs: checked })
    } else {
        diags.sort_by_key(|(i, d)| (*i, d.span));
        Err(diags.into_iter().map(|(_, d)| d).collect())
    }
}

fn signature(types: &TypeEnv, p: &ProcDef) -> Result<ProcSig, Diagnostic> {
    let mut params = Vec::new();
    let mut seen = HashSet::new();
    for prm in p.params.iter().chain(&p.exp_params) {
        if !seen.insert(&prm.name) {
            let msg = format!("parameter {} is declared twice", prm.name);
            return Err(Diagnostic::error("duplicate-definition", msg, prm.span));
        }
    }
    for prm in &p.params {
        let t = types
            .well_formed(&resolve(&prm.ty, &p.type_params))
            .map_err(|e| Diagnostic::error(e.rule, e.message, prm.span))?;
        params.push((prm.name.clone(), t));
    }
    let mut exp_params = Vec::new();
    for prm in &p.exp_params {
        let t = types
            .well_formed(&resolve(&prm.ty, &p.type_params))
            .map_err(|e| Diagnostic::error(e.rule, e.message, prm.span))?;
        let e = match data_prim(types, &t).or_else(|| value_prim(types, &t)) {
            Some(p) => ExpTy::Data(p),
            None => match types.whnf(&t) {
                Ok(SessionType::Quest(inner)) => ExpTy::Session(*inner),
                _ => ExpTy::Session(t),
            },
        };
        exp_params.push((prm.name.clone(), e));
    }
    Ok(ProcSig {
        name: p.name.clone(),
        rec: p.rec,
        type_params: p.type_params.clone(),
        params,
        exp_params,
        span: p.span,
    })
}

/// The primitive carried by a consumer-side value type such as `~lint`,
/// `coaffine ~lint` or `?~lint`.
pub fn data_prim(types: &TypeEnv, t: &SessionType) -> Option<Prim> {
    match types.whnf(t).ok()? {
        SessionType::DualPrim(p) => Some(p),
        SessionType::Coaffine(x) | SessionType::Quest(x) => data_prim(types, &x),
        _ => None,
    }
}

/// The primitive produced by a value type such as `lint`, `!lint` or
/// `affine lint`.
pub fn value_prim(types: &TypeEnv, t: &SessionType) -> Option<Prim> {
    match types.whnf(t).ok()? {
        SessionType::Prim(p) => Some(p),
        SessionType::Affine(x) | SessionType::Bang(x) => value_prim(types, &x),
        _ => None,
    }
}

/// Parse and check a whole source file.
pub fn check_source(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let decls = crate::syntax::parse_source(source).map_err(|d| vec![d])?;
    check_program(&decls)
}

/// Validate a top-level invocation such as `main_sa(;20)`.
pub fn check_entry(program: &Program, name: &str, exp_args: &[Expr], span: Span) -> Result<(), Diagnostic> {
    let Some(p) = program.get(name) else {
        return Err(Diagnostic::error("unknown-proc", format!("no procedure named {name}"), span));
    };
    if !p.sig.params.is_empty() {
        let msg = format!("{name} has linear parameters and cannot be run directly");
        return Err(Diagnostic::error("arity", msg, span));
    }
    if p.sig.exp_params.len() != exp_args.len() {
        let msg = format!("{name} expects {} argument(s), got {}", p.sig.exp_params.len(), exp_args.len());
        return Err(Diagnostic::error("arity", msg, span));
    }
    for ((pn, ty), arg) in p.sig.exp_params.iter().zip(exp_args) {
        let ok = match (ty, arg) {
            (ExpTy::Data(Prim::Int), Expr::Int(_) | Expr::Neg(_)) => true,
            (ExpTy::Data(Prim::Str), Expr::Str(_)) => true,
            _ => false,
        };
        if !ok || !arg.names_empty() {
            let msg = format!("argument for {pn} must be a literal of the parameter's type");
            return Err(Diagnostic::error("type-mismatch", msg, span));
        }
    }
    Ok(())
}

impl Expr {
    fn names_empty(&self) -> bool {
        let mut v = Vec::new();
        self.names(&mut v);
        v.is_empty()
    }
}

/// Free names of a process, respecting binders.
pub fn free_names(p: &Process) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    free_into(p, &mut out);
    out
}

fn free_arg(a: &Arg, out: &mut BTreeSet<String>) {
    match a {
        Arg::Name(n) => {
            out.insert(n.clone());
        }
        Arg::Expr(e) => free_expr(e, out),
        Arg::Closure(x, body) => {
            let mut inner = free_names(body);
            inner.remove(x);
            out.extend(inner);
        }
    }
}

fn free_expr(e: &Expr, out: &mut BTreeSet<String>) {
    let mut v = Vec::new();
    e.names(&mut v);
    out.extend(v);
}

fn free_into(p: &Process, out: &mut BTreeSet<String>) {
    use ProcKind::*;
    let bound_in = |bind: &str, cont: &Process, out: &mut BTreeSet<String>| {
        let mut inner = free_names(cont);
        inner.remove(bind);
        out.extend(inner);
    };
    match &p.kind {
        Inert => {}
        Forward(a, b) => {
            out.insert(a.clone());
            out.insert(b.clone());
        }
        Par { left, right, .. } | Then { first: left, cont: right } => {
            free_into(left, out);
            free_into(right, out);
        }
        Share { chan, left, right } => {
            out.insert(chan.clone());
            free_into(left, out);
            free_into(right, out);
        }
        Cut { chan, left, right, .. } | Letc { chan, body: left, cont: right, .. } => {
            let mut inner = free_names(left);
            inner.extend(free_names(right));
            inner.remove(chan);
            out.extend(inner);
        }
        Call { args, exp_args, .. } => {
            args.iter().for_each(|a| free_arg(a, out));
            exp_args.iter().for_each(|e| free_expr(e, out));
        }
        Send { chan, arg, cont } | Put { chan, arg, cont } => {
            out.insert(chan.clone());
            free_arg(arg, out);
            free_into(cont, out);
        }
        Recv { chan, bind, cont } | Take { chan, bind, cont } | CallRepl { chan, bind, cont } => {
            out.insert(chan.clone());
            bound_in(bind, cont, out);
        }
        Server { chan, bind, body } => {
            out.insert(chan.clone());
            bound_in(bind, body, out);
        }
        Select { chan, cont, .. } | Wait { chan, cont } | Affine { chan, cont } | Use { chan, cont } => {
            out.insert(chan.clone());
            free_into(cont, out);
        }
        Case { chan, branches } => {
            out.insert(chan.clone());
            branches.iter().for_each(|(_, b)| free_into(b, out));
        }
        Close(c) | Discard(c) | Drop(c) => {
            out.insert(c.clone());
        }
        Cell { chan, init } => {
            out.insert(chan.clone());
            free_arg(init, out);
        }
        If { cond, then, els } => {
            free_expr(cond, out);
            free_into(then, out);
            free_into(els, out);
        }
        Print { expr, cont, .. } | Sleep { ticks: expr, cont } => {
            free_expr(expr, out);
            free_into(cont, out);
        }
    }
}
