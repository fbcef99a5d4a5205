//! Session type algebra: duality, unfolding, instantiation, equality and
//! well-formedness.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::diag::{Diagnostic, Span};
use crate::syntax::{RecFlag, TypeExpr, TypeGroup, TypePrefix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prim {
    Int,
    Str,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SessionType {
    Close,
    Wait,
    Send(Box<SessionType>, Box<SessionType>),
    Recv(Box<SessionType>, Box<SessionType>),
    Offer(Vec<(String, SessionType)>),
    Choice(Vec<(String, SessionType)>),
    Bang(Box<SessionType>),
    Quest(Box<SessionType>),
    Affine(Box<SessionType>),
    Coaffine(Box<SessionType>),
    State(Box<SessionType>),
    Usage(Box<SessionType>),
    /// A cell whose contents have been taken and not yet put back.
    StateLocked(Box<SessionType>),
    UsageLocked(Box<SessionType>),
    Rec(String, Box<SessionType>),
    Corec(String, Box<SessionType>),
    /// Type variable; the flag marks a dualized occurrence `~A`.
    Var(String, bool),
    Named { name: String, args: Vec<SessionType>, dual: bool },
    Prim(Prim),
    DualPrim(Prim),
}

use SessionType as T;

fn bx(t: T) -> Box<T> {
    Box::new(t)
}

impl SessionType {
    pub fn named(name: &str, args: Vec<T>) -> T {
        T::Named { name: name.to_string(), args, dual: false }
    }

    pub fn send(p: T, c: T) -> T {
        T::Send(bx(p), bx(c))
    }

    pub fn recv(p: T, c: T) -> T {
        T::Recv(bx(p), bx(c))
    }

    pub fn lint() -> T {
        T::Prim(Prim::Int)
    }

    /// Replace `Var(x, _)` occurrences with `f(dual_flag)`, stopping at
    /// binders that shadow `x`.
    fn map_var(&self, x: &str, f: &dyn Fn(bool) -> T) -> T {
        let m = |t: &T| t.map_var(x, f);
        match self {
            T::Var(v, d) if v == x => f(*d),
            T::Rec(v, _) | T::Corec(v, _) if v == x => self.clone(),
            _ => self.map_children(&m),
        }
    }

    fn map_children(&self, m: &dyn Fn(&T) -> T) -> T {
        self.try_map_children::<()>(&mut |t| Ok(m(t))).unwrap()
    }

    fn try_map_children<E>(&self, m: &mut dyn FnMut(&T) -> Result<T, E>) -> Result<T, E> {
        Ok(match self {
            T::Close | T::Wait | T::Var(..) | T::Prim(_) | T::DualPrim(_) => self.clone(),
            T::Send(a, b) => T::Send(bx(m(a)?), bx(m(b)?)),
            T::Recv(a, b) => T::Recv(bx(m(a)?), bx(m(b)?)),
            T::Offer(bs) => T::Offer(bs.iter().map(|(l, t)| Ok((l.clone(), m(t)?))).collect::<Result<_, E>>()?),
            T::Choice(bs) => T::Choice(bs.iter().map(|(l, t)| Ok((l.clone(), m(t)?))).collect::<Result<_, E>>()?),
            T::Bang(a) => T::Bang(bx(m(a)?)),
            T::Quest(a) => T::Quest(bx(m(a)?)),
            T::Affine(a) => T::Affine(bx(m(a)?)),
            T::Coaffine(a) => T::Coaffine(bx(m(a)?)),
            T::State(a) => T::State(bx(m(a)?)),
            T::Usage(a) => T::Usage(bx(m(a)?)),
            T::StateLocked(a) => T::StateLocked(bx(m(a)?)),
            T::UsageLocked(a) => T::UsageLocked(bx(m(a)?)),
            T::Rec(v, b) => T::Rec(v.clone(), bx(m(b)?)),
            T::Corec(v, b) => T::Corec(v.clone(), bx(m(b)?)),
            T::Named { name, args, dual } => T::Named {
                name: name.clone(),
                args: args.iter().map(|a| m(a)).collect::<Result<_, E>>()?,
                dual: *dual,
            },
        })
    }

    /// Substitute `t` for the variable `x` (and `dual t` for `~x`).
    pub fn subst(&self, x: &str, t: &T) -> T {
        let dt = dual(t);
        self.map_var(x, &|d| if d { dt.clone() } else { t.clone() })
    }

    /// Strip affine/exponential wrappers and report a primitive value type.
    pub fn producer_prim(&self) -> Option<Prim> {
        match self {
            T::Prim(p) => Some(*p),
            T::Affine(a) | T::Bang(a) => a.producer_prim(),
            _ => None,
        }
    }

    pub fn consumer_prim(&self) -> Option<Prim> {
        match self {
            T::DualPrim(p) => Some(*p),
            T::Coaffine(a) | T::Quest(a) => a.consumer_prim(),
            _ => None,
        }
    }
}

/// Structural involution.
pub fn dual(t: &T) -> T {
    match t {
        T::Close => T::Wait,
        T::Wait => T::Close,
        T::Send(a, b) => T::Recv(bx(dual(a)), bx(dual(b))),
        T::Recv(a, b) => T::Send(bx(dual(a)), bx(dual(b))),
        T::Offer(bs) => T::Choice(bs.iter().map(|(l, t)| (l.clone(), dual(t))).collect()),
        T::Choice(bs) => T::Offer(bs.iter().map(|(l, t)| (l.clone(), dual(t))).collect()),
        T::Bang(a) => T::Quest(bx(dual(a))),
        T::Quest(a) => T::Bang(bx(dual(a))),
        T::Affine(a) => T::Coaffine(bx(dual(a))),
        T::Coaffine(a) => T::Affine(bx(dual(a))),
        T::State(a) => T::Usage(bx(dual(a))),
        T::Usage(a) => T::State(bx(dual(a))),
        T::StateLocked(a) => T::UsageLocked(bx(dual(a))),
        T::UsageLocked(a) => T::StateLocked(bx(dual(a))),
        T::Rec(x, b) => T::Corec(x.clone(), bx(flip(&dual(b), x))),
        T::Corec(x, b) => T::Rec(x.clone(), bx(flip(&dual(b), x))),
        T::Var(v, d) => T::Var(v.clone(), !d),
        T::Named { name, args, dual } => T::Named { name: name.clone(), args: args.clone(), dual: !dual },
        T::Prim(p) => T::DualPrim(*p),
        T::DualPrim(p) => T::Prim(*p),
    }
}

fn flip(t: &T, x: &str) -> T {
    t.map_var(x, &|d| T::Var(x.to_string(), !d))
}

#[derive(Debug, Clone)]
pub struct TypeDefEntry {
    pub params: Vec<String>,
    pub body: T,
    pub rec: RecFlag,
    pub span: Span,
}

/// Named type definitions. Bodies are stored normalized once validated.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    pub defs: BTreeMap<String, TypeDefEntry>,
}

const UNFOLD_FUEL: usize = 64;

impl TypeEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&TypeDefEntry> {
        self.defs.get(name)
    }

    pub fn is_recursive(&self, name: &str) -> bool {
        self.defs.get(name).is_some_and(|d| d.rec != RecFlag::None)
    }

    /// Add a group without validating it; forward references are allowed, so
    /// validation runs once all groups are present.
    pub fn insert_group(&mut self, g: &TypeGroup) {
        for d in &g.defs {
            let body = resolve(&d.body, &d.params);
            self.defs.insert(
                d.name.clone(),
                TypeDefEntry { params: d.params.clone(), body, rec: g.rec, span: d.span },
            );
        }
    }

    /// Validate and normalize one stored definition in place.
    pub fn validate_def(&mut self, name: &str) -> Result<(), Diagnostic> {
        let entry = self.defs.get(name).cloned().expect("definition present");
        let err = |m: String| Diagnostic::error("ill-formed-type", m, entry.span);
        if entry.rec == RecFlag::None {
            let mut refs = HashSet::new();
            self.reachable(&entry.body, &mut refs);
            if refs.contains(name) {
                return Err(err(format!("type {name} refers to itself but is not declared rec or corec")));
            }
        }
        let body = self.well_formed(&entry.body).map_err(|d| err(d.message))?;
        let params = entry.params.iter().map(|p| T::Var(p.clone(), false)).collect();
        self.defs.get_mut(name).unwrap().body = body;
        self.whnf(&T::named(name, params)).map_err(|d| err(d.message))?;
        Ok(())
    }

    fn reachable(&self, t: &T, out: &mut HashSet<String>) {
        visit(t, &mut |t| {
            if let T::Named { name, .. } = t {
                if out.insert(name.clone()) {
                    if let Some(d) = self.defs.get(name) {
                        self.reachable(&d.body, out);
                    }
                }
            }
        });
    }

    /// Definition body with type arguments substituted.
    pub fn instantiate(&self, name: &str, args: &[T]) -> Result<T, Diagnostic> {
        let def = self
            .defs
            .get(name)
            .ok_or_else(|| Diagnostic::error("ill-formed-type", format!("unknown type {name}"), Span::default()))?;
        if def.params.len() != args.len() {
            return Err(Diagnostic::error(
                "ill-formed-type",
                format!("type {name} expects {} argument(s), got {}", def.params.len(), args.len()),
                Span::default(),
            ));
        }
        // Simultaneous substitution: rename params to fresh names first so an
        // argument mentioning another param is not substituted twice.
        let mut body = def.body.clone();
        for (i, p) in def.params.iter().enumerate() {
            body = body.subst(p, &T::Var(format!("'{i}"), false));
        }
        for (i, a) in args.iter().enumerate() {
            body = body.subst(&format!("'{i}"), a);
        }
        Ok(body)
    }

    /// One unfolding step of a named or recursive type; other types are
    /// returned unchanged.
    pub fn unfold(&self, t: &T) -> Result<T, Diagnostic> {
        match t {
            T::Named { name, args, dual: d } => {
                let body = self.instantiate(name, args)?;
                Ok(if *d { dual(&body) } else { body })
            }
            T::Rec(x, b) | T::Corec(x, b) => Ok(b.subst(x, t)),
            _ => Ok(t.clone()),
        }
    }

    /// Unfold until the head is a structural constructor.
    pub fn whnf(&self, t: &T) -> Result<T, Diagnostic> {
        let mut cur = t.clone();
        for _ in 0..UNFOLD_FUEL {
            match cur {
                T::Named { .. } | T::Rec(..) | T::Corec(..) => cur = self.unfold(&cur)?,
                _ => return Ok(cur),
            }
        }
        Err(Diagnostic::error(
            "ill-formed-type",
            format!("type {t} is not contractive"),
            Span::default(),
        ))
    }

    /// Check names, arities and contractiveness, and wrap cell contents as
    /// affine (state) or coaffine (usage) when they are not already
    /// disposable.
    pub fn well_formed(&self, t: &T) -> Result<T, Diagnostic> {
        let ill = |m: String| Diagnostic::error("ill-formed-type", m, Span::default());
        match t {
            T::Named { name, args, dual } => {
                let def = self.defs.get(name).ok_or_else(|| ill(format!("unknown type {name}")))?;
                if def.params.len() != args.len() {
                    return Err(ill(format!(
                        "type {name} expects {} argument(s), got {}",
                        def.params.len(),
                        args.len()
                    )));
                }
                let args = args.iter().map(|a| self.well_formed(a)).collect::<Result<_, _>>()?;
                Ok(T::Named { name: name.clone(), args, dual: *dual })
            }
            T::Rec(x, b) | T::Corec(x, b) => {
                let mut head = &**b;
                while let T::Rec(_, inner) | T::Corec(_, inner) = head {
                    head = inner;
                }
                if matches!(head, T::Var(v, _) if v == x) {
                    return Err(ill(format!("recursive type {t} is not contractive")));
                }
                t.try_map_children(&mut |c| self.well_formed(c))
            }
            T::State(a) | T::StateLocked(a) => {
                let inner = self.well_formed(a)?;
                let head = self.whnf(&inner)?;
                let inner = if matches!(head, T::Affine(_) | T::State(_)) { inner } else { T::Affine(bx(inner)) };
                Ok(if matches!(t, T::State(_)) { T::State(bx(inner)) } else { T::StateLocked(bx(inner)) })
            }
            T::Usage(a) | T::UsageLocked(a) => {
                let inner = self.well_formed(a)?;
                let head = self.whnf(&inner)?;
                let inner =
                    if matches!(head, T::Coaffine(_) | T::Usage(_)) { inner } else { T::Coaffine(bx(inner)) };
                Ok(if matches!(t, T::Usage(_)) { T::Usage(bx(inner)) } else { T::UsageLocked(bx(inner)) })
            }
            T::Offer(bs) | T::Choice(bs) => {
                let mut seen = HashSet::new();
                for (l, _) in bs {
                    if !seen.insert(l) {
                        return Err(ill(format!("duplicate label #{l}")));
                    }
                }
                if bs.is_empty() {
                    return Err(ill("a branch type needs at least one label".into()));
                }
                let bs: Vec<_> =
                    bs.iter().map(|(l, b)| Ok((l.clone(), self.well_formed(b)?))).collect::<Result<_, Diagnostic>>()?;
                Ok(if matches!(t, T::Offer(_)) { T::Offer(bs) } else { T::Choice(bs) })
            }
            _ => t.try_map_children(&mut |c| self.well_formed(c)),
        }
    }

    pub fn is_disposable(&self, t: &T) -> bool {
        matches!(
            self.whnf(t),
            Ok(T::Affine(_) | T::Coaffine(_) | T::State(_) | T::Usage(_) | T::Quest(_))
        )
    }

    /// Strict equality: non-recursive definitions are transparent, recursive
    /// ones are compared by name (and only unfolded against each other).
    pub fn type_equal(&self, a: &T, b: &T) -> bool {
        self.eq(a, b, &mut Vec::new(), &mut Vec::new(), true)
    }

    /// Full equi-recursive equivalence: every definition and binder is
    /// unfolded on demand, with a coinductive set of assumed pairs.
    pub fn equiv(&self, a: &T, b: &T) -> bool {
        self.eq(a, b, &mut Vec::new(), &mut Vec::new(), false)
    }

    /// Coinductive step: a pair already under comparison is assumed equal.
    /// Assumptions are scoped to the current derivation, so a failed branch
    /// cannot leak them.
    fn assuming(&self, a: &T, b: &T, seen: &mut Vec<(T, T)>, f: impl FnOnce(&mut Vec<(T, T)>) -> bool) -> bool {
        if seen.iter().any(|(x, y)| x == a && y == b) {
            return true;
        }
        seen.push((a.clone(), b.clone()));
        let r = f(seen);
        seen.pop();
        r
    }

    fn eq(&self, a: &T, b: &T, seen: &mut Vec<(T, T)>, bound: &mut Vec<(String, String)>, strict: bool) -> bool {
        let unfoldable = |t: &T| match t {
            T::Named { name, .. } => !strict || !self.is_recursive(name),
            T::Rec(..) | T::Corec(..) => !strict,
            _ => false,
        };
        if strict {
            match (a, b) {
                (T::Named { name: n1, args: a1, dual: d1 }, T::Named { name: n2, args: a2, dual: d2 })
                    if n1 == n2 && d1 == d2 && a1.len() == a2.len() =>
                {
                    if a1.iter().zip(a2).all(|(x, y)| self.eq(x, y, seen, bound, strict)) {
                        return true;
                    }
                }
                (T::Named { name: n1, .. }, T::Named { name: n2, .. })
                    if n1 != n2 && self.is_recursive(n1) && self.is_recursive(n2) =>
                {
                    return self.assuming(a, b, seen, |seen| match (self.unfold(a), self.unfold(b)) {
                        (Ok(x), Ok(y)) => self.eq(&x, &y, seen, bound, strict),
                        _ => false,
                    });
                }
                (T::Rec(x, b1), T::Rec(y, b2)) | (T::Corec(x, b1), T::Corec(y, b2)) => {
                    bound.push((x.clone(), y.clone()));
                    let r = self.eq(b1, b2, seen, bound, strict);
                    bound.pop();
                    return r;
                }
                _ => {}
            }
        }
        if unfoldable(a) || unfoldable(b) {
            if a == b && bound.is_empty() {
                return true;
            }
            let ua = if unfoldable(a) { self.unfold(a) } else { Ok(a.clone()) };
            let ub = if unfoldable(b) { self.unfold(b) } else { Ok(b.clone()) };
            return self.assuming(a, b, seen, |seen| match (ua, ub) {
                (Ok(x), Ok(y)) => self.eq(&x, &y, seen, bound, strict),
                _ => false,
            });
        }
        let mut eq = |x: &T, y: &T| self.eq(x, y, seen, bound, strict);
        match (a, b) {
            (T::Close, T::Close) | (T::Wait, T::Wait) => true,
            (T::Prim(p), T::Prim(q)) | (T::DualPrim(p), T::DualPrim(q)) => p == q,
            (T::Send(a1, b1), T::Send(a2, b2)) | (T::Recv(a1, b1), T::Recv(a2, b2)) => eq(a1, a2) && eq(b1, b2),
            (T::Offer(x), T::Offer(y)) | (T::Choice(x), T::Choice(y)) => {
                x.len() == y.len()
                    && x.iter().all(|(l, t)| y.iter().find(|(m, _)| m == l).is_some_and(|(_, u)| eq(t, u)))
            }
            (T::Bang(x), T::Bang(y))
            | (T::Quest(x), T::Quest(y))
            | (T::Affine(x), T::Affine(y))
            | (T::Coaffine(x), T::Coaffine(y))
            | (T::State(x), T::State(y))
            | (T::Usage(x), T::Usage(y))
            | (T::StateLocked(x), T::StateLocked(y))
            | (T::UsageLocked(x), T::UsageLocked(y)) => eq(x, y),
            (T::Var(x, d1), T::Var(y, d2)) => {
                d1 == d2
                    && match bound.iter().rev().find(|(p, q)| p == x || q == y) {
                        Some((p, q)) => p == x && q == y,
                        None => x == y,
                    }
            }
            (T::Named { name: n1, args: a1, dual: d1 }, T::Named { name: n2, args: a2, dual: d2 }) => {
                n1 == n2 && d1 == d2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| eq(x, y))
            }
            _ => false,
        }
    }
}

fn visit_children(t: &T, f: &mut dyn FnMut(&T)) {
    match t {
        T::Close | T::Wait | T::Var(..) | T::Prim(_) | T::DualPrim(_) => {}
        T::Send(a, b) | T::Recv(a, b) => {
            f(a);
            f(b);
        }
        T::Offer(bs) | T::Choice(bs) => bs.iter().for_each(|(_, t)| f(t)),
        T::Bang(a)
        | T::Quest(a)
        | T::Affine(a)
        | T::Coaffine(a)
        | T::State(a)
        | T::Usage(a)
        | T::StateLocked(a)
        | T::UsageLocked(a)
        | T::Rec(_, a)
        | T::Corec(_, a) => f(a),
        T::Named { args, .. } => args.iter().for_each(|t| f(t)),
    }
}

fn visit(t: &T, f: &mut dyn FnMut(&T)) {
    f(t);
    visit_children(t, &mut |c| visit(c, f));
}

/// Translate a parsed type; identifiers listed in `params` become variables.
pub fn resolve(te: &TypeExpr, params: &[String]) -> T {
    let r = |t: &TypeExpr| resolve(t, params);
    match te {
        TypeExpr::Close => T::Close,
        TypeExpr::Wait => T::Wait,
        TypeExpr::Lint => T::Prim(Prim::Int),
        TypeExpr::Lstring => T::Prim(Prim::Str),
        TypeExpr::Send(a, b) => T::Send(bx(r(a)), bx(r(b))),
        TypeExpr::Recv(a, b) => T::Recv(bx(r(a)), bx(r(b))),
        TypeExpr::Offer(bs) => T::Offer(bs.iter().map(|(l, t)| (l.clone(), r(t))).collect()),
        TypeExpr::Choice(bs) => T::Choice(bs.iter().map(|(l, t)| (l.clone(), r(t))).collect()),
        TypeExpr::Prefix(p, inner) => {
            let i = r(inner);
            match p {
                TypePrefix::Dual => dual(&i),
                TypePrefix::Bang => T::Bang(bx(i)),
                TypePrefix::Quest => T::Quest(bx(i)),
                TypePrefix::Affine => T::Affine(bx(i)),
                TypePrefix::Coaffine => T::Coaffine(bx(i)),
                TypePrefix::State => T::State(bx(i)),
                TypePrefix::StateLocked => T::StateLocked(bx(i)),
                TypePrefix::Usage => T::Usage(bx(i)),
                TypePrefix::UsageLocked => T::UsageLocked(bx(i)),
            }
        }
        TypeExpr::Name(n, args) if args.is_empty() && params.contains(n) => T::Var(n.clone(), false),
        TypeExpr::Name(n, args) if args.is_empty() && n == "Int" => T::Prim(Prim::Int),
        TypeExpr::Name(n, args) => T::named(n, args.iter().map(r).collect()),
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prim::Int => "lint",
            Prim::Str => "lstring",
        })
    }
}

impl fmt::Display for SessionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let branches = |f: &mut fmt::Formatter<'_>, bs: &[(String, T)]| -> fmt::Result {
            for (l, t) in bs {
                write!(f, " | #{l}: {t}")?;
            }
            f.write_str(" }")
        };
        match self {
            T::Close => f.write_str("close"),
            T::Wait => f.write_str("wait"),
            T::Send(a, b) => write!(f, "send {}; {b}", Paren(a)),
            T::Recv(a, b) => write!(f, "recv {}; {b}", Paren(a)),
            T::Offer(bs) => {
                f.write_str("offer of {")?;
                branches(f, bs)
            }
            T::Choice(bs) => {
                f.write_str("choice of {")?;
                branches(f, bs)
            }
            T::Bang(a) => write!(f, "!{a}"),
            T::Quest(a) => write!(f, "?{a}"),
            T::Affine(a) => write!(f, "affine {a}"),
            T::Coaffine(a) => write!(f, "coaffine {a}"),
            T::State(a) => write!(f, "state {a}"),
            T::Usage(a) => write!(f, "usage {a}"),
            T::StateLocked(a) => write!(f, "statel {a}"),
            T::UsageLocked(a) => write!(f, "usagel {a}"),
            T::Rec(x, b) => write!(f, "rec {x}. {b}"),
            T::Corec(x, b) => write!(f, "corec {x}. {b}"),
            T::Var(x, d) => write!(f, "{}{x}", if *d { "~" } else { "" }),
            T::Named { name, args, dual } => {
                if *dual {
                    f.write_str("~")?;
                }
                f.write_str(name)?;
                if !args.is_empty() {
                    let a: Vec<String> = args.iter().map(|t| t.to_string()).collect();
                    write!(f, "({})", a.join(", "))?;
                }
                Ok(())
            }
            T::Prim(p) => write!(f, "{p}"),
            T::DualPrim(p) => write!(f, "~{p}"),
        }
    }
}

struct Paren<'a>(&'a T);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            T::Send(..) | T::Recv(..) | T::Rec(..) | T::Corec(..) => write!(f, "({})", self.0),
            t => write!(f, "{t}"),
        }
    }
}
