//! Surface and core abstract syntax.
//!
//! The parser produces [`Process`] trees that may still contain the two sugar
//! forms [`ProcKind::Letc`] and [`ProcKind::Then`]; [`super::desugar`] removes
//! them. Everything else is already core: `c <- e` and `send c(e)` parse to the
//! same node, `pair` parses to a send type, and so on.

use crate::diag::Span;

/// Types as written, before name resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeExpr {
    Close,
    Wait,
    Lint,
    Lstring,
    Send(Box<TypeExpr>, Box<TypeExpr>),
    Recv(Box<TypeExpr>, Box<TypeExpr>),
    Offer(Vec<(String, TypeExpr)>),
    Choice(Vec<(String, TypeExpr)>),
    Prefix(TypePrefix, Box<TypeExpr>),
    Name(String, Vec<TypeExpr>),
}

impl TypeExpr {
    /// `~t`, cancelling a leading `~`.
    pub fn negated(&self) -> TypeExpr {
        match self {
            TypeExpr::Prefix(TypePrefix::Dual, inner) => (**inner).clone(),
            t => TypeExpr::Prefix(TypePrefix::Dual, Box::new(t.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypePrefix {
    Dual,
    Bang,
    Quest,
    Affine,
    Coaffine,
    State,
    StateLocked,
    Usage,
    UsageLocked,
}

impl TypePrefix {
    pub fn keyword(self) -> &'static str {
        match self {
            TypePrefix::Dual => "~",
            TypePrefix::Bang => "!",
            TypePrefix::Quest => "?",
            TypePrefix::Affine => "affine ",
            TypePrefix::Coaffine => "coaffine ",
            TypePrefix::State => "state ",
            TypePrefix::StateLocked => "statel ",
            TypePrefix::Usage => "usage ",
            TypePrefix::UsageLocked => "usagel ",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Str(String),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Names referenced by the expression, in order of appearance.
    pub fn names(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) | Expr::Str(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Neg(e) => e.names(out),
            Expr::Bin(_, a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }
}

/// Argument of `send`, `put` and `cell`, and of procedure calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Name(String),
    Expr(Expr),
    Closure(String, Box<Process>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub kind: ProcKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProcKind {
    Inert,
    Forward(String, String),
    /// `implicit` marks a composition that came from `terminal; P`.
    Par { left: Box<Process>, right: Box<Process>, implicit: bool },
    Cut { chan: String, ty: Option<TypeExpr>, left: Box<Process>, right: Box<Process> },
    Share { chan: String, left: Box<Process>, right: Box<Process> },
    Call { name: String, type_args: Vec<TypeExpr>, args: Vec<Arg>, exp_args: Vec<Expr> },
    Send { chan: String, arg: Arg, cont: Box<Process> },
    Recv { chan: String, bind: String, cont: Box<Process> },
    Select { label: String, chan: String, cont: Box<Process> },
    Case { chan: String, branches: Vec<(String, Process)> },
    Close(String),
    Wait { chan: String, cont: Box<Process> },
    Server { chan: String, bind: String, body: Box<Process> },
    CallRepl { chan: String, bind: String, cont: Box<Process> },
    Affine { chan: String, cont: Box<Process> },
    Use { chan: String, cont: Box<Process> },
    Discard(String),
    /// `drop` / `release`: a cell drop or a coaffine discard, decided by type.
    Drop(String),
    Cell { chan: String, init: Arg },
    Take { chan: String, bind: String, cont: Box<Process> },
    Put { chan: String, arg: Arg, cont: Box<Process> },
    If { cond: Expr, then: Box<Process>, els: Box<Process> },
    Print { expr: Expr, newline: bool, cont: Box<Process> },
    Sleep { ticks: Expr, cont: Box<Process> },
    // Sugar, removed by desugaring.
    Letc { chan: String, ty: Option<TypeExpr>, body: Box<Process>, cont: Box<Process> },
    Then { first: Box<Process>, cont: Box<Process> },
}

impl Process {
    pub fn new(kind: ProcKind, span: Span) -> Self {
        Process { kind, span }
    }

    pub fn is_core(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |p| {
            if matches!(p.kind, ProcKind::Letc { .. } | ProcKind::Then { .. }) {
                ok = false;
            }
        });
        ok
    }

    /// Pre-order traversal, including closure bodies.
    pub fn visit(&self, f: &mut dyn FnMut(&Process)) {
        f(self);
        for child in self.children() {
            child.visit(f);
        }
    }

    pub fn children(&self) -> Vec<&Process> {
        fn arg(a: &Arg) -> Option<&Process> {
            match a {
                Arg::Closure(_, b) => Some(b),
                _ => None,
            }
        }
        use ProcKind::*;
        match &self.kind {
            Inert | Forward(..) | Close(_) | Discard(_) | Drop(_) => vec![],
            Call { args, .. } => args.iter().filter_map(arg).collect(),
            Par { left, right, .. } | Cut { left, right, .. } | Share { left, right, .. } => {
                vec![left, right]
            }
            Send { arg: a, cont, .. } | Put { arg: a, cont, .. } => {
                arg(a).into_iter().chain(std::iter::once(&**cont)).collect()
            }
            Cell { init, .. } => arg(init).into_iter().collect(),
            Recv { cont, .. }
            | Select { cont, .. }
            | Wait { cont, .. }
            | CallRepl { cont, .. }
            | Affine { cont, .. }
            | Use { cont, .. }
            | Take { cont, .. }
            | Print { cont, .. }
            | Sleep { cont, .. } => vec![cont],
            Server { body, .. } => vec![body],
            Case { branches, .. } => branches.iter().map(|(_, p)| p).collect(),
            If { then, els, .. } => vec![then, els],
            Letc { body, cont, .. } => vec![body, cont],
            Then { first, cont } => vec![first, cont],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecFlag {
    None,
    Rec,
    Corec,
    GenRec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: TypeExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcDef {
    pub name: String,
    pub rec: RecFlag,
    pub type_params: Vec<String>,
    pub params: Vec<Param>,
    pub exp_params: Vec<Param>,
    pub body: Process,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: TypeExpr,
    pub span: Span,
}

/// A group of type definitions joined by `and`; singleton groups are common.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeGroup {
    pub rec: RecFlag,
    pub defs: Vec<TypeDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Proc(ProcDef),
    Types(TypeGroup),
}

impl Decl {
    pub fn names(&self) -> Vec<&str> {
        match self {
            Decl::Proc(p) => vec![&p.name],
            Decl::Types(g) => g.defs.iter().map(|d| d.name.as_str()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplCommand {
    Invoke { name: String, exp_args: Vec<Expr>, span: Span },
    Declare(Vec<Decl>),
    Empty,
}
