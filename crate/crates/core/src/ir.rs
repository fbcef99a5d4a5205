//! Elaborated process trees produced by the checker and run by the runtime.
//!
//! Elaboration makes every typing decision explicit: how composed contexts
//! are split, where coaffine endpoints are used, which names become
//! unrestricted data, and what an affine cancellation must dispose of.

use std::sync::Arc;

use crate::syntax::Expr;

pub type Name = String;

/// How a resource is released when its owner is cancelled or a cell holding
/// it is freed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposal {
    Discard,
    DropCell,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrArg {
    /// A linear name, moved.
    Name(Name),
    /// A primitive value computed from unrestricted names and literals.
    Expr(Expr),
    /// A process wired to a fresh channel; `captures` are the linear names it
    /// takes from the enclosing context.
    Closure { bind: Name, body: Arc<Ir>, captures: Vec<Name> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ir {
    Inert,
    Forward(Name, Name),
    /// Fulfil a value obligation on `chan` with a primitive value.
    Deliver { chan: Name, expr: Expr },
    Par { left_names: Vec<Name>, left: Arc<Ir>, right: Arc<Ir> },
    Cut { chan: Name, left_names: Vec<Name>, left: Arc<Ir>, right: Arc<Ir> },
    Share { chan: Name, left_names: Vec<Name>, left: Arc<Ir>, right: Arc<Ir> },
    Call { proc: Name, lin_args: Vec<IrArg>, exp_args: Vec<Expr> },
    Send { chan: Name, arg: IrArg, cont: Arc<Ir> },
    Recv { chan: Name, bind: Name, cont: Arc<Ir> },
    Select { chan: Name, label: String, cont: Arc<Ir> },
    Case { chan: Name, branches: Vec<(String, Arc<Ir>)> },
    Close(Name),
    Wait { chan: Name, cont: Arc<Ir> },
    Server { chan: Name, bind: Name, body: Arc<Ir> },
    CallRepl { chan: Name, bind: Name, cont: Arc<Ir> },
    Affine { chan: Name, cancel: Vec<(Name, Disposal)>, cont: Arc<Ir> },
    Use { chan: Name, cont: Arc<Ir> },
    Discard(Name),
    /// Move a linear name into the unrestricted context. With `data`, the
    /// name denotes a primitive value that is awaited first.
    Promote { chan: Name, data: bool, cont: Arc<Ir> },
    CellNew { chan: Name, init: IrArg, dispose: Disposal },
    Take { chan: Name, bind: Name, cont: Arc<Ir> },
    Put { chan: Name, arg: IrArg, cont: Arc<Ir> },
    DropCell(Name),
    If { cond: Expr, then: Arc<Ir>, els: Arc<Ir> },
    Print { expr: Expr, newline: bool, cont: Arc<Ir> },
    Sleep { ticks: Expr, cont: Arc<Ir> },
}

impl Ir {
    /// Short event name used in traces.
    pub fn tag(&self) -> &'static str {
        match self {
            Ir::Inert => "inert",
            Ir::Forward(..) => "fwd",
            Ir::Deliver { .. } => "deliver",
            Ir::Par { .. } => "par",
            Ir::Cut { .. } => "cut",
            Ir::Share { .. } => "share",
            Ir::Call { .. } => "call",
            Ir::Send { .. } => "send",
            Ir::Recv { .. } => "recv",
            Ir::Select { .. } => "select",
            Ir::Case { .. } => "case",
            Ir::Close(_) => "close",
            Ir::Wait { .. } => "wait",
            Ir::Server { .. } => "server",
            Ir::CallRepl { .. } => "callrepl",
            Ir::Affine { .. } => "affine",
            Ir::Use { .. } => "use",
            Ir::Discard(_) => "discard",
            Ir::Promote { .. } => "promote",
            Ir::CellNew { .. } => "cell",
            Ir::Take { .. } => "take",
            Ir::Put { .. } => "put",
            Ir::DropCell(_) => "drop",
            Ir::If { .. } => "if",
            Ir::Print { .. } => "print",
            Ir::Sleep { .. } => "sleep",
        }
    }
}
