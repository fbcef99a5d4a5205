pub mod checker;
pub mod corpus;
pub mod diag;
pub mod ir;
pub mod runtime;
pub mod session;
pub mod syntax;
pub mod types;

pub use checker::{check_program, check_source, CheckedProc, ExpTy, ProcSig, Program};
pub use diag::{Diagnostic, Severity, Span};
pub use types::{dual, Prim, SessionType, TypeEnv};
pub use runtime::{run_program, Leaks, Outcome, RunConfig, RuntimeError, Value};
