use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::RuntimeError;
use crate::ir::Ir;
use crate::syntax::{BinOp, Expr};

pub type Env = BTreeMap<String, Value>;

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Str(Arc<str>),
    Bool(bool),
    /// One end of a session channel.
    Ep(usize),
    /// A usage of a mutable cell.
    Cell(usize),
    Replica(Arc<Replica>),
}

/// A replicated server: every call runs a fresh copy of `body` with `bind`
/// wired to the caller.
#[derive(Debug)]
pub struct Replica {
    pub bind: String,
    pub body: Arc<Ir>,
    pub exp: Env,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Ep(e) => write!(f, "<channel {e}>"),
            Value::Cell(c) => write!(f, "<cell {c}>"),
            Value::Replica(_) => f.write_str("<server>"),
        }
    }
}

fn arith(op: &str, a: i64, b: i64) -> RuntimeError {
    RuntimeError::Arithmetic(format!("{a} {op} {b} overflows"))
}

pub fn eval(e: &Expr, env: &Env) -> Result<Value, RuntimeError> {
    Ok(match e {
        Expr::Int(n) => Value::Int(*n),
        Expr::Str(s) => Value::Str(s.as_str().into()),
        Expr::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| RuntimeError::Internal(format!("unbound value {v}")))?,
        Expr::Neg(a) => match eval(a, env)? {
            Value::Int(n) => Value::Int(n.checked_neg().ok_or_else(|| RuntimeError::Arithmetic(format!("-({n}) overflows")))?),
            v => return Err(RuntimeError::Internal(format!("cannot negate {v}"))),
        },
        Expr::Bin(op, a, b) => {
            let (x, y) = (eval(a, env)?, eval(b, env)?);
            match (op, &x, &y) {
                (BinOp::Add, Value::Str(_), _) | (BinOp::Add, _, Value::Str(_)) => Value::Str(format!("{x}{y}").into()),
                (BinOp::Eq, Value::Int(p), Value::Int(q)) => Value::Bool(p == q),
                (BinOp::Eq, Value::Str(p), Value::Str(q)) => Value::Bool(p == q),
                (BinOp::Eq, Value::Bool(p), Value::Bool(q)) => Value::Bool(p == q),
                (_, Value::Int(p), Value::Int(q)) => {
                    let (p, q) = (*p, *q);
                    Value::Int(match op {
                        BinOp::Add => p.checked_add(q).ok_or_else(|| arith("+", p, q))?,
                        BinOp::Sub => p.checked_sub(q).ok_or_else(|| arith("-", p, q))?,
                        BinOp::Mul => p.checked_mul(q).ok_or_else(|| arith("*", p, q))?,
                        BinOp::Div | BinOp::Mod if q == 0 => {
                            return Err(RuntimeError::Arithmetic(format!("division of {p} by zero")))
                        }
                        BinOp::Div => p.checked_div(q).ok_or_else(|| arith("/", p, q))?,
                        BinOp::Mod => p.checked_rem(q).ok_or_else(|| arith("mod", p, q))?,
                        BinOp::Eq => unreachable!(),
                    })
                }
                _ => return Err(RuntimeError::Internal(format!("ill-typed operands {x} and {y}"))),
            }
        }
    })
}
