use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::sync::Arc;

use super::value::{eval, Env, Replica, Value};
use super::{Leaks, RuntimeError};
use crate::checker::Program;
use crate::ir::{Ir, IrArg};

type R<T> = Result<T, RuntimeError>;

#[derive(Debug)]
enum Msg {
    /// A payload; sends carry an acknowledgement id so the sender can wait
    /// for the receiver.
    Val(Value, Option<u64>),
    Label(String),
    Close,
    Use,
    Discard,
}

#[derive(Debug)]
struct Endpoint {
    peer: usize,
    inbox: VecDeque<Msg>,
    done: bool,
}

#[derive(Debug)]
struct Thunk {
    bind: String,
    body: Arc<Ir>,
    lin: Env,
    exp: Env,
}

#[derive(Debug)]
enum Content {
    Val(Value),
    Thunk(Thunk),
    Held,
}

#[derive(Debug)]
struct CellObj {
    content: Content,
    refs: usize,
    waiters: VecDeque<u64>,
}

#[derive(Debug)]
pub(super) struct Task {
    code: Arc<Ir>,
    lin: Env,
    exp: Env,
    ack: Option<u64>,
    wake: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Progress {
    Ran,
    Blocked,
    Sleeping,
}

enum Next {
    Cont(Arc<Ir>),
    Done,
    Blocked,
}

pub(super) struct Machine<'p> {
    program: &'p Program,
    eps: Vec<Endpoint>,
    cells: BTreeMap<usize, CellObj>,
    next_cell: usize,
    pub(super) tasks: BTreeMap<u64, Task>,
    next_task: u64,
    pending: BTreeSet<u64>,
    next_ack: u64,
    pub(super) clock: u64,
    pub(super) steps: u64,
    pub(super) stdout: String,
    pub(super) trace: Option<Vec<String>>,
    echo: bool,
}

impl<'p> Machine<'p> {
    pub(super) fn new(program: &'p Program, trace: bool, echo: bool) -> Self {
        Machine {
            program,
            eps: Vec::new(),
            cells: BTreeMap::new(),
            next_cell: 0,
            tasks: BTreeMap::new(),
            next_task: 0,
            pending: BTreeSet::new(),
            next_ack: 0,
            clock: 0,
            steps: 0,
            stdout: String::new(),
            trace: trace.then(Vec::new),
            echo,
        }
    }

    pub(super) fn spawn(&mut self, code: Arc<Ir>, lin: Env, exp: Env) -> u64 {
        let id = self.next_task;
        self.next_task += 1;
        self.tasks.insert(id, Task { code, lin, exp, ack: None, wake: 0 });
        id
    }

    pub(super) fn task_count(&self) -> u64 {
        self.next_task
    }

    pub(super) fn sleeping_until(&self) -> Option<u64> {
        self.tasks.values().map(|t| t.wake).filter(|w| *w > self.clock).min()
    }

    pub(super) fn leaks(&self) -> Leaks {
        let live = |e: &Endpoint| !e.done || !e.inbox.is_empty();
        let channels = self.eps.chunks(2).filter(|pair| pair.iter().any(live)).count();
        Leaks { channels, cells: self.cells.len(), tasks: self.tasks.len() }
    }

    pub(super) fn deadlock_report(&self) -> String {
        let lines: Vec<String> = self
            .tasks
            .iter()
            .map(|(id, t)| {
                let what = match t.ack {
                    Some(a) if self.pending.contains(&a) => "waiting for a receiver".to_string(),
                    _ => format!("blocked at {}", describe(&t.code)),
                };
                format!("task {id} {what}")
            })
            .collect();
        lines.join("; ")
    }

    fn event(&mut self, tid: u64, what: &str) {
        if let Some(tr) = &mut self.trace {
            let line = format!("step {} task {tid} {what}", self.steps);
            if self.echo {
                eprintln!("{line}");
            }
            tr.push(line);
        }
    }

    fn output(&mut self, s: &str) {
        if self.echo {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(s.as_bytes());
            let _ = out.flush();
        }
        self.stdout.push_str(s);
    }

    fn channel(&mut self) -> (usize, usize) {
        let a = self.eps.len();
        self.eps.push(Endpoint { peer: a + 1, inbox: VecDeque::new(), done: false });
        self.eps.push(Endpoint { peer: a, inbox: VecDeque::new(), done: false });
        (a, a + 1)
    }

    /// Deliver a message to the endpoint `to`; an endpoint nobody listens
    /// on any more disposes of it instead.
    fn deliver_to(&mut self, to: usize, msg: Msg) {
        if self.eps[to].done {
            self.dispose_msg(msg);
        } else {
            self.eps[to].inbox.push_back(msg);
        }
    }

    fn send(&mut self, from: usize, msg: Msg) {
        let to = self.eps[from].peer;
        self.deliver_to(to, msg);
    }

    fn pop(&mut self, e: usize) -> Option<Msg> {
        let m = self.eps[e].inbox.pop_front();
        if let Some(Msg::Val(_, Some(a))) = &m {
            self.pending.remove(a);
        }
        m
    }

    /// Retire an endpoint, disposing of anything still queued on it.
    fn close_out(&mut self, e: usize) {
        self.eps[e].done = true;
        while let Some(m) = self.pop(e) {
            self.dispose_msg(m);
        }
    }

    fn dispose_msg(&mut self, m: Msg) {
        if let Msg::Val(v, ack) = m {
            if let Some(a) = ack {
                self.pending.remove(&a);
            }
            self.dispose(v);
        }
    }

    /// Release a linear value nobody will use. Endpoints signal a discard
    /// to their producer; an endpoint that turns out to carry a cell gets
    /// the cell disposed on delivery, since its consumer is gone.
    fn dispose(&mut self, v: Value) {
        match v {
            Value::Ep(e) => {
                self.close_out(e);
                self.send(e, Msg::Discard);
            }
            Value::Cell(c) => self.drop_cell(c),
            Value::Int(_) | Value::Str(_) | Value::Bool(_) | Value::Replica(_) => {}
        }
    }

    fn drop_cell(&mut self, c: usize) {
        let cell = self.cells.get_mut(&c).expect("live cell");
        cell.refs -= 1;
        if cell.refs > 0 {
            return;
        }
        let cell = self.cells.remove(&c).unwrap();
        match cell.content {
            Content::Val(v) => self.dispose(v),
            Content::Thunk(th) => {
                let e = self.force(th);
                self.dispose(Value::Ep(e));
            }
            Content::Held => {}
        }
    }

    /// Start a stored closure and return the endpoint facing it.
    fn force(&mut self, th: Thunk) -> usize {
        let (inner, outer) = self.channel();
        let mut lin = th.lin;
        lin.insert(th.bind, Value::Ep(inner));
        self.spawn(th.body, lin, th.exp);
        outer
    }

    /// Splice two endpoints: their peers talk directly from now on.
    fn splice(&mut self, a: usize, b: usize) {
        let (pa, pb) = (self.eps[a].peer, self.eps[b].peer);
        if pa == b {
            self.close_out(a);
            self.close_out(b);
            return;
        }
        let from_a: Vec<Msg> = self.eps[a].inbox.drain(..).collect();
        let from_b: Vec<Msg> = self.eps[b].inbox.drain(..).collect();
        for m in from_a {
            self.deliver_to(pb, m);
        }
        for m in from_b {
            self.deliver_to(pa, m);
        }
        self.eps[pa].peer = pb;
        self.eps[pb].peer = pa;
        self.eps[a].done = true;
        self.eps[b].done = true;
    }

    /// Fulfil endpoint `e` with a value and retire it.
    fn resolve(&mut self, e: usize, v: Value) {
        self.send(e, Msg::Val(v, None));
        self.close_out(e);
    }

    fn new_cell(&mut self, content: Content) -> usize {
        let id = self.next_cell;
        self.next_cell += 1;
        self.cells.insert(id, CellObj { content, refs: 1, waiters: VecDeque::new() });
        id
    }

    /// Run one step of a task.
    pub(super) fn step(&mut self, tid: u64) -> R<Progress> {
        let Some(mut t) = self.tasks.remove(&tid) else { return Ok(Progress::Blocked) };
        if t.wake > self.clock {
            self.tasks.insert(tid, t);
            return Ok(Progress::Sleeping);
        }
        if let Some(a) = t.ack {
            if self.pending.contains(&a) {
                self.tasks.insert(tid, t);
                return Ok(Progress::Blocked);
            }
            t.ack = None;
        }
        let code = t.code.clone();
        match self.exec(tid, &mut t, &code) {
            Ok(Next::Cont(c)) => {
                self.steps += 1;
                t.code = c;
                self.tasks.insert(tid, t);
                Ok(Progress::Ran)
            }
            Ok(Next::Done) => {
                self.steps += 1;
                if let Some(n) = t.lin.keys().next() {
                    return Err(RuntimeError::Internal(format!("task {tid} ended with {n} unconsumed")));
                }
                Ok(Progress::Ran)
            }
            Ok(Next::Blocked) => {
                self.tasks.insert(tid, t);
                Ok(Progress::Blocked)
            }
            Err(e) => Err(e),
        }
    }

    fn take(t: &mut Task, n: &str) -> R<Value> {
        t.lin.remove(n).ok_or_else(|| RuntimeError::Internal(format!("{n} is not bound")))
    }

    fn ep(t: &Task, n: &str) -> R<usize> {
        match t.lin.get(n) {
            Some(Value::Ep(e)) => Ok(*e),
            Some(v) => Err(RuntimeError::Internal(format!("{n} holds {v}, not a channel"))),
            None => Err(RuntimeError::Internal(format!("{n} is not bound"))),
        }
    }

    fn split(t: &mut Task, names: &[String]) -> R<Env> {
        names.iter().map(|n| Ok((n.clone(), Self::take(t, n)?))).collect()
    }

    /// The cell behind a usage name, waiting for the cell to be created if
    /// the name still refers to its channel.
    fn cell_of(&mut self, t: &mut Task, n: &str) -> R<Option<usize>> {
        loop {
            match t.lin.get(n) {
                Some(Value::Cell(c)) => return Ok(Some(*c)),
                Some(Value::Ep(e)) => {
                    let e = *e;
                    match self.eps[e].inbox.front() {
                        None => return Ok(None),
                        Some(Msg::Val(..)) => {
                            let Some(Msg::Val(v, _)) = self.pop(e) else { unreachable!() };
                            self.close_out(e);
                            t.lin.insert(n.into(), v);
                        }
                        Some(m) => return Err(RuntimeError::Internal(format!("{n}: expected a cell, got {m:?}"))),
                    }
                }
                Some(v) => return Err(RuntimeError::Internal(format!("{n} holds {v}, not a cell"))),
                None => return Err(RuntimeError::Internal(format!("{n} is not bound"))),
            }
        }
    }

    fn arg_value(&mut self, t: &mut Task, a: &IrArg) -> R<Value> {
        match a {
            IrArg::Name(n) => Self::take(t, n),
            IrArg::Expr(e) => eval(e, &t.exp),
            IrArg::Closure { bind, body, captures } => {
                let (inner, outer) = self.channel();
                let mut lin = Self::split(t, captures)?;
                lin.insert(bind.clone(), Value::Ep(inner));
                self.spawn(body.clone(), lin, t.exp.clone());
                Ok(Value::Ep(outer))
            }
        }
    }

    fn content(&mut self, t: &mut Task, a: &IrArg) -> R<Content> {
        match a {
            IrArg::Closure { bind, body, captures } => Ok(Content::Thunk(Thunk {
                bind: bind.clone(),
                body: body.clone(),
                lin: Self::split(t, captures)?,
                exp: t.exp.clone(),
            })),
            _ => Ok(Content::Val(self.arg_value(t, a)?)),
        }
    }

    fn exec(&mut self, tid: u64, t: &mut Task, ir: &Arc<Ir>) -> R<Next> {
        use Next::*;
        let next = match &**ir {
            Ir::Inert => {
                self.event(tid, "inert");
                Done
            }
            Ir::Forward(a, b) => {
                match (Self::take(t, a)?, Self::take(t, b)?) {
                    (Value::Ep(x), Value::Ep(y)) => self.splice(x, y),
                    (Value::Ep(x), v) | (v, Value::Ep(x)) => self.resolve(x, v),
                    (x, y) => return Err(RuntimeError::Internal(format!("fwd between values {x} and {y}"))),
                }
                self.event(tid, &format!("fwd {a} {b}"));
                Done
            }
            Ir::Deliver { chan, expr } => {
                let v = eval(expr, &t.exp)?;
                let Value::Ep(e) = Self::take(t, chan)? else {
                    return Err(RuntimeError::Internal(format!("{chan} is not a channel")));
                };
                self.resolve(e, v);
                self.event(tid, &format!("deliver {chan}"));
                Done
            }
            Ir::Par { left_names, left, right } => {
                let lin = Self::split(t, left_names)?;
                let child = self.spawn(left.clone(), lin, t.exp.clone());
                self.event(tid, &format!("par spawn {child}"));
                Cont(right.clone())
            }
            Ir::Cut { chan, left_names, left, right } => {
                let (l, r) = self.channel();
                let mut lin = Self::split(t, left_names)?;
                lin.insert(chan.clone(), Value::Ep(l));
                let child = self.spawn(left.clone(), lin, t.exp.clone());
                t.lin.insert(chan.clone(), Value::Ep(r));
                self.event(tid, &format!("cut {chan} spawn {child}"));
                Cont(right.clone())
            }
            Ir::Share { chan, left_names, left, right } => {
                let Some(c) = self.cell_of(t, chan)? else { return Ok(Blocked) };
                self.cells.get_mut(&c).unwrap().refs += 1;
                let mut lin = Self::split(t, left_names)?;
                lin.insert(chan.clone(), Value::Cell(c));
                let child = self.spawn(left.clone(), lin, t.exp.clone());
                self.event(tid, &format!("share {chan} cell {c} spawn {child}"));
                Cont(right.clone())
            }
            Ir::Call { proc, lin_args, exp_args } => {
                let p = self
                    .program
                    .get(proc)
                    .ok_or_else(|| RuntimeError::Internal(format!("no procedure {proc}")))?
                    .clone();
                let mut lin = Env::new();
                for (a, (n, _)) in lin_args.iter().zip(&p.sig.params) {
                    let v = self.arg_value(t, a)?;
                    lin.insert(n.clone(), v);
                }
                let mut exp = Env::new();
                for (e, (n, _)) in exp_args.iter().zip(&p.sig.exp_params) {
                    exp.insert(n.clone(), eval(e, &t.exp)?);
                }
                if let Some(n) = t.lin.keys().next() {
                    return Err(RuntimeError::Internal(format!("call to {proc} leaves {n} behind")));
                }
                t.lin = lin;
                t.exp = exp;
                self.event(tid, &format!("call {proc}"));
                Cont(p.body.clone())
            }
            Ir::Send { chan, arg, cont } => {
                let e = Self::ep(t, chan)?;
                let v = self.arg_value(t, arg)?;
                let ack = self.next_ack;
                self.next_ack += 1;
                self.pending.insert(ack);
                self.send(e, Msg::Val(v, Some(ack)));
                t.ack = Some(ack);
                self.event(tid, &format!("send {chan}"));
                Cont(cont.clone())
            }
            Ir::Recv { chan, bind, cont } => {
                let e = Self::ep(t, chan)?;
                match self.eps[e].inbox.front() {
                    None => return Ok(Blocked),
                    Some(Msg::Val(..)) => {}
                    Some(m) => return Err(RuntimeError::Internal(format!("recv on {chan} found {m:?}"))),
                }
                let Some(Msg::Val(v, _)) = self.pop(e) else { unreachable!() };
                t.lin.insert(bind.clone(), v);
                self.event(tid, &format!("recv {chan} {bind}"));
                Cont(cont.clone())
            }
            Ir::Select { chan, label, cont } => {
                let e = Self::ep(t, chan)?;
                self.send(e, Msg::Label(label.clone()));
                self.event(tid, &format!("select {chan} #{label}"));
                Cont(cont.clone())
            }
            Ir::Case { chan, branches } => {
                let e = Self::ep(t, chan)?;
                let label = match self.eps[e].inbox.front() {
                    None => return Ok(Blocked),
                    Some(Msg::Label(l)) => l.clone(),
                    Some(m) => return Err(RuntimeError::Internal(format!("case on {chan} found {m:?}"))),
                };
                self.pop(e);
                let (_, b) = branches
                    .iter()
                    .find(|(l, _)| *l == label)
                    .ok_or_else(|| RuntimeError::Internal(format!("no branch #{label}")))?;
                self.event(tid, &format!("case {chan} #{label}"));
                Cont(b.clone())
            }
            Ir::Close(c) => {
                let Value::Ep(e) = Self::take(t, c)? else {
                    return Err(RuntimeError::Internal(format!("close on non-channel {c}")));
                };
                self.send(e, Msg::Close);
                self.close_out(e);
                self.event(tid, &format!("close {c}"));
                Done
            }
            Ir::Wait { chan, cont } => {
                let e = Self::ep(t, chan)?;
                match self.eps[e].inbox.front() {
                    None => return Ok(Blocked),
                    Some(Msg::Close) => {}
                    Some(m) => return Err(RuntimeError::Internal(format!("wait on {chan} found {m:?}"))),
                }
                self.pop(e);
                self.close_out(e);
                t.lin.remove(chan);
                self.event(tid, &format!("wait {chan}"));
                Cont(cont.clone())
            }
            Ir::Server { chan, bind, body } => {
                let Value::Ep(e) = Self::take(t, chan)? else {
                    return Err(RuntimeError::Internal(format!("{chan} is not a channel")));
                };
                let r = Replica { bind: bind.clone(), body: body.clone(), exp: t.exp.clone() };
                self.resolve(e, Value::Replica(Arc::new(r)));
                self.event(tid, &format!("server {chan}"));
                Done
            }
            Ir::CallRepl { chan, bind, cont } => {
                let Some(Value::Replica(r)) = t.exp.get(chan).cloned() else {
                    return Err(RuntimeError::Internal(format!("{chan} is not a server")));
                };
                let (inner, outer) = self.channel();
                let mut lin = Env::new();
                lin.insert(r.bind.clone(), Value::Ep(inner));
                let child = self.spawn(r.body.clone(), lin, r.exp.clone());
                t.lin.insert(bind.clone(), Value::Ep(outer));
                self.event(tid, &format!("callrepl {chan} spawn {child}"));
                Cont(cont.clone())
            }
            Ir::Affine { chan, cancel, cont } => {
                let e = Self::ep(t, chan)?;
                match self.eps[e].inbox.front() {
                    None => return Ok(Blocked),
                    Some(Msg::Use) => {
                        self.pop(e);
                        self.event(tid, &format!("affine {chan} used"));
                        Cont(cont.clone())
                    }
                    Some(Msg::Discard) => {
                        t.lin.remove(chan);
                        self.close_out(e);
                        for (n, _) in cancel {
                            let v = Self::take(t, n)?;
                            self.dispose(v);
                        }
                        self.event(tid, &format!("affine {chan} discarded"));
                        Done
                    }
                    Some(m) => return Err(RuntimeError::Internal(format!("affine {chan} found {m:?}"))),
                }
            }
            Ir::Use { chan, cont } => {
                if let Some(Value::Ep(e)) = t.lin.get(chan) {
                    let e = *e;
                    self.send(e, Msg::Use);
                }
                self.event(tid, &format!("use {chan}"));
                Cont(cont.clone())
            }
            Ir::Discard(c) => {
                let v = Self::take(t, c)?;
                self.dispose(v);
                self.event(tid, &format!("discard {c}"));
                Done
            }
            Ir::Promote { chan, cont, .. } => {
                loop {
                    match t.lin.get(chan) {
                        Some(Value::Ep(e)) => {
                            let e = *e;
                            match self.eps[e].inbox.front() {
                                None => return Ok(Blocked),
                                Some(Msg::Val(..)) => {}
                                Some(m) => return Err(RuntimeError::Internal(format!("promote {chan} found {m:?}"))),
                            }
                            let Some(Msg::Val(v, _)) = self.pop(e) else { unreachable!() };
                            self.close_out(e);
                            t.lin.insert(chan.clone(), v);
                        }
                        Some(_) => break,
                        None => return Err(RuntimeError::Internal(format!("{chan} is not bound"))),
                    }
                }
                let v = t.lin.remove(chan).unwrap();
                t.exp.insert(chan.clone(), v);
                self.event(tid, &format!("promote {chan}"));
                Cont(cont.clone())
            }
            Ir::CellNew { chan, init, .. } => {
                let Value::Ep(e) = Self::take(t, chan)? else {
                    return Err(RuntimeError::Internal(format!("{chan} is not a channel")));
                };
                let content = self.content(t, init)?;
                let c = self.new_cell(content);
                self.resolve(e, Value::Cell(c));
                self.event(tid, &format!("cell {chan} cell {c}"));
                Done
            }
            Ir::Take { chan, bind, cont } => {
                let Some(c) = self.cell_of(t, chan)? else { return Ok(Blocked) };
                let cell = self.cells.get_mut(&c).unwrap();
                let free = !matches!(cell.content, Content::Held);
                let first = cell.waiters.front().is_none_or(|w| *w == tid);
                if !(free && first) {
                    if !cell.waiters.contains(&tid) {
                        cell.waiters.push_back(tid);
                        self.event(tid, &format!("queue {chan} cell {c}"));
                    }
                    return Ok(Blocked);
                }
                if cell.waiters.front() == Some(&tid) {
                    cell.waiters.pop_front();
                }
                let v = match std::mem::replace(&mut cell.content, Content::Held) {
                    Content::Val(v) => v,
                    Content::Thunk(th) => Value::Ep(self.force(th)),
                    Content::Held => unreachable!(),
                };
                t.lin.insert(bind.clone(), v);
                self.event(tid, &format!("take {chan} cell {c}"));
                Cont(cont.clone())
            }
            Ir::Put { chan, arg, cont } => {
                let Some(c) = self.cell_of(t, chan)? else { return Ok(Blocked) };
                let content = self.content(t, arg)?;
                let cell = self.cells.get_mut(&c).unwrap();
                if !matches!(cell.content, Content::Held) {
                    return Err(RuntimeError::Internal(format!("put into cell {c}, which is not taken")));
                }
                cell.content = content;
                self.event(tid, &format!("put {chan} cell {c}"));
                Cont(cont.clone())
            }
            Ir::DropCell(ch) => {
                let Some(c) = self.cell_of(t, ch)? else { return Ok(Blocked) };
                t.lin.remove(ch);
                self.drop_cell(c);
                self.event(tid, &format!("drop {ch} cell {c}"));
                Done
            }
            Ir::If { cond, then, els } => {
                let b = match eval(cond, &t.exp)? {
                    Value::Bool(b) => b,
                    v => return Err(RuntimeError::Internal(format!("if on {v}"))),
                };
                self.event(tid, &format!("if {b}"));
                Cont(if b { then.clone() } else { els.clone() })
            }
            Ir::Print { expr, newline, cont } => {
                let mut s = eval(expr, &t.exp)?.to_string();
                if *newline {
                    s.push('\n');
                }
                self.output(&s);
                self.event(tid, &format!("print {s:?}"));
                Cont(cont.clone())
            }
            Ir::Sleep { ticks, cont } => {
                let k = match eval(ticks, &t.exp)? {
                    Value::Int(k) => k.max(0) as u64,
                    v => return Err(RuntimeError::Internal(format!("sleep on {v}"))),
                };
                t.wake = self.clock + k;
                self.event(tid, &format!("sleep {k}"));
                Cont(cont.clone())
            }
        };
        Ok(next)
    }
}

fn describe(ir: &Ir) -> String {
    match ir {
        Ir::Recv { chan, .. }
        | Ir::Case { chan, .. }
        | Ir::Wait { chan, .. }
        | Ir::Affine { chan, .. }
        | Ir::Promote { chan, .. }
        | Ir::Take { chan, .. }
        | Ir::Put { chan, .. }
        | Ir::Share { chan, .. } => format!("{} {chan}", ir.tag()),
        Ir::DropCell(c) => format!("drop {c}"),
        other => other.tag().to_string(),
    }
}
