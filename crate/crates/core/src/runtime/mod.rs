//! Execution of checked programs.
//!
//! Every process runs as a task. Channels are pairs of endpoints with
//! inboxes; sends wait until the receiver has taken the value, while labels,
//! `close` and the affine use/discard signals are queued. Cells are
//! reference counted and hand out their contents to takers in FIFO order.
//!
//! The default scheduler is deterministic: each round runs one step of
//! every task in an order drawn from a seeded ChaCha generator, and `sleep`
//! counts rounds. Parallel mode lets several OS threads step tasks of a
//! shared machine; it keeps the safety properties but not reproducibility.

mod machine;
mod value;

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::{check_entry, Program};
use crate::diag::{Diagnostic, Span};
use crate::ir::Ir;
use crate::syntax::Expr;
use machine::{Machine, Progress};
pub use value::{eval, Env, Replica, Value};

pub const DEFAULT_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("deadlock: {0}")]
    Deadlock(String),
    #[error("step budget of {0} exhausted")]
    StepBudget(u64),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl RuntimeError {
    pub fn rule(&self) -> &'static str {
        match self {
            RuntimeError::Deadlock(_) => "runtime-deadlock",
            RuntimeError::StepBudget(_) => "step-budget",
            RuntimeError::Arithmetic(_) => "arithmetic",
            RuntimeError::Internal(_) => "internal",
        }
    }
}

/// Resources still alive when a run ends.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Leaks {
    pub channels: usize,
    pub cells: usize,
    pub tasks: usize,
}

impl Leaks {
    pub fn is_clean(&self) -> bool {
        *self == Leaks::default()
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub max_steps: u64,
    pub trace: bool,
    pub parallel: bool,
    /// Write output (and trace lines, to stderr) while running.
    pub echo: bool,
    /// When set, `sleep k` waits at least `k` of these in real time instead
    /// of `k` scheduler rounds.
    pub tick: Option<Duration>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 0, max_steps: DEFAULT_STEPS, trace: false, parallel: false, echo: false, tick: None }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub stdout: String,
    pub trace: Vec<String>,
    pub error: Option<RuntimeError>,
    pub leaks: Leaks,
    pub steps: u64,
    pub tasks: u64,
}

impl Outcome {
    /// Terminated normally with nothing left behind.
    pub fn is_clean(&self) -> bool {
        self.error.is_none() && self.leaks.is_clean()
    }
}

/// Run `entry` with literal arguments for its unrestricted parameters.
pub fn run_program(program: &Program, entry: &str, args: &[Expr], cfg: &RunConfig) -> Result<Outcome, Diagnostic> {
    check_entry(program, entry, args, Span::default())?;
    let mut m = Machine::new(program, cfg.trace, cfg.echo);
    let call = Ir::Call { proc: entry.into(), lin_args: Vec::new(), exp_args: args.to_vec() };
    m.spawn(Arc::new(call), Env::new(), Env::new());
    let res = if cfg.parallel {
        let (done, res) = run_parallel(m, cfg);
        m = done;
        res
    } else {
        run_seeded(&mut m, cfg)
    };
    Ok(Outcome {
        leaks: if res.is_ok() { m.leaks() } else { Leaks::default() },
        error: res.err(),
        steps: m.steps,
        tasks: m.task_count(),
        stdout: m.stdout,
        trace: m.trace.unwrap_or_default(),
    })
}

/// Scheduler time: rounds by default, elapsed ticks under a wall clock.
struct Clock {
    start: Instant,
    tick: Option<Duration>,
}

impl Clock {
    fn new(cfg: &RunConfig) -> Self {
        Clock { start: Instant::now(), tick: cfg.tick.filter(|t| !t.is_zero()) }
    }

    fn round(&self, m: &mut Machine) {
        match self.tick {
            None => m.clock += 1,
            Some(t) => m.clock = m.clock.max((self.start.elapsed().as_nanos() / t.as_nanos()) as u64),
        }
    }

    /// Nothing can run: move on to the earliest sleeper.
    fn wake(&self, m: &mut Machine, w: u64) {
        if let Some(t) = self.tick {
            let due = self.start + t * u32::try_from(w).unwrap_or(u32::MAX);
            std::thread::sleep(due.saturating_duration_since(Instant::now()));
        }
        m.clock = w;
    }
}

fn run_seeded(m: &mut Machine, cfg: &RunConfig) -> Result<(), RuntimeError> {
    let clock = Clock::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ids = Vec::new();
    while !m.tasks.is_empty() {
        ids.clear();
        ids.extend(m.tasks.keys().copied());
        ids.shuffle(&mut rng);
        let mut ran = false;
        for &id in &ids {
            ran |= m.step(id)? == Progress::Ran;
            if m.steps > cfg.max_steps {
                return Err(RuntimeError::StepBudget(cfg.max_steps));
            }
        }
        if ran {
            clock.round(m);
        } else if let Some(w) = m.sleeping_until() {
            clock.wake(m, w);
        } else {
            return Err(RuntimeError::Deadlock(m.deadlock_report()));
        }
    }
    Ok(())
}

struct Shared<'p> {
    m: Machine<'p>,
    err: Option<RuntimeError>,
    idle: usize,
    attempts: usize,
}

/// Step one task of a stalled machine after another; with no progress at
/// all, wake sleepers or report a deadlock.
fn full_pass(st: &mut Shared, clock: &Clock) -> Result<(), RuntimeError> {
    let ids: Vec<u64> = st.m.tasks.keys().copied().collect();
    let mut ran = false;
    for id in ids {
        ran |= st.m.step(id)? == Progress::Ran;
    }
    if ran {
        return Ok(());
    }
    match st.m.sleeping_until() {
        Some(w) => {
            clock.wake(&mut st.m, w);
            Ok(())
        }
        None => Err(RuntimeError::Deadlock(st.m.deadlock_report())),
    }
}

fn run_parallel<'p>(m: Machine<'p>, cfg: &RunConfig) -> (Machine<'p>, Result<(), RuntimeError>) {
    let workers = std::thread::available_parallelism().map_or(2, |n| n.get()).clamp(2, 8);
    let shared = Mutex::new(Shared { m, err: None, idle: 0, attempts: 0 });
    let clock = &Clock::new(cfg);
    std::thread::scope(|s| {
        for w in 0..workers {
            let shared = &shared;
            s.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (w as u64) ^ rand::random::<u64>());
                loop {
                    let mut g = shared.lock().unwrap();
                    let st = &mut *g;
                    if st.m.tasks.is_empty() || st.err.is_some() {
                        return;
                    }
                    let n = st.m.tasks.len();
                    let id = *st.m.tasks.keys().nth(rng.gen_range(0..n)).unwrap();
                    let res = st.m.step(id).and_then(|p| {
                        if p == Progress::Ran {
                            st.idle = 0;
                        } else {
                            st.idle += 1;
                        }
                        st.attempts += 1;
                        if st.attempts >= n {
                            st.attempts = 0;
                            clock.round(&mut st.m);
                        }
                        if st.m.steps > cfg.max_steps {
                            return Err(RuntimeError::StepBudget(cfg.max_steps));
                        }
                        if st.idle > 4 * n {
                            st.idle = 0;
                            full_pass(st, clock)?;
                        }
                        Ok(())
                    });
                    if let Err(e) = res {
                        st.err = Some(e);
                        return;
                    }
                    drop(g);
                    std::thread::yield_now();
                }
            });
        }
    });
    let st = shared.into_inner().unwrap();
    let res = st.err.map_or(Ok(()), Err);
    (st.m, res)
}
