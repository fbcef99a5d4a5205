use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use clls::corpus::{expected_files, run_corpus, Expectation};
use clls::syntax::Expr;
use clls::{check_source, dual, run_program, Outcome, Program, RunConfig, SessionType as T, TypeEnv};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use regex::Regex;

const HELLO_LIMIT: Duration = Duration::from_secs(1);
const SIEVE_LIMIT: Duration = Duration::from_secs(5);
const SIEVE_N: i64 = 50;
const SEEDS: u64 = 100;
const BARRIER_THREADS: i64 = 4;
const QUEUE_SEQ_N: i64 = 64;
const QUEUE_CONC_N: i64 = 20;
const MIN_NEGATIVE: usize = 12;
const DUALITY_CASES: u32 = 1000;

type Verdict = Result<String, String>;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn load(name: &str) -> Program {
    let src = std::fs::read_to_string(corpus(&format!("{name}.clls"))).unwrap();
    check_source(&src).unwrap_or_else(|ds| panic!("{name} rejected: {ds:?}"))
}

fn run(p: &Program, entry: &str, args: &[i64], seed: u64) -> Outcome {
    let args: Vec<Expr> = args.iter().map(|n| Expr::Int(*n)).collect();
    run_program(p, entry, &args, &RunConfig { seed, ..Default::default() }).unwrap()
}

fn clean(o: &Outcome, what: &str) -> Result<(), String> {
    if let Some(e) = &o.error {
        return Err(format!("{what}: {e}"));
    }
    if !o.leaks.is_clean() {
        return Err(format!("{what}: leaked {:?}", o.leaks));
    }
    Ok(())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn hello() -> Verdict {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_clls"))
        .arg("run")
        .arg(corpus("hello.clls"))
        .env_remove("CLLS_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(o.status.success(), || format!("exit {:?}", o.status.code()))?;
    ensure(o.stdout == b"hello world 6\n", || format!("stdout {:?}", String::from_utf8_lossy(&o.stdout)))?;
    ensure(took < HELLO_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("byte-exact in {took:?}"))
}

/// Hand execution of the menu server.
fn menu_oracle(label: &str, args: &[i64]) -> i64 {
    match label {
        "Dup" => 2 * args[0],
        "Add" => args[0] + args[1],
        _ => unreachable!(),
    }
}

fn arith() -> Verdict {
    let p = load("arith");
    for (entry, who, label, args) in [("main0", "alice", "Dup", &[2][..]), ("main1", "bob", "Add", &[4, 3][..])] {
        let want = format!("{who} got {}\n", menu_oracle(label, args));
        for seed in 0..10 {
            let o = run(&p, entry, &[], seed);
            clean(&o, entry)?;
            ensure(o.stdout == want, || format!("{entry} seed {seed}: {:?} != {want:?}", o.stdout))?;
        }
    }
    Ok("alice got 4, bob got 7".into())
}

fn shared_cell() -> Verdict {
    let p = load("cells");
    let (mut threes, mut ones) = (0, 0);
    for seed in 0..SEEDS {
        let o = run(&p, "main1m", &[], seed);
        clean(&o, &format!("seed {seed}"))?;
        match o.stdout.as_str() {
            "2\n3\n" => threes += 1,
            "2\n1\n" => ones += 1,
            other => return Err(format!("seed {seed}: transcript {other:?}")),
        }
    }
    ensure(threes > 0 && ones > 0, || format!("3 seen {threes} times, 1 seen {ones} times"))?;
    Ok(format!("{SEEDS} seeds: 3 x{threes}, 1 x{ones}"))
}

fn eratosthenes(n: i64) -> Vec<i64> {
    let n = n as usize;
    let mut composite = vec![false; n.max(2)];
    let mut out = Vec::new();
    for i in 2..n {
        if !composite[i] {
            out.push(i as i64);
            for j in (i * i..n).step_by(i) {
                composite[j] = true;
            }
        }
    }
    out
}

fn sieve() -> Verdict {
    let p = load("sieve");
    let start = Instant::now();
    let o = run(&p, "main_sa", &[SIEVE_N], 0);
    let took = start.elapsed();
    clean(&o, "main_sa")?;
    let got: Vec<i64> = o.stdout.split_whitespace().map(|t| t.parse().unwrap_or(-1)).collect();
    let want = eratosthenes(SIEVE_N);
    ensure(got == want, || format!("got {got:?}, oracle {want:?}"))?;
    ensure(o.stdout.ends_with('\n') && o.stdout.lines().count() == 1, || format!("layout {:?}", o.stdout))?;
    ensure(took < SIEVE_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{} primes below {SIEVE_N} in {took:?}, no leaks", want.len()))
}

fn barrier() -> Verdict {
    let p = load("barrier");
    let line = Regex::new(r"^thread (\d+) (started\.|on wait|wake up\.|terminates\.)$").unwrap();
    for seed in 0..SEEDS {
        let o = run(&p, "mainb", &[BARRIER_THREADS], seed);
        clean(&o, &format!("seed {seed}"))?;
        let mut counts = [0i64; 4];
        let mut last_wait = None;
        let mut first_wake = None;
        for (i, l) in o.stdout.lines().enumerate() {
            let c = line.captures(l).ok_or_else(|| format!("seed {seed}: stray line {l:?}"))?;
            let k = ["started.", "on wait", "wake up.", "terminates."].iter().position(|s| *s == &c[2]).unwrap();
            counts[k] += 1;
            match k {
                1 => last_wait = Some(i),
                2 if first_wake.is_none() => first_wake = Some(i),
                _ => {}
            }
        }
        ensure(counts.iter().all(|c| *c == BARRIER_THREADS), || format!("seed {seed}: counts {counts:?}"))?;
        ensure(last_wait < first_wake, || format!("seed {seed}: a thread woke before all waited"))?;
    }
    Ok(format!("{SEEDS} seeds, every wake up after every on wait"))
}

/// Replays a driver transcript against a sequential queue. `enq` lines are
/// printed before the operation and `deq` lines after it, so a correct
/// queue can always be linearized in transcript order.
fn replay_queue(out: &str) -> Result<Vec<i64>, String> {
    let mut q = VecDeque::new();
    let mut popped = Vec::new();
    let mut none = 0;
    for l in out.lines() {
        if let Some(v) = l.strip_prefix("enq ") {
            q.push_back(v.parse::<i64>().map_err(|e| e.to_string())?);
        } else if let Some(v) = l.strip_prefix("deq ") {
            let v: i64 = v.parse().map_err(|e| format!("{l:?}: {e}"))?;
            match q.pop_front() {
                Some(w) if w == v => popped.push(v),
                w => return Err(format!("{l:?} but the oracle queue yields {w:?}")),
            }
        } else if l == "NONE" {
            ensure(q.is_empty(), || format!("NONE with {} items queued", q.len()))?;
            none += 1;
        } else {
            return Err(format!("stray line {l:?}"));
        }
    }
    ensure(none == 1, || format!("{none} NONE lines"))?;
    ensure(out.lines().last() == Some("NONE"), || "NONE is not last".into())?;
    Ok(popped)
}

fn queue() -> Verdict {
    let p = load("queue");
    let o = run(&p, "mainq_seq", &[QUEUE_SEQ_N], 0);
    clean(&o, "mainq_seq")?;
    let popped = replay_queue(&o.stdout)?;
    ensure(popped == (1..=QUEUE_SEQ_N).collect::<Vec<_>>(), || format!("dequeued {popped:?}"))?;
    let mut interleaved = 0;
    for seed in 0..SEEDS {
        let o = run(&p, "mainq", &[QUEUE_CONC_N], seed);
        clean(&o, &format!("mainq seed {seed}"))?;
        let popped = replay_queue(&o.stdout).map_err(|e| format!("mainq seed {seed}: {e}"))?;
        ensure(popped.len() == QUEUE_CONC_N as usize, || format!("seed {seed}: {} dequeues", popped.len()))?;
        let lines: Vec<&str> = o.stdout.lines().collect();
        let first_deq = lines.iter().position(|l| l.starts_with("deq"));
        let last_enq = lines.iter().rposition(|l| l.starts_with("enq"));
        if first_deq < last_enq {
            interleaved += 1;
        }
    }
    ensure(interleaved > 0, || "no seed interleaved enqueues and dequeues".into())?;
    Ok(format!("1..{QUEUE_SEQ_N} in order then NONE; {SEEDS} concurrent seeds linearizable ({interleaved} interleaved)"))
}

fn wallet() -> Verdict {
    let p = load("wallet");
    let o = run(&p, "main", &[], 0);
    clean(&o, "wallet")?;
    ensure(o.stdout.lines().any(|l| l == "balance = 1"), || format!("stdout {:?}", o.stdout))?;
    let src = std::fs::read_to_string(corpus("negative/wallet_tamper.clls")).unwrap();
    match check_source(&src) {
        Ok(_) => Err("tampering client accepted".into()),
        Err(ds) if ds[0].rule == "type-mismatch" => Ok("balance = 1; tampering client rejected (type-mismatch)".into()),
        Err(ds) => Err(format!("tampering client rejected with {}", ds[0].rule)),
    }
}

fn programs() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "clls"))
        .collect();
    files.sort();
    files
}

fn positive() -> Verdict {
    let files = programs();
    ensure(files.len() == 10, || format!("{} programs", files.len()))?;
    for f in &files {
        if let Err(ds) = check_source(&std::fs::read_to_string(f).unwrap()) {
            return Err(format!("{}: {}", f.display(), ds[0]));
        }
    }
    Ok("10 programs, zero diagnostics".into())
}

const REQUIRED_NEGATIVE: [(&str, &str); 12] = [
    ("reuse", "linearity-reuse"),
    ("leak", "linear-leak"),
    ("nodrop", "cell-leak"),
    ("taketake", "cell-protocol"),
    ("share_two", "share-arity"),
    ("cut_two", "cut-arity"),
    ("par_one", "par-arity"),
    ("affine_ctx", "affine-promotion"),
    ("bang_capture", "bang-promotion"),
    ("case_missing", "case-coverage"),
    ("unguarded", "unguarded-recursion"),
    ("cell_content", "cell-content"),
];

fn negative() -> Verdict {
    let dir = corpus("negative");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for (stem, rule) in REQUIRED_NEGATIVE {
        ensure(files.contains(&dir.join(format!("{stem}.clls"))), || format!("{stem}.clls missing"))?;
        let src = std::fs::read_to_string(dir.join(format!("{stem}.clls"))).unwrap();
        ensure(src.contains(&format!("-- expect: {rule}")), || format!("{stem}.clls does not expect {rule}"))?;
    }
    let expect = Regex::new(r"(?m)^-- expect: (\S+)$").unwrap();
    for f in &files {
        let src = std::fs::read_to_string(f).unwrap();
        let want = &expect.captures(&src).ok_or_else(|| format!("{}: no expect line", f.display()))?[1];
        match check_source(&src) {
            Ok(_) => return Err(format!("{} accepted", f.display())),
            Err(ds) => ensure(ds[0].rule == want, || format!("{}: {} instead of {want}", f.display(), ds[0].rule))?,
        }
    }
    ensure(files.len() >= MIN_NEGATIVE, || format!("only {} negative programs", files.len()))?;
    Ok(format!("{} programs rejected with their rule", files.len()))
}

fn safety() -> Verdict {
    let reports = run_corpus(&corpus(""), Some(SEEDS), &RunConfig::default()).map_err(|e| e.to_string())?;
    let mut cases = 0;
    for r in &reports {
        ensure(r.diagnostics.is_empty(), || format!("{} rejected", r.file.display()))?;
        for c in &r.cases {
            ensure(c.passed(), || format!("{} {}: {}", r.file.display(), c.name, c.failures.join("; ")))?;
            cases += 1;
        }
    }
    ensure(reports.len() == 10, || format!("{} programs", reports.len()))?;
    Ok(format!("{cases} cases x {SEEDS} seeds: no leaks, deadlocks or budget overruns"))
}

fn determinism() -> Verdict {
    let mut runs = 0;
    for f in programs() {
        let stem = f.file_stem().unwrap().to_str().unwrap().to_string();
        let p = check_source(&std::fs::read_to_string(&f).unwrap()).unwrap();
        for (path, entry) in expected_files(&corpus(""), &stem).unwrap() {
            let exp = Expectation::parse(&std::fs::read_to_string(path).unwrap(), &entry)?;
            for seed in 0..SEEDS {
                let cfg = RunConfig { seed, ..Default::default() };
                let a = run_program(&p, &exp.entry, &exp.args, &cfg).unwrap();
                let b = run_program(&p, &exp.entry, &exp.args, &cfg).unwrap();
                ensure(a.stdout.as_bytes() == b.stdout.as_bytes(), || format!("{stem}.{entry} seed {seed} differs"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} (program, seed) pairs reproduced byte for byte"))
}

const TYPE_DECLS: &str = "
type rec Stream(A) { choice of { |#Next: send A; Stream(A) |#Stop: close } };;
type Cell(A) { state A };;
";

fn arb_type(vars: bool) -> BoxedStrategy<T> {
    let mut leaves = vec![
        Just(T::Close).boxed(),
        Just(T::Wait).boxed(),
        Just(T::lint()).boxed(),
        Just(T::named("Stream", vec![T::lint()])).boxed(),
    ];
    if vars {
        leaves.push(any::<bool>().prop_map(|d| T::Var("x".into(), d)).boxed());
    }
    let leaf = proptest::strategy::Union::new(leaves);
    leaf.prop_recursive(4, 24, 3, |inner| {
        let branches = prop::collection::vec(inner.clone(), 1..3).prop_map(|ts| {
            ts.into_iter().enumerate().map(|(i, t)| (format!("#L{i}"), t)).collect::<Vec<_>>()
        });
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| T::send(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| T::recv(a, b)),
            branches.clone().prop_map(T::Offer),
            branches.prop_map(T::Choice),
            inner.clone().prop_map(|t| T::Bang(Box::new(t))),
            inner.clone().prop_map(|t| T::Quest(Box::new(t))),
            inner.clone().prop_map(|t| T::Affine(Box::new(t))),
            inner.clone().prop_map(|t| T::Coaffine(Box::new(t))),
            inner.clone().prop_map(|t| T::State(Box::new(t))),
            inner.clone().prop_map(|t| T::Usage(Box::new(t))),
            inner.clone().prop_map(|t| T::named("Cell", vec![t])),
            inner.prop_map(|t| T::named("Stream", vec![t])),
        ]
    })
    .boxed()
}

/// A recursive type whose variable sits under a send, so it is contractive.
fn arb_recursive() -> BoxedStrategy<T> {
    (arb_type(true), arb_type(false), any::<bool>())
        .prop_map(|(body, payload, co)| {
            let body = T::send(payload, body);
            if co {
                T::Corec("x".into(), Box::new(body))
            } else {
                T::Rec("x".into(), Box::new(body))
            }
        })
        .boxed()
}

fn duality() -> Verdict {
    let env: TypeEnv = check_source(TYPE_DECLS).map_err(|ds| format!("{ds:?}"))?.types;
    let config = Config { cases: DUALITY_CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config.clone(), proptest::test_runner::TestRng::deterministic_rng(config.rng_algorithm));
    runner
        .run(&arb_type(false), |t| {
            prop_assert_eq!(dual(&dual(&t)), t.clone());
            prop_assert!(env.equiv(&dual(&dual(&t)), &t));
            Ok(())
        })
        .map_err(|e| format!("involution: {e}"))?;
    runner
        .run(&arb_recursive(), |t| {
            prop_assert_eq!(dual(&dual(&t)), t.clone());
            let a = dual(&env.unfold(&t).unwrap());
            let b = env.unfold(&dual(&t)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(env.equiv(&a, &b));
            Ok(())
        })
        .map_err(|e| format!("unfold commutation: {e}"))?;
    runner
        .run(&arb_type(false), |t| {
            let named = T::named("Stream", vec![t]);
            let a = dual(&env.unfold(&named).unwrap());
            let b = env.unfold(&dual(&named)).unwrap();
            prop_assert_eq!(&a, &b);
            Ok(())
        })
        .map_err(|e| format!("named unfold commutation: {e}"))?;
    Ok(format!("{DUALITY_CASES} cases each for involution, recursive and named unfolding"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("hello world", hello),
        ("arithmetic server", arith),
        ("shared cell", shared_cell),
        ("sieve", sieve),
        ("barrier", barrier),
        ("queue", queue),
        ("wallet", wallet),
        ("checker accepts the corpus", positive),
        ("checker negative suite", negative),
        ("safety sweep", safety),
        ("determinism", determinism),
        ("duality properties", duality),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS {title}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {title}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
