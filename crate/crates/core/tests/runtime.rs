use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use clls::corpus::{expected_files, Expectation};
use clls::ir::Ir;
use clls::syntax::{Expr, RecFlag};
use clls::{check_source, run_program, CheckedProc, ProcSig, Program, RunConfig, RuntimeError, Span, TypeEnv};
use regex::Regex;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every expected case of the corpus: (program, entry, args).
fn cases() -> Vec<(String, Program, Expectation)> {
    let mut out = Vec::new();
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for f in files.iter().filter(|p| p.extension().is_some_and(|e| e == "clls")) {
        let stem = f.file_stem().unwrap().to_str().unwrap();
        let program = check_source(&std::fs::read_to_string(f).unwrap()).unwrap();
        for (path, entry) in expected_files(&corpus_dir(), stem).unwrap() {
            let exp = Expectation::parse(&std::fs::read_to_string(&path).unwrap(), &entry).unwrap();
            out.push((format!("{stem}.{}", exp.entry), program.clone(), exp));
        }
    }
    out
}

fn run(src: &str, entry: &str, seed: u64) -> clls::Outcome {
    let p = check_source(src).unwrap_or_else(|ds| panic!("{ds:?}"));
    run_program(&p, entry, &[], &RunConfig { seed, ..Default::default() }).unwrap()
}

#[test]
fn same_seed_same_transcript_and_trace() {
    for (name, p, exp) in cases() {
        for seed in [0, 7, 12345] {
            let cfg = RunConfig { seed, trace: true, ..Default::default() };
            let a = run_program(&p, &exp.entry, &exp.args, &cfg).unwrap();
            let b = run_program(&p, &exp.entry, &exp.args, &cfg).unwrap();
            assert_eq!(a.stdout, b.stdout, "{name} seed {seed}");
            assert_eq!(a.trace, b.trace, "{name} seed {seed}");
        }
    }
}

/// Replays cell events from a trace: no take is granted while the cell is
/// held, and queued takers are served in arrival order.
fn check_cell_discipline(trace: &[String]) -> Result<(), String> {
    let re = Regex::new(r"^step \d+ task (\d+) (take|put|queue) \S+ cell (\d+)$").unwrap();
    let mut held: BTreeMap<u64, u64> = BTreeMap::new();
    let mut queues: BTreeMap<u64, VecDeque<u64>> = BTreeMap::new();
    for line in trace {
        let Some(c) = re.captures(line) else { continue };
        let task: u64 = c[1].parse().unwrap();
        let cell: u64 = c[3].parse().unwrap();
        let q = queues.entry(cell).or_default();
        match &c[2] {
            "queue" => q.push_back(task),
            "take" => {
                if let Some(h) = held.get(&cell) {
                    return Err(format!("{line}: cell {cell} is held by task {h}"));
                }
                match q.iter().position(|t| *t == task) {
                    Some(0) => {
                        q.pop_front();
                    }
                    Some(_) => return Err(format!("{line}: task {task} overtook task {}", q[0])),
                    None if !q.is_empty() => return Err(format!("{line}: task {task} barged past a queue")),
                    None => {}
                }
                held.insert(cell, task);
            }
            _ => {
                if held.remove(&cell).is_none() {
                    return Err(format!("{line}: put into a free cell"));
                }
            }
        }
    }
    Ok(())
}

#[test]
fn cells_are_exclusive_and_fifo() {
    let mut queued = 0;
    for (name, p, exp) in cases() {
        for seed in 0..20 {
            let cfg = RunConfig { seed, trace: true, ..Default::default() };
            let o = run_program(&p, &exp.entry, &exp.args, &cfg).unwrap();
            check_cell_discipline(&o.trace).unwrap_or_else(|e| panic!("{name} seed {seed}: {e}"));
            queued += o.trace.iter().filter(|l| l.contains(" queue ")).count();
        }
    }
    assert!(queued > 0, "no run ever made a taker wait");
}

#[test]
fn trace_lines_have_the_documented_shape() {
    let re = Regex::new(r"^step \d+ task \d+ [a-z]+( .*)?$").unwrap();
    let (_, p, exp) = cases().into_iter().find(|(n, ..)| n == "cells.main1m").unwrap();
    let o = run_program(&p, &exp.entry, &exp.args, &RunConfig { trace: true, ..Default::default() }).unwrap();
    assert!(!o.trace.is_empty());
    assert!(o.trace.iter().all(|l| re.is_match(l)), "{:?}", o.trace);
}

const RELAY: &str = "
type S { send lint; close };;
proc prod(x:S) { send x(3); close x };;
proc cons(y:~S) { recv y(v); wait y; println(v); () };;
proc direct() { letc x:S { prod(x) }; cons(x) };;
proc relayed() { letc x:S { prod(x) }; letc y:S { fwd y x }; cons(y) };;
proc twice() { letc x:S { prod(x) }; letc y:S { fwd y x }; letc z:S { fwd z y }; cons(z) };;
";

#[test]
fn forwarding_is_transparent() {
    for seed in 0..20 {
        let d = run(RELAY, "direct", seed);
        for entry in ["relayed", "twice"] {
            let f = run(RELAY, entry, seed);
            assert_eq!(f.stdout, d.stdout);
            assert!(f.is_clean(), "{entry}: {:?} {:?}", f.error, f.leaks);
        }
    }
}

#[test]
fn sleep_counts_scheduler_rounds() {
    let src = "proc m() { par { sleep 5; println(\"late\"); () || println(\"early\"); () } };;";
    for seed in 0..20 {
        assert_eq!(run(src, "m", seed).stdout, "early\nlate\n");
    }
}

#[test]
fn servers_that_are_never_called_cost_nothing() {
    let src = std::fs::read_to_string(corpus_dir().join("rserver.clls")).unwrap();
    let o = run(&src, "main3", 0);
    assert_eq!(o.stdout, "no calls\n");
    assert!(o.is_clean());
}

#[test]
fn overflow_is_a_runtime_error() {
    let o = run("proc m() { println(9223372036854775807 * 2); () };;", "m", 0);
    assert!(matches!(o.error, Some(RuntimeError::Arithmetic(_))));
}

#[test]
fn step_budget_stops_runaway_programs() {
    let p = check_source("proc gen_rec spin() { spin() };;").unwrap();
    let o = run_program(&p, "spin", &[], &RunConfig { max_steps: 1000, ..Default::default() }).unwrap();
    assert_eq!(o.error, Some(RuntimeError::StepBudget(1000)));
}

#[test]
fn deadlocks_are_reported_with_blocked_tasks() {
    // Unreachable through the checker: both ends of one channel receive.
    let recv = |bind: &str| Arc::new(Ir::Recv { chan: "c".into(), bind: bind.into(), cont: Arc::new(Ir::Inert) });
    let body = Ir::Cut { chan: "c".into(), left_names: vec![], left: recv("x"), right: recv("y") };
    let sig = ProcSig {
        name: "stuck".into(),
        rec: RecFlag::None,
        type_params: vec![],
        params: vec![],
        exp_params: vec![],
        span: Span::default(),
    };
    let mut procs = BTreeMap::new();
    procs.insert("stuck".to_string(), Arc::new(CheckedProc { sig, body: Arc::new(body) }));
    let p = Program { types: TypeEnv::new(), procs };
    let o = run_program(&p, "stuck", &[], &RunConfig::default()).unwrap();
    let Some(RuntimeError::Deadlock(report)) = o.error else { panic!("{:?}", o.error) };
    assert!(report.contains("task 0 blocked at recv c"), "{report}");
    assert!(report.contains("task 1 blocked at recv c"), "{report}");
}

#[test]
fn parallel_mode_keeps_the_safety_properties() {
    let src = std::fs::read_to_string(corpus_dir().join("sieve.clls")).unwrap();
    let p = check_source(&src).unwrap();
    for _ in 0..5 {
        let cfg = RunConfig { parallel: true, ..Default::default() };
        let o = run_program(&p, "main_sa", &[Expr::Int(30)], &cfg).unwrap();
        assert_eq!(o.stdout, "2 3 5 7 11 13 17 19 23 29 \n");
        assert!(o.is_clean(), "{:?} {:?}", o.error, o.leaks);
    }
    let src = std::fs::read_to_string(corpus_dir().join("cells.clls")).unwrap();
    let p = check_source(&src).unwrap();
    for _ in 0..10 {
        let o = run_program(&p, "main1m", &[], &RunConfig { parallel: true, ..Default::default() }).unwrap();
        // Free-running threads may print the second value first: the put
        // happens before the println.
        let mut seen: Vec<&str> = o.stdout.lines().collect();
        seen.sort();
        assert!(seen == ["2", "3"] || seen == ["1", "2"], "{:?}", o.stdout);
        assert!(o.is_clean());
    }
}

#[test]
fn unknown_entry_is_a_diagnostic() {
    let p = check_source("proc m() { () };;").unwrap();
    let d = run_program(&p, "nope", &[], &RunConfig::default()).unwrap_err();
    assert_eq!(d.rule, "unknown-proc");
}

#[test]
fn wall_clock_ticks_make_sleep_take_real_time() {
    let p = check_source("proc m() { sleep 20; println(\"done\"); () };;").unwrap();
    let cfg = RunConfig { tick: Some(std::time::Duration::from_millis(5)), ..Default::default() };
    let start = std::time::Instant::now();
    let o = run_program(&p, "m", &[], &cfg).unwrap();
    assert!(start.elapsed() >= std::time::Duration::from_millis(100));
    assert_eq!(o.stdout, "done\n");
    assert!(o.is_clean());
}
