use std::path::PathBuf;

use clls::syntax::Expr;
use clls::{check_source, run_program, RunConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn source(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.clls"));
    std::fs::read_to_string(path).unwrap()
}

fn checking(c: &mut Criterion) {
    let mut g = c.benchmark_group("check");
    for name in ["arith", "sieve", "queue", "wallet"] {
        let src = source(name);
        g.bench_with_input(BenchmarkId::from_parameter(name), &src, |b, src| {
            b.iter(|| check_source(src).unwrap())
        });
    }
    g.finish();
}

fn running(c: &mut Criterion) {
    let mut g = c.benchmark_group("run");
    let cases: [(&str, &str, &[i64]); 4] = [
        ("hello", "main", &[]),
        ("sieve", "main_sa", &[50]),
        ("queue", "mainq_seq", &[64]),
        ("barrier", "mainb", &[16]),
    ];
    for (file, entry, args) in cases {
        let program = check_source(&source(file)).unwrap();
        let args: Vec<Expr> = args.iter().map(|n| Expr::Int(*n)).collect();
        g.bench_function(format!("{file}/{entry}"), |b| {
            b.iter(|| {
                let o = run_program(&program, entry, &args, &RunConfig::default()).unwrap();
                assert!(o.is_clean());
                o.steps
            })
        });
    }
    g.finish();
}

fn sieve_scaling(c: &mut Criterion) {
    let program = check_source(&source("sieve")).unwrap();
    let mut g = c.benchmark_group("sieve");
    g.sample_size(20);
    for n in [25, 50, 100, 200] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, n| {
            b.iter(|| run_program(&program, "main_sa", &[Expr::Int(*n)], &RunConfig::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, checking, running, sieve_scaling);
criterion_main!(benches);
