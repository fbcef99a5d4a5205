//! Criterion benchmarks for checking and running the example corpus; see
//! `benches/interpreter.rs`.
