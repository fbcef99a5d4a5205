//! Expected-output files and the harness that checks example programs
//! against them over a sweep of seeds.
//!
//! A file `prog.expected` describes a run of `main` in `prog.clls`;
//! `prog.entry.expected` describes a run of `entry`. Without any `%`
//! directive the file is the exact output. Otherwise:
//!
//! ```text
//! %% comment
//! %entry NAME          procedure to run
//! %args 50 "x"         literal arguments for its unrestricted parameters
//! %seeds N             number of seeds in the sweep (default 1)
//! %output              the following lines are one allowed transcript
//! %all-outputs         every %output block must occur in the sweep
//! %line RE             every output line matches some %line pattern
//! %count N RE          exactly N lines match RE
//! %before A => B       every line matching A precedes every line matching B
//! %sometimes RE        some run in the sweep has a line matching RE
//! %sequence RE LO..HI  the integers captured by RE are LO, LO+1, ..., HI
//! ```
//!
//! Every run must also terminate normally with no leaked resources.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use regex::Regex;

use crate::checker::{check_source, Program};
use crate::diag::Diagnostic;
use crate::runtime::{run_program, RunConfig};
use crate::syntax::Expr;

#[derive(Debug, Clone)]
pub enum Rule {
    Lines(Vec<Regex>),
    Count(usize, Regex),
    Before(Regex, Regex),
    Sometimes(Regex),
    Sequence(Regex, i64, i64),
}

#[derive(Debug, Clone)]
pub struct Expectation {
    pub entry: String,
    pub args: Vec<Expr>,
    pub seeds: u64,
    pub outputs: Vec<String>,
    pub all_outputs: bool,
    pub rules: Vec<Rule>,
}

fn regex(s: &str) -> Result<Regex, String> {
    Regex::new(s.trim()).map_err(|e| format!("bad pattern {s:?}: {e}"))
}

fn parse_arg(s: &str) -> Result<Expr, String> {
    if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return Ok(Expr::Str(inner.to_string()));
    }
    s.parse().map(Expr::Int).map_err(|_| format!("argument {s:?} is neither an integer nor a string"))
}

impl Expectation {
    pub fn parse(text: &str, default_entry: &str) -> Result<Self, String> {
        let mut e = Expectation {
            entry: default_entry.to_string(),
            args: Vec::new(),
            seeds: 1,
            outputs: Vec::new(),
            all_outputs: false,
            rules: Vec::new(),
        };
        if !text.lines().any(|l| l.starts_with('%')) {
            e.outputs.push(text.to_string());
            return Ok(e);
        }
        let mut block: Option<Vec<&str>> = None;
        let mut lines_rule = Vec::new();
        let flush = |block: &mut Option<Vec<&str>>, outputs: &mut Vec<String>| {
            if let Some(ls) = block.take() {
                let mut s = ls.join("\n");
                if !ls.is_empty() {
                    s.push('\n');
                }
                outputs.push(s);
            }
        };
        for line in text.lines() {
            let Some(d) = line.strip_prefix('%') else {
                match &mut block {
                    Some(b) => b.push(line),
                    None if line.trim().is_empty() => {}
                    None => return Err(format!("text outside an %output block: {line:?}")),
                }
                continue;
            };
            flush(&mut block, &mut e.outputs);
            let (key, rest) = d.split_once(' ').unwrap_or((d, ""));
            match key {
                "%" => {}
                "entry" => e.entry = rest.trim().to_string(),
                "args" => e.args = rest.split_whitespace().map(parse_arg).collect::<Result<_, _>>()?,
                "seeds" => e.seeds = rest.trim().parse().map_err(|_| format!("bad seed count {rest:?}"))?,
                "output" => block = Some(Vec::new()),
                "all-outputs" => e.all_outputs = true,
                "line" => lines_rule.push(regex(rest)?),
                "count" => {
                    let (n, re) = rest.split_once(' ').ok_or("%count needs a number and a pattern")?;
                    let n = n.parse().map_err(|_| format!("bad count {n:?}"))?;
                    e.rules.push(Rule::Count(n, regex(re)?));
                }
                "before" => {
                    let (a, b) = rest.split_once("=>").ok_or("%before needs A => B")?;
                    e.rules.push(Rule::Before(regex(a)?, regex(b)?));
                }
                "sometimes" => e.rules.push(Rule::Sometimes(regex(rest)?)),
                "sequence" => {
                    let (re, range) = rest.trim().rsplit_once(' ').ok_or("%sequence needs a pattern and LO..HI")?;
                    let (lo, hi) = range.split_once("..").ok_or("%sequence range must be LO..HI")?;
                    let lo = lo.parse().map_err(|_| format!("bad bound {lo:?}"))?;
                    let hi = hi.parse().map_err(|_| format!("bad bound {hi:?}"))?;
                    e.rules.push(Rule::Sequence(regex(re)?, lo, hi));
                }
                other => return Err(format!("unknown directive %{other}")),
            }
        }
        flush(&mut block, &mut e.outputs);
        if !lines_rule.is_empty() {
            e.rules.push(Rule::Lines(lines_rule));
        }
        Ok(e)
    }
}

/// Violations of the per-run rules by one transcript.
pub fn violations(rules: &[Rule], out: &str) -> Vec<String> {
    let lines: Vec<&str> = out.lines().collect();
    let mut errs = Vec::new();
    for r in rules {
        match r {
            Rule::Lines(res) => {
                if let Some(l) = lines.iter().find(|l| !res.iter().any(|re| re.is_match(l))) {
                    errs.push(format!("unexpected line {l:?}"));
                }
            }
            Rule::Count(n, re) => {
                let c = lines.iter().filter(|l| re.is_match(l)).count();
                if c != *n {
                    errs.push(format!("{c} lines match {re}, expected {n}"));
                }
            }
            Rule::Before(a, b) => {
                let last_a = lines.iter().rposition(|l| a.is_match(l));
                let first_b = lines.iter().position(|l| b.is_match(l));
                if let (Some(x), Some(y)) = (last_a, first_b) {
                    if x > y {
                        errs.push(format!("line {:?} comes after {:?}", lines[x], lines[y]));
                    }
                }
            }
            Rule::Sequence(re, lo, hi) => {
                let got: Vec<i64> = lines
                    .iter()
                    .filter_map(|l| re.captures(l))
                    .filter_map(|c| c.get(1).and_then(|m| m.as_str().parse().ok()))
                    .collect();
                let want: Vec<i64> = (*lo..=*hi).collect();
                if got != want {
                    errs.push(format!("values matching {re} are {got:?}, expected {lo}..{hi}"));
                }
            }
            Rule::Sometimes(_) => {}
        }
    }
    errs
}

#[derive(Debug, Clone)]
pub struct CaseReport {
    pub name: String,
    pub seeds: u64,
    pub failures: Vec<String>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const MAX_FAILURES: usize = 5;

/// Run `exp` for seeds `0..seeds` (the expectation's own count unless
/// overridden).
pub fn check_case(program: &Program, name: &str, exp: &Expectation, seeds: Option<u64>, base: &RunConfig) -> CaseReport {
    let seeds = seeds.unwrap_or(exp.seeds).max(1);
    let mut failures = Vec::new();
    let mut seen = vec![false; exp.outputs.len()];
    let mut sometimes = vec![false; exp.rules.len()];
    for seed in 0..seeds {
        if failures.len() >= MAX_FAILURES {
            break;
        }
        let cfg = RunConfig { seed, ..base.clone() };
        let o = match run_program(program, &exp.entry, &exp.args, &cfg) {
            Ok(o) => o,
            Err(d) => {
                failures.push(format!("cannot run {}: {d}", exp.entry));
                break;
            }
        };
        if let Some(e) = &o.error {
            failures.push(format!("seed {seed}: {e}"));
            continue;
        }
        if !o.leaks.is_clean() {
            failures.push(format!("seed {seed}: leaked {:?}", o.leaks));
        }
        if !exp.outputs.is_empty() {
            match exp.outputs.iter().position(|t| *t == o.stdout) {
                Some(i) => seen[i] = true,
                None => failures.push(format!("seed {seed}: unexpected output {:?}", o.stdout)),
            }
        }
        for v in violations(&exp.rules, &o.stdout) {
            failures.push(format!("seed {seed}: {v}"));
        }
        for (i, r) in exp.rules.iter().enumerate() {
            if let Rule::Sometimes(re) = r {
                sometimes[i] |= o.stdout.lines().any(|l| re.is_match(l));
            }
        }
    }
    if exp.all_outputs {
        for (t, s) in exp.outputs.iter().zip(&seen) {
            if !s {
                failures.push(format!("output {t:?} never occurred in {seeds} seeds"));
            }
        }
    }
    for (r, s) in exp.rules.iter().zip(&sometimes) {
        if let (Rule::Sometimes(re), false) = (r, s) {
            failures.push(format!("no run printed a line matching {re}"));
        }
    }
    CaseReport { name: name.to_string(), seeds, failures }
}

#[derive(Debug)]
pub struct ProgramReport {
    pub file: PathBuf,
    pub diagnostics: Vec<Diagnostic>,
    pub cases: Vec<CaseReport>,
}

impl ProgramReport {
    pub fn passed(&self) -> bool {
        self.diagnostics.is_empty() && self.cases.iter().all(CaseReport::passed)
    }
}

/// Expected files for `stem` in `dir`, with the entry implied by each name.
pub fn expected_files(dir: &Path, stem: &str) -> io::Result<Vec<(PathBuf, String)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(rest) = name.strip_prefix(stem).and_then(|r| r.strip_suffix(".expected")) else { continue };
        let entry = match rest {
            "" => "main".to_string(),
            r if r.starts_with('.') && !r[1..].contains('.') => r[1..].to_string(),
            _ => continue,
        };
        out.push((path, entry));
    }
    out.sort();
    Ok(out)
}

/// Check every `.clls` file directly in `dir` and run its expected cases.
pub fn run_corpus(dir: &Path, seeds: Option<u64>, base: &RunConfig) -> io::Result<Vec<ProgramReport>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "clls"));
    files.sort();
    let mut reports = Vec::new();
    for file in files {
        let src = fs::read_to_string(&file)?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let program = match check_source(&src) {
            Ok(p) => p,
            Err(diagnostics) => {
                reports.push(ProgramReport { file, diagnostics, cases: Vec::new() });
                continue;
            }
        };
        let mut cases = Vec::new();
        for (path, entry) in expected_files(dir, &stem)? {
            let name = path.file_name().unwrap().to_string_lossy().to_string();
            let case = match Expectation::parse(&fs::read_to_string(&path)?, &entry) {
                Ok(exp) => check_case(&program, &name, &exp, seeds, base),
                Err(e) => CaseReport { name, seeds: 0, failures: vec![e] },
            };
            cases.push(case);
        }
        reports.push(ProgramReport { file, diagnostics: Vec::new(), cases });
    }
    Ok(reports)
}
