use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use clls::corpus::run_corpus;
use clls::runtime::DEFAULT_STEPS;
use clls::session::{Reply, Session};
use clls::syntax::Expr;
use clls::{check_source, run_program, Diagnostic, Outcome, Program, RunConfig};

const OK: u8 = 0;
const CHECK: u8 = 1;
const IO: u8 = 2;
const RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "clls", version, about = "Type checker, interpreter and REPL for CLASS programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type check files.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Check a file and run one of its procedures.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "main")]
        entry: String,
        #[command(flatten)]
        opts: RunOpts,
        /// Literal arguments for the entry's unrestricted parameters.
        #[arg(last = true)]
        args: Vec<String>,
    },
    /// Interactive session: declarations and invocations end with `;;`.
    Repl {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check every program in a directory against its expected files.
    Corpus {
        dir: PathBuf,
        /// Seeds per case; defaults to each expected file's own count.
        #[arg(long)]
        seeds: Option<u64>,
    },
}

#[derive(clap::Args)]
struct RunOpts {
    #[arg(long, env = "CLLS_SEED", default_value_t = 0)]
    seed: u64,
    /// Step budget.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: u64,
    /// Print one line per scheduler event to stderr.
    #[arg(long)]
    trace: bool,
    /// Run tasks on several threads (output order is not reproducible).
    #[arg(long)]
    parallel: bool,
    /// Make `sleep k` wait k times this many milliseconds of real time.
    #[arg(long, value_name = "MS")]
    tick_ms: Option<u64>,
}

impl RunOpts {
    fn config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            max_steps: self.steps,
            trace: self.trace,
            parallel: self.parallel,
            echo: true,
            tick: self.tick_ms.map(Duration::from_millis),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match cli.cmd {
        Cmd::Check { files } => check(&files),
        Cmd::Run { file, entry, opts, args } => run(&file, &entry, &args, &opts.config()),
        Cmd::Repl { opts } => repl(opts.config()),
        Cmd::Corpus { dir, seeds } => corpus(&dir, seeds),
    })
}

fn report(file: &Path, ds: &[Diagnostic]) {
    for d in ds {
        eprintln!("{}", d.render(&file.display().to_string()));
    }
}

fn load(file: &Path) -> Result<Program, u8> {
    let src = std::fs::read_to_string(file).map_err(|e| {
        eprintln!("{}: {e}", file.display());
        IO
    })?;
    check_source(&src).map_err(|ds| {
        report(file, &ds);
        CHECK
    })
}

fn check(files: &[PathBuf]) -> u8 {
    let mut code = OK;
    for f in files {
        match load(f) {
            Ok(p) => println!("{}: ok ({} procedures)", f.display(), p.procs.len()),
            Err(c) => code = code.max(c),
        }
    }
    code
}

fn parse_arg(s: &str) -> Expr {
    match s.parse() {
        Ok(n) => Expr::Int(n),
        Err(_) => Expr::Str(s.to_string()),
    }
}

fn finish(o: &Outcome) -> u8 {
    match &o.error {
        Some(e) => {
            eprintln!("runtime error [{}]: {e}", e.rule());
            RUNTIME
        }
        None if !o.leaks.is_clean() => {
            eprintln!("resource leak: {:?}", o.leaks);
            RUNTIME
        }
        None => OK,
    }
}

fn run(file: &Path, entry: &str, args: &[String], cfg: &RunConfig) -> u8 {
    let program = match load(file) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let args: Vec<Expr> = args.iter().map(|a| parse_arg(a)).collect();
    match run_program(&program, entry, &args, cfg) {
        Ok(o) => finish(&o),
        Err(d) => {
            report(file, &[d]);
            CHECK
        }
    }
}

fn repl(cfg: RunConfig) -> u8 {
    let mut session = Session::new(cfg);
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut buf = String::new();
    loop {
        print!("{}", if buf.is_empty() { "> " } else { "| " });
        let _ = io::stdout().flush();
        let Some(line) = lines.next() else { break };
        let Ok(line) = line else { return IO };
        buf.push_str(&line);
        buf.push('\n');
        if !Session::is_complete(&buf) {
            continue;
        }
        let input = std::mem::take(&mut buf);
        match input.trim() {
            ":quit" | ":q" => break,
            ":help" => {
                println!("end declarations and invocations with ;;  e.g.  main();;   :quit leaves");
                continue;
            }
            cmd if cmd.starts_with(':') => {
                println!("unknown command {cmd}");
                continue;
            }
            _ => {}
        }
        match session.feed(&input) {
            Reply::Defined(names) => println!("defined {}", names.join(", ")),
            Reply::Ran(o) => {
                finish(&o);
            }
            Reply::Rejected(ds) => {
                for d in ds {
                    println!("{d}");
                }
            }
            Reply::Nothing => {}
        }
    }
    OK
}

fn corpus(dir: &Path, seeds: Option<u64>) -> u8 {
    let reports = match run_corpus(dir, seeds, &RunConfig::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            return IO;
        }
    };
    let mut code = OK;
    for r in &reports {
        let name = r.file.display();
        if !r.diagnostics.is_empty() {
            println!("FAIL {name}: rejected by the checker");
            report(&r.file, &r.diagnostics);
            code = code.max(CHECK);
            continue;
        }
        if r.cases.is_empty() {
            println!("ok   {name}: checked, no expected runs");
        }
        for c in &r.cases {
            if c.passed() {
                println!("ok   {name} {}: {} seed(s), no leaks", c.name, c.seeds);
            } else {
                println!("FAIL {name} {}", c.name);
                for f in &c.failures {
                    println!("     {f}");
                }
                code = code.max(RUNTIME);
            }
        }
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} programs passed", reports.len());
    code
}
