//! Interactive sessions: declarations accumulate into one checked program,
//! invocations run it.

use crate::checker::{check_program, Program};
use crate::diag::Diagnostic;
use crate::runtime::{run_program, Outcome, RunConfig};
use crate::syntax::{parse_repl_input, Decl, ReplCommand};

pub enum Reply {
    /// Names introduced or replaced.
    Defined(Vec<String>),
    Ran(Outcome),
    Rejected(Vec<Diagnostic>),
    Nothing,
}

#[derive(Default)]
pub struct Session {
    decls: Vec<Decl>,
    program: Program,
    pub config: RunConfig,
}

impl Session {
    pub fn new(config: RunConfig) -> Self {
        Session { config, ..Default::default() }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    /// True once `buf` holds a complete input (terminated by `;;`) or a
    /// command.
    pub fn is_complete(buf: &str) -> bool {
        let t = buf.trim();
        t.is_empty() || t.starts_with(':') || t.ends_with(";;")
    }

    /// Handle one complete input. Redefining a name replaces the old
    /// declaration; a rejected input leaves the session unchanged.
    pub fn feed(&mut self, input: &str) -> Reply {
        let cmd = match parse_repl_input(input) {
            Ok(c) => c,
            Err(d) => return Reply::Rejected(vec![d]),
        };
        match cmd {
            ReplCommand::Empty => Reply::Nothing,
            ReplCommand::Declare(new) => {
                let names: Vec<String> = new.iter().flat_map(|d| d.names()).map(String::from).collect();
                let mut all: Vec<Decl> =
                    self.decls.iter().filter(|d| !d.names().iter().any(|n| names.iter().any(|m| m == n))).cloned().collect();
                all.extend(new);
                match check_program(&all) {
                    Ok(p) => {
                        self.decls = all;
                        self.program = p;
                        Reply::Defined(names)
                    }
                    Err(ds) => Reply::Rejected(ds),
                }
            }
            ReplCommand::Invoke { name, exp_args, .. } => match run_program(&self.program, &name, &exp_args, &self.config) {
                Ok(o) => Reply::Ran(o),
                Err(d) => Reply::Rejected(vec![d]),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declare_then_invoke() {
        let mut s = Session::default();
        assert!(matches!(s.feed("proc main() { println(\"hello world \"+(2*3)); [] };;"), Reply::Defined(_)));
        let Reply::Ran(o) = s.feed("main();;") else { panic!() };
        assert_eq!(o.stdout, "hello world 6\n");
        assert!(matches!(s.feed("nope();;"), Reply::Rejected(_)));
    }

    #[test]
    fn rejected_input_keeps_previous_definitions() {
        let mut s = Session::default();
        s.feed("proc main() { println(1); () };;");
        assert!(matches!(s.feed("proc bad(x:close) { () };;"), Reply::Rejected(_)));
        let Reply::Ran(o) = s.feed("main();;") else { panic!() };
        assert_eq!(o.stdout, "1\n");
    }
}
