//! Structured diagnostics shared by the parser, the checker and the CLI.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A rejection, always tagged with the name of the violated rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: &'static str,
    pub message: String,
    pub span: Span,
    pub severity: Severity,
}

impl Diagnostic {
    pub fn error(rule: &'static str, message: impl Into<String>, span: Span) -> Self {
        Diagnostic { rule, message: message.into(), span, severity: Severity::Error }
    }

    /// The same diagnostic reported at `span`.
    pub fn at(mut self, span: Span) -> Self {
        self.span = span;
        self
    }

    pub fn with_message_prefix(mut self, prefix: &str) -> Self {
        self.message.insert_str(0, prefix);
        self
    }

    /// Line-oriented rendering: `file:line:col: rule: message`.
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}: {}", self.span.line, self.span.col, self.rule, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, self.rule, self.message)
    }
}

impl std::error::Error for Diagnostic {}
