//! Lexing, parsing, desugaring and printing of source text.

pub mod ast;
pub mod desugar;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use ast::*;
pub use desugar::{desugar_decl, desugar_process};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_program, parse_repl_input, parse_source};
pub use pretty::{print_decl, print_decls, print_process, print_type};

use crate::diag::Diagnostic;

/// Parse and desugar a whole file.
pub fn parse_core(source: &str) -> Result<Vec<Decl>, Diagnostic> {
    Ok(parse_source(source)?.into_iter().map(desugar_decl).collect())
}
