use std::fmt;

use crate::diag::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(&'static str),
    Ident(String),
    Label(String),
    Int(i64),
    Str(String),
    /// Operators and punctuation, stored by their lexeme.
    Sym(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub const KEYWORDS: &[&str] = &[
    "proc", "type", "rec", "corec", "gen_rec", "and", "cut", "letc", "share", "par", "fwd", "send",
    "recv", "pair", "close", "wait", "case", "offer", "choice", "of", "call", "affine", "coaffine",
    "use", "discard", "drop", "release", "cell", "take", "put", "state", "statel", "usage",
    "usagel", "if", "then", "else", "print", "println", "sleep", "lint", "lstring", "mod",
];

// Longest lexemes first so that maximal munch falls out of a linear scan.
const SYMBOLS: &[&str] = &[
    ";;", "<-", "->", "==", "||", "[]", ";", ",", ":", ".", "(", ")", "{", "}", "[", "]", "<", ">",
    "|", "~", "!", "?", "+", "-", "*", "/",
];

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "{k}"),
            TokenKind::Ident(s) => write!(f, "{s}"),
            TokenKind::Label(s) => write!(f, "#{s}"),
            TokenKind::Int(i) => write!(f, "{i}"),
            TokenKind::Str(s) => write!(f, "{s:?}"),
            TokenKind::Sym(s) => write!(f, "{s}"),
        }
    }
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    Lexer { chars: source.chars().collect(), pos: 0, line: 1, col: 1 }.run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
}

impl Lexer {
    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span { line: self.line, col: self.col }
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn run(mut self) -> Result<Vec<Token>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let span = self.span();
            let Some(c) = self.peek(0) else { break };
            let kind = if c.is_ascii_digit() {
                self.number(span)?
            } else if c == '"' {
                self.string(span)?
            } else if c == '#' {
                self.bump();
                let name = self.word();
                if name.is_empty() {
                    return Err(Diagnostic::error("lexical", "expected a label name after '#'", span));
                }
                TokenKind::Label(name)
            } else if c.is_alphabetic() || c == '_' {
                let w = self.word();
                match KEYWORDS.iter().find(|k| **k == w) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(w),
                }
            } else if let Some(sym) = SYMBOLS.iter().find(|s| self.starts_with(s)) {
                for _ in 0..sym.len() {
                    self.bump();
                }
                TokenKind::Sym(sym)
            } else {
                return Err(Diagnostic::error("lexical", format!("unexpected character {c:?}"), span));
            };
            out.push(Token { kind, span });
        }
        Ok(out)
    }

    fn skip_trivia(&mut self) -> Result<(), Diagnostic> {
        loop {
            match self.peek(0) {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('-') if self.peek(1) == Some('-') => self.line_comment(),
                Some('/') if self.peek(1) == Some('/') => self.line_comment(),
                Some('/') if self.peek(1) == Some('*') => {
                    let span = self.span();
                    self.bump();
                    self.bump();
                    loop {
                        if self.starts_with("*/") {
                            self.bump();
                            self.bump();
                            break;
                        }
                        if self.bump().is_none() {
                            return Err(Diagnostic::error("lexical", "unterminated block comment", span));
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn line_comment(&mut self) {
        while let Some(c) = self.peek(0) {
            if c == '\n' {
                break;
            }
            self.bump();
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if c.is_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn number(&mut self, span: Span) -> Result<TokenKind, Diagnostic> {
        let mut s = String::new();
        while let Some(c) = self.peek(0).filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        s.parse()
            .map(TokenKind::Int)
            .map_err(|_| Diagnostic::error("lexical", format!("integer literal {s} out of range"), span))
    }

    fn string(&mut self, span: Span) -> Result<TokenKind, Diagnostic> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(Diagnostic::error("lexical", "unterminated string literal", span)),
                Some('"') => return Ok(TokenKind::Str(s)),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some(c) => {
                        return Err(Diagnostic::error(
                            "lexical",
                            format!("unsupported escape \\{c}"),
                            self.span(),
                        ))
                    }
                    None => return Err(Diagnostic::error("lexical", "unterminated string literal", span)),
                },
                Some(c) => s.push(c),
            }
        }
    }
}
