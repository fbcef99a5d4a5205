use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use crate::diag::{Diagnostic, Span};

pub fn parse_program(tokens: &[Token]) -> Result<Vec<Decl>, Diagnostic> {
    let mut p = Parser::new(tokens);
    let mut decls = Vec::new();
    while !p.at_end() {
        decls.push(p.decl()?);
    }
    Ok(decls)
}

/// Tokenize and parse a whole source file.
pub fn parse_source(source: &str) -> Result<Vec<Decl>, Diagnostic> {
    parse_program(&tokenize(source)?)
}

/// One REPL line: an invocation `name(;args);;`, declarations, or nothing.
pub fn parse_repl_input(line: &str) -> Result<ReplCommand, Diagnostic> {
    let tokens = tokenize(line)?;
    if tokens.is_empty() {
        return Ok(ReplCommand::Empty);
    }
    let mut p = Parser::new(&tokens);
    if matches!(p.peek(), Some(TokenKind::Keyword("proc" | "type"))) {
        let mut decls = Vec::new();
        while !p.at_end() {
            decls.push(p.decl()?);
        }
        return Ok(ReplCommand::Declare(decls));
    }
    let span = p.span();
    let name = p.ident()?;
    p.expect("(")?;
    let mut exp_args = Vec::new();
    if !p.eat(")") {
        if !p.check(";") {
            return Err(p.error_here("invocations take exponential arguments only, as in name(;1,2)"));
        }
        p.expect(";")?;
        if !p.check(")") {
            exp_args = p.comma_list(Parser::expr)?;
        }
        p.expect(")")?;
    }
    p.expect(";;")?;
    if !p.at_end() {
        return Err(p.error_here("unexpected input after ';;'"));
    }
    Ok(ReplCommand::Invoke { name, exp_args, span })
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token]) -> Self {
        Parser { toks, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, off: usize) -> Option<&TokenKind> {
        self.toks.get(self.pos + off).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.span)
            .unwrap_or_default()
    }

    fn error_here(&self, msg: impl Into<String>) -> Diagnostic {
        let found = match self.peek() {
            Some(k) => format!("found '{k}'"),
            None => "found end of input".to_string(),
        };
        Diagnostic::error("syntax", format!("{}, {found}", msg.into()), self.span())
    }

    fn advance(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn check(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Sym(s)) if *s == sym)
    }

    fn check_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Keyword(k)) if *k == kw)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if self.check(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.check_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), Diagnostic> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{sym}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), Diagnostic> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{kw}'")))
        }
    }

    fn ident(&mut self) -> Result<String, Diagnostic> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here("expected an identifier")),
        }
    }

    fn label(&mut self) -> Result<String, Diagnostic> {
        match self.peek() {
            Some(TokenKind::Label(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here("expected a label")),
        }
    }

    fn comma_list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, Diagnostic>) -> Result<Vec<T>, Diagnostic> {
        let mut out = vec![item(self)?];
        while self.eat(",") {
            out.push(item(self)?);
        }
        Ok(out)
    }

    // ---- declarations ----

    fn rec_flag(&mut self) -> RecFlag {
        if self.eat_kw("rec") {
            RecFlag::Rec
        } else if self.eat_kw("corec") {
            RecFlag::Corec
        } else if self.eat_kw("gen_rec") {
            RecFlag::GenRec
        } else {
            RecFlag::None
        }
    }

    fn decl(&mut self) -> Result<Decl, Diagnostic> {
        let span = self.span();
        if self.eat_kw("proc") {
            let rec = self.rec_flag();
            let name = self.ident()?;
            let mut type_params = Vec::new();
            if self.eat("<") {
                type_params = self.comma_list(Parser::ident)?;
                self.expect(">")?;
            }
            self.expect("(")?;
            let mut params = Vec::new();
            let mut exp_params = Vec::new();
            if !self.check(";") && !self.check(")") {
                params = self.comma_list(Parser::param)?;
            }
            if self.eat(";") && !self.check(")") {
                exp_params = self.comma_list(Parser::param)?;
            }
            self.expect(")")?;
            self.expect("{")?;
            let body = self.proc()?;
            self.expect("}")?;
            self.expect(";;")?;
            Ok(Decl::Proc(ProcDef { name, rec, type_params, params, exp_params, body, span }))
        } else if self.eat_kw("type") {
            let rec = self.rec_flag();
            if rec == RecFlag::GenRec {
                return Err(Diagnostic::error("syntax", "gen_rec applies to procedures only", span));
            }
            let mut defs = vec![self.type_def()?];
            while self.eat_kw("and") {
                defs.push(self.type_def()?);
            }
            self.expect(";;")?;
            Ok(Decl::Types(TypeGroup { rec, defs }))
        } else {
            Err(self.error_here("expected 'proc' or 'type'"))
        }
    }

    fn type_def(&mut self) -> Result<TypeDef, Diagnostic> {
        let span = self.span();
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat("(") {
            params = self.comma_list(Parser::ident)?;
            self.expect(")")?;
        }
        self.expect("{")?;
        let body = self.ty()?;
        self.expect("}")?;
        Ok(TypeDef { name, params, body, span })
    }

    fn param(&mut self) -> Result<Param, Diagnostic> {
        let span = self.span();
        let name = self.ident()?;
        self.expect(":")?;
        let ty = self.ty()?;
        Ok(Param { name, ty, span })
    }

    // ---- types ----

    fn prefix(&mut self) -> Option<TypePrefix> {
        let p = match self.peek()? {
            TokenKind::Sym("~") => TypePrefix::Dual,
            TokenKind::Sym("!") => TypePrefix::Bang,
            TokenKind::Sym("?") => TypePrefix::Quest,
            TokenKind::Keyword("affine") => TypePrefix::Affine,
            TokenKind::Keyword("coaffine") => TypePrefix::Coaffine,
            TokenKind::Keyword("state") => TypePrefix::State,
            TokenKind::Keyword("statel") => TypePrefix::StateLocked,
            TokenKind::Keyword("usage") => TypePrefix::Usage,
            TokenKind::Keyword("usagel") => TypePrefix::UsageLocked,
            _ => return None,
        };
        self.pos += 1;
        Some(p)
    }

    /// A full type; `send A; B` extends as far right as possible.
    fn ty(&mut self) -> Result<TypeExpr, Diagnostic> {
        if let Some(p) = self.prefix() {
            return Ok(TypeExpr::Prefix(p, Box::new(self.ty()?)));
        }
        if self.eat_kw("send") || self.eat_kw("pair") {
            let payload = self.payload_ty()?;
            self.expect(";")?;
            return Ok(TypeExpr::Send(Box::new(payload), Box::new(self.ty()?)));
        }
        if self.eat_kw("recv") {
            let payload = self.payload_ty()?;
            self.expect(";")?;
            return Ok(TypeExpr::Recv(Box::new(payload), Box::new(self.ty()?)));
        }
        self.atom_ty()
    }

    /// Payload of send/recv: prefixes and atoms only, so the following ';' is
    /// left for the continuation.
    fn payload_ty(&mut self) -> Result<TypeExpr, Diagnostic> {
        if let Some(p) = self.prefix() {
            return Ok(TypeExpr::Prefix(p, Box::new(self.payload_ty()?)));
        }
        self.atom_ty()
    }

    fn atom_ty(&mut self) -> Result<TypeExpr, Diagnostic> {
        match self.peek() {
            Some(TokenKind::Keyword("close")) => {
                self.pos += 1;
                Ok(TypeExpr::Close)
            }
            Some(TokenKind::Keyword("wait")) => {
                self.pos += 1;
                Ok(TypeExpr::Wait)
            }
            Some(TokenKind::Keyword("lint")) => {
                self.pos += 1;
                Ok(TypeExpr::Lint)
            }
            Some(TokenKind::Keyword("lstring")) => {
                self.pos += 1;
                Ok(TypeExpr::Lstring)
            }
            Some(TokenKind::Keyword("offer")) => {
                self.pos += 1;
                self.expect_kw("of")?;
                Ok(TypeExpr::Offer(self.type_branches()?))
            }
            Some(TokenKind::Keyword("choice" | "case")) => {
                self.pos += 1;
                self.expect_kw("of")?;
                Ok(TypeExpr::Choice(self.type_branches()?))
            }
            Some(TokenKind::Ident(_)) => {
                let name = self.ident()?;
                let mut args = Vec::new();
                if self.eat("(") {
                    args = self.comma_list(Parser::ty)?;
                    self.expect(")")?;
                }
                Ok(TypeExpr::Name(name, args))
            }
            Some(TokenKind::Sym("(")) => {
                self.pos += 1;
                let t = self.ty()?;
                self.expect(")")?;
                Ok(t)
            }
            _ => Err(self.error_here("expected a type")),
        }
    }

    fn type_branches(&mut self) -> Result<Vec<(String, TypeExpr)>, Diagnostic> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.eat("}") {
            let first = out.is_empty();
            if !self.eat("|") && !first {
                return Err(self.error_here("expected '|' or '}'"));
            }
            let label = self.label()?;
            self.expect(":")?;
            out.push((label, self.ty()?));
        }
        if out.is_empty() {
            return Err(self.error_here("a branch type needs at least one label"));
        }
        Ok(out)
    }

    // ---- processes ----

    fn proc_ends(&self) -> bool {
        matches!(
            self.peek(),
            None | Some(TokenKind::Sym("}" | "||" | "|" | ")" | ";;"))
        )
    }

    fn proc(&mut self) -> Result<Process, Diagnostic> {
        let span = self.span();
        let term = self.terminal_or_prefix()?;
        match term {
            Step::Done(p) => {
                if self.eat(";") && !self.proc_ends() {
                    let cont = self.proc()?;
                    Ok(Process::new(ProcKind::Then { first: Box::new(p), cont: Box::new(cont) }, span))
                } else {
                    Ok(p)
                }
            }
            Step::Prefix(build) => {
                self.expect(";")?;
                let cont = self.proc()?;
                Ok(Process::new(build(Box::new(cont)), span))
            }
        }
    }

    fn bound(&mut self) -> Result<(String, String), Diagnostic> {
        let chan = self.ident()?;
        self.expect("(")?;
        let bind = self.ident()?;
        self.expect(")")?;
        Ok((chan, bind))
    }

    fn terminal_or_prefix(&mut self) -> Result<Step, Diagnostic> {
        let span = self.span();
        let done = |k: ProcKind| Ok(Step::Done(Process::new(k, span)));
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here("expected a process"));
        };
        match tok {
            TokenKind::Sym("[]") => {
                self.pos += 1;
                done(ProcKind::Inert)
            }
            TokenKind::Sym("(") if matches!(self.peek_at(1), Some(TokenKind::Sym(")"))) => {
                self.pos += 2;
                done(ProcKind::Inert)
            }
            TokenKind::Sym("{") => {
                self.pos += 1;
                let p = self.proc()?;
                self.expect("}")?;
                Ok(Step::Done(p))
            }
            TokenKind::Label(label) => {
                self.pos += 1;
                let chan = self.ident()?;
                Ok(Step::prefix(move |cont| ProcKind::Select { label, chan, cont }))
            }
            TokenKind::Keyword(kw) => {
                self.pos += 1;
                match kw {
                    "close" => done(ProcKind::Close(self.ident()?)),
                    "fwd" => {
                        let a = self.ident()?;
                        let b = self.ident()?;
                        done(ProcKind::Forward(a, b))
                    }
                    "drop" | "release" => done(ProcKind::Drop(self.ident()?)),
                    "discard" => done(ProcKind::Discard(self.ident()?)),
                    "cell" => {
                        let chan = self.ident()?;
                        self.expect("(")?;
                        let init = self.arg()?;
                        self.expect(")")?;
                        done(ProcKind::Cell { chan, init })
                    }
                    "case" => {
                        let chan = self.ident()?;
                        self.expect_kw("of")?;
                        self.expect("{")?;
                        let mut branches = Vec::new();
                        while !self.eat("}") {
                            if !self.eat("|") && !branches.is_empty() {
                                return Err(self.error_here("expected '|' or '}'"));
                            }
                            let label = self.label()?;
                            self.expect(":")?;
                            branches.push((label, self.proc()?));
                        }
                        done(ProcKind::Case { chan, branches })
                    }
                    "cut" => {
                        self.expect("{")?;
                        let left = self.proc()?;
                        self.expect("|")?;
                        let chan = self.ident()?;
                        self.expect(":")?;
                        let ty = self.ty()?;
                        self.expect("|")?;
                        let right = self.proc()?;
                        self.expect("}")?;
                        // The annotation types the right-hand end; the node
                        // records the left one.
                        let ty = Some(ty.negated());
                        done(ProcKind::Cut { chan, ty, left: Box::new(left), right: Box::new(right) })
                    }
                    "par" => {
                        let (left, right) = self.two_branches()?;
                        done(ProcKind::Par { left, right, implicit: false })
                    }
                    "share" => {
                        let chan = self.ident()?;
                        let (left, right) = self.two_branches()?;
                        done(ProcKind::Share { chan, left, right })
                    }
                    "if" => {
                        let cond = self.expr()?;
                        self.eat_kw("then");
                        self.expect("{")?;
                        let then = self.proc()?;
                        self.expect("}")?;
                        self.expect_kw("else")?;
                        self.expect("{")?;
                        let els = self.proc()?;
                        self.expect("}")?;
                        done(ProcKind::If { cond, then: Box::new(then), els: Box::new(els) })
                    }
                    "send" => {
                        let chan = self.ident()?;
                        self.expect("(")?;
                        let arg = self.arg()?;
                        self.expect(")")?;
                        Ok(Step::prefix(move |cont| ProcKind::Send { chan, arg, cont }))
                    }
                    "recv" => {
                        let (chan, bind) = self.bound()?;
                        Ok(Step::prefix(move |cont| ProcKind::Recv { chan, bind, cont }))
                    }
                    "wait" => {
                        let chan = self.ident()?;
                        Ok(Step::prefix(move |cont| ProcKind::Wait { chan, cont }))
                    }
                    "call" => {
                        let (chan, bind) = self.bound()?;
                        Ok(Step::prefix(move |cont| ProcKind::CallRepl { chan, bind, cont }))
                    }
                    "affine" => {
                        let chan = self.ident()?;
                        Ok(Step::prefix(move |cont| ProcKind::Affine { chan, cont }))
                    }
                    "use" => {
                        let chan = self.ident()?;
                        Ok(Step::prefix(move |cont| ProcKind::Use { chan, cont }))
                    }
                    "take" => {
                        let (chan, bind) = self.bound()?;
                        Ok(Step::prefix(move |cont| ProcKind::Take { chan, bind, cont }))
                    }
                    "put" => {
                        let chan = self.ident()?;
                        self.expect("(")?;
                        let arg = self.arg()?;
                        self.expect(")")?;
                        Ok(Step::prefix(move |cont| ProcKind::Put { chan, arg, cont }))
                    }
                    "print" | "println" => {
                        self.expect("(")?;
                        let expr = self.expr()?;
                        self.expect(")")?;
                        let newline = kw == "println";
                        Ok(Step::prefix(move |cont| ProcKind::Print { expr, newline, cont }))
                    }
                    "sleep" => {
                        let ticks = self.expr()?;
                        Ok(Step::prefix(move |cont| ProcKind::Sleep { ticks, cont }))
                    }
                    "letc" => {
                        let chan = self.ident()?;
                        self.expect(":")?;
                        let ty = if self.check("{") { None } else { Some(self.ty()?) };
                        self.expect("{")?;
                        let body = self.proc()?;
                        self.expect("}")?;
                        Ok(Step::prefix(move |cont| ProcKind::Letc { chan, ty, body: Box::new(body), cont }))
                    }
                    _ => {
                        self.pos -= 1;
                        Err(self.error_here("expected a process"))
                    }
                }
            }
            TokenKind::Sym("!") => {
                self.pos += 1;
                let (chan, bind) = self.bound()?;
                Ok(Step::prefix(move |body| ProcKind::Server { chan, bind, body }))
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if self.eat("<-") {
                    let arg = self.arg()?;
                    return Ok(Step::prefix(move |cont| ProcKind::Send { chan: name, arg, cont }));
                }
                if self.eat("->") {
                    let bind = self.ident()?;
                    return Ok(Step::prefix(move |cont| ProcKind::Recv { chan: name, bind, cont }));
                }
                let mut type_args = Vec::new();
                if self.eat("<") {
                    type_args = self.comma_list(Parser::ty)?;
                    self.expect(">")?;
                }
                self.expect("(")?;
                let mut args = Vec::new();
                let mut exp_args = Vec::new();
                if !self.check(";") && !self.check(")") {
                    args = self.comma_list(Parser::arg)?;
                }
                if self.eat(";") && !self.check(")") {
                    exp_args = self.comma_list(Parser::expr)?;
                }
                self.expect(")")?;
                done(ProcKind::Call { name, type_args, args, exp_args })
            }
            _ => Err(self.error_here("expected a process")),
        }
    }

    fn two_branches(&mut self) -> Result<(Box<Process>, Box<Process>), Diagnostic> {
        self.expect("{")?;
        let left = self.proc()?;
        self.expect("||")?;
        let right = self.proc()?;
        self.expect("}")?;
        Ok((Box::new(left), Box::new(right)))
    }

    fn arg(&mut self) -> Result<Arg, Diagnostic> {
        let braced = self.check("{")
            && matches!(self.peek_at(1), Some(TokenKind::Ident(_)))
            && matches!(self.peek_at(2), Some(TokenKind::Sym(".")));
        if braced {
            self.pos += 1;
            let bind = self.ident()?;
            self.expect(".")?;
            let body = self.proc()?;
            self.expect("}")?;
            return Ok(Arg::Closure(bind, Box::new(body)));
        }
        if matches!(self.peek(), Some(TokenKind::Ident(_))) && matches!(self.peek_at(1), Some(TokenKind::Sym("."))) {
            let bind = self.ident()?;
            self.expect(".")?;
            let body = self.proc()?;
            return Ok(Arg::Closure(bind, Box::new(body)));
        }
        Ok(match self.expr()? {
            Expr::Var(v) => Arg::Name(v),
            e => Arg::Expr(e),
        })
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let lhs = self.additive()?;
        if self.eat("==") {
            let rhs = self.additive()?;
            return Ok(Expr::Bin(BinOp::Eq, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.multiplicative()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("/") {
                BinOp::Div
            } else if self.eat_kw("mod") {
                BinOp::Mod
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, Diagnostic> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        match self.advance().map(|t| &t.kind) {
            Some(TokenKind::Int(i)) => Ok(Expr::Int(*i)),
            Some(TokenKind::Str(s)) => Ok(Expr::Str(s.clone())),
            Some(TokenKind::Ident(v)) => Ok(Expr::Var(v.clone())),
            Some(TokenKind::Sym("(")) => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => {
                self.pos -= 1;
                Err(self.error_here("expected an expression"))
            }
        }
    }
}

enum Step {
    Done(Process),
    Prefix(Box<dyn FnOnce(Box<Process>) -> ProcKind>),
}

impl Step {
    fn prefix(f: impl FnOnce(Box<Process>) -> ProcKind + 'static) -> Step {
        Step::Prefix(Box::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_proc(src: &str) -> ProcDef {
        match parse_source(src).unwrap().remove(0) {
            Decl::Proc(p) => p,
            d => panic!("expected a proc, got {d:?}"),
        }
    }

    #[test]
    fn minimal_proc() {
        let p = one_proc("proc p(x:close){ close x };;");
        assert_eq!(p.params.len(), 1);
        assert_eq!(p.body.kind, ProcKind::Close("x".into()));
    }

    #[test]
    fn exponential_params_after_semicolon() {
        let p = one_proc("proc rec intsfm(nk: AIntStream; k:~lint) { affine nk; nk <- k; intsfm(nk;k+1) };;");
        assert_eq!(p.rec, RecFlag::Rec);
        assert_eq!(p.params[0].name, "nk");
        assert_eq!(p.exp_params[0].name, "k");
    }

    #[test]
    fn semicolon_inside_param_type_belongs_to_the_type() {
        let p = one_proc("proc rec len<A>(a:~List(A), ao:pair List(A);!lint) { [] };;");
        assert_eq!(p.params.len(), 2);
        assert!(p.exp_params.is_empty());
        assert!(matches!(p.params[1].ty, TypeExpr::Send(..)));
    }

    #[test]
    fn mutually_recursive_type_group() {
        let d = parse_source(
            "type rec LList(A) { state Node(A) } and Node(A) { choice of { | #Nil : close | #Next : pair affine A; LList(A) } };;",
        )
        .unwrap();
        match &d[0] {
            Decl::Types(g) => {
                assert_eq!(g.rec, RecFlag::Rec);
                assert_eq!(g.defs.len(), 2);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn closure_arguments() {
        let p = one_proc("proc f(b:~Barrier){ put b(nw. affine nw; init(nw;0)); release b };;");
        let ProcKind::Put { arg: Arg::Closure(x, body), .. } = &p.body.kind else { panic!() };
        assert_eq!(x, "nw");
        assert!(matches!(body.kind, ProcKind::Affine { .. }));
        let p = one_proc("proc f(rv:X){ rv <- { r. None(r) }; close rv };;");
        assert!(matches!(p.body.kind, ProcKind::Send { arg: Arg::Closure(..), .. }));
    }

    #[test]
    fn expression_precedence() {
        let p = one_proc("proc f(;v:~lint, n:~lint){ if (v mod n == 0) then { [] } else { [] } };;");
        let ProcKind::If { cond, .. } = p.body.kind else { panic!() };
        let Expr::Bin(BinOp::Eq, lhs, _) = cond else { panic!() };
        assert!(matches!(*lhs, Expr::Bin(BinOp::Mod, ..)));
    }

    #[test]
    fn repl_commands() {
        assert_eq!(
            parse_repl_input("main();;").unwrap(),
            ReplCommand::Invoke { name: "main".into(), exp_args: vec![], span: Span { line: 1, col: 1 } }
        );
        match parse_repl_input("main_sa(;20);;").unwrap() {
            ReplCommand::Invoke { name, exp_args, .. } => {
                assert_eq!(name, "main_sa");
                assert_eq!(exp_args, vec![Expr::Int(20)]);
            }
            c => panic!("{c:?}"),
        }
        assert!(matches!(
            parse_repl_input("proc id(x:close,y:wait){fwd x y};;").unwrap(),
            ReplCommand::Declare(d) if d.len() == 1
        ));
        assert_eq!(parse_repl_input("   ").unwrap(), ReplCommand::Empty);
        assert!(parse_repl_input("main(x);;").is_err());
    }

    #[test]
    fn syntax_error_names_expected_token() {
        let err = parse_source("proc p(x:close) close x };;").unwrap_err();
        assert_eq!(err.rule, "syntax");
        assert!(err.message.contains("expected '{'"), "{}", err.message);
    }
}
