//! Debug pretty-printer. Output re-parses to the same tree, so printing is
//! idempotent: `print(parse(print(d))) == print(d)`.

use std::fmt::Write;

use super::ast::*;

pub fn print_decls(decls: &[Decl]) -> String {
    decls.iter().map(print_decl).collect::<Vec<_>>().join("\n")
}

pub fn print_decl(d: &Decl) -> String {
    match d {
        Decl::Proc(p) => {
            let mut s = String::from("proc ");
            s += rec_kw(p.rec);
            s += &p.name;
            if !p.type_params.is_empty() {
                let _ = write!(s, "<{}>", p.type_params.join(", "));
            }
            s.push('(');
            s += &params(&p.params);
            if !p.exp_params.is_empty() {
                s += "; ";
                s += &params(&p.exp_params);
            }
            s += ") {\n";
            print_proc(&p.body, 1, &mut s);
            s += "\n};;\n";
            s
        }
        Decl::Types(g) => {
            let defs: Vec<String> = g
                .defs
                .iter()
                .map(|d| {
                    let ps = if d.params.is_empty() { String::new() } else { format!("({})", d.params.join(", ")) };
                    format!("{}{ps} {{ {} }}", d.name, print_type(&d.body))
                })
                .collect();
            format!("type {}{};;\n", rec_kw(g.rec), defs.join("\nand "))
        }
    }
}

fn rec_kw(r: RecFlag) -> &'static str {
    match r {
        RecFlag::None => "",
        RecFlag::Rec => "rec ",
        RecFlag::Corec => "corec ",
        RecFlag::GenRec => "gen_rec ",
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter().map(|p| format!("{}: {}", p.name, print_type(&p.ty))).collect::<Vec<_>>().join(", ")
}

pub fn print_type(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Close => "close".into(),
        TypeExpr::Wait => "wait".into(),
        TypeExpr::Lint => "lint".into(),
        TypeExpr::Lstring => "lstring".into(),
        TypeExpr::Send(a, b) => format!("send {}; {}", payload(a), print_type(b)),
        TypeExpr::Recv(a, b) => format!("recv {}; {}", payload(a), print_type(b)),
        TypeExpr::Offer(bs) => format!("offer of {{ {} }}", branches(bs)),
        TypeExpr::Choice(bs) => format!("choice of {{ {} }}", branches(bs)),
        TypeExpr::Prefix(p, inner) => format!("{}{}", p.keyword(), print_type(inner)),
        TypeExpr::Name(n, args) if args.is_empty() => n.clone(),
        TypeExpr::Name(n, args) => {
            format!("{n}({})", args.iter().map(print_type).collect::<Vec<_>>().join(", "))
        }
    }
}

fn payload(t: &TypeExpr) -> String {
    fn sequenced(t: &TypeExpr) -> bool {
        match t {
            TypeExpr::Send(..) | TypeExpr::Recv(..) => true,
            TypeExpr::Prefix(_, inner) => sequenced(inner),
            _ => false,
        }
    }
    if sequenced(t) {
        format!("({})", print_type(t))
    } else {
        print_type(t)
    }
}

fn branches(bs: &[(String, TypeExpr)]) -> String {
    bs.iter().map(|(l, t)| format!("| #{l}: {}", print_type(t))).collect::<Vec<_>>().join(" ")
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Int(i) if *i < 0 => format!("({i})"),
        Expr::Int(i) => i.to_string(),
        Expr::Str(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
        Expr::Var(v) => v.clone(),
        Expr::Neg(inner) => match **inner {
            Expr::Var(_) => format!("-{}", print_expr(inner)),
            Expr::Int(i) if i >= 0 => format!("-{i}"),
            _ => format!("-({})", print_expr(inner)),
        },
        Expr::Bin(op, a, b) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Mod => "mod",
                BinOp::Eq => "==",
            };
            format!("{} {sym} {}", operand(a), operand(b))
        }
    }
}

fn operand(e: &Expr) -> String {
    match e {
        Expr::Bin(..) => format!("({})", print_expr(e)),
        _ => print_expr(e),
    }
}

fn print_arg(a: &Arg) -> String {
    match a {
        Arg::Name(n) => n.clone(),
        Arg::Expr(e) => print_expr(e),
        Arg::Closure(x, body) => {
            let mut s = format!("{{ {x}. ");
            print_inline(body, &mut s);
            s += " }";
            s
        }
    }
}

fn print_inline(p: &Process, out: &mut String) {
    let mut s = String::new();
    print_proc(p, 0, &mut s);
    let flat: Vec<&str> = s.lines().map(str::trim).collect();
    out.push_str(&flat.join(" "));
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Forms that must be followed by `; P` when printed.
fn is_prefix(p: &Process) -> bool {
    use ProcKind::*;
    matches!(
        p.kind,
        Send { .. }
            | Recv { .. }
            | Select { .. }
            | Wait { .. }
            | Server { .. }
            | CallRepl { .. }
            | Affine { .. }
            | Use { .. }
            | Take { .. }
            | Put { .. }
            | Print { .. }
            | Sleep { .. }
            | Letc { .. }
            | Cut { ty: None, .. }
            | Then { .. }
            | Par { implicit: true, .. }
    )
}

pub fn print_proc(p: &Process, level: usize, out: &mut String) {
    use ProcKind::*;
    indent(level, out);
    let line = |out: &mut String, head: String, cont: &Process| {
        out.push_str(&head);
        out.push_str(";\n");
        print_proc(cont, level, out);
    };
    match &p.kind {
        Inert => out.push_str("[]"),
        Forward(a, b) => {
            let _ = write!(out, "fwd {a} {b}");
        }
        Close(c) => {
            let _ = write!(out, "close {c}");
        }
        Discard(c) => {
            let _ = write!(out, "discard {c}");
        }
        Drop(c) => {
            let _ = write!(out, "drop {c}");
        }
        Then { first, cont } | Par { left: first, right: cont, implicit: true } => {
            if is_prefix(first) {
                out.push_str("{\n");
                print_proc(first, level + 1, out);
                out.push('\n');
                indent(level, out);
                out.push('}');
            } else {
                // Strip the indentation print_proc would add a second time.
                let mut s = String::new();
                print_proc(first, level, &mut s);
                out.push_str(s.trim_start());
            }
            out.push_str(";\n");
            print_proc(cont, level, out);
        }
        Par { left, right, implicit: false } => {
            out.push_str("par {\n");
            print_proc(left, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push_str("||\n");
            print_proc(right, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push('}');
        }
        Share { chan, left, right } => {
            let _ = writeln!(out, "share {chan} {{");
            print_proc(left, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push_str("||\n");
            print_proc(right, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push('}');
        }
        Cut { chan, ty: Some(ty), left, right } => {
            out.push_str("cut {\n");
            print_proc(left, level + 1, out);
            out.push('\n');
            indent(level, out);
            let _ = writeln!(out, "|{chan}: {}|", print_type(&ty.negated()));
            print_proc(right, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push('}');
        }
        Cut { chan, ty: None, left: body, right: cont } | Letc { chan, ty: None, body, cont } => {
            let _ = writeln!(out, "letc {chan}: {{");
            print_proc(body, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push_str("};\n");
            print_proc(cont, level, out);
        }
        Letc { chan, ty: Some(ty), body, cont } => {
            let _ = writeln!(out, "letc {chan}: {} {{", print_type(ty));
            print_proc(body, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push_str("};\n");
            print_proc(cont, level, out);
        }
        Call { name, type_args, args, exp_args } => {
            out.push_str(name);
            if !type_args.is_empty() {
                let _ = write!(out, "<{}>", type_args.iter().map(print_type).collect::<Vec<_>>().join(", "));
            }
            out.push('(');
            out.push_str(&args.iter().map(print_arg).collect::<Vec<_>>().join(", "));
            if !exp_args.is_empty() {
                out.push_str("; ");
                out.push_str(&exp_args.iter().map(print_expr).collect::<Vec<_>>().join(", "));
            }
            out.push(')');
        }
        Cell { chan, init } => {
            let _ = write!(out, "cell {chan}({})", print_arg(init));
        }
        Case { chan, branches } => {
            let _ = writeln!(out, "case {chan} of {{");
            for (l, b) in branches {
                indent(level, out);
                let _ = writeln!(out, "| #{l}:");
                print_proc(b, level + 1, out);
                out.push('\n');
            }
            indent(level, out);
            out.push('}');
        }
        If { cond, then, els } => {
            let _ = writeln!(out, "if {} then {{", print_expr(cond));
            print_proc(then, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push_str("} else {\n");
            print_proc(els, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push('}');
        }
        Send { chan, arg, cont } => line(out, format!("send {chan}({})", print_arg(arg)), cont),
        Put { chan, arg, cont } => line(out, format!("put {chan}({})", print_arg(arg)), cont),
        Recv { chan, bind, cont } => line(out, format!("recv {chan}({bind})"), cont),
        Take { chan, bind, cont } => line(out, format!("take {chan}({bind})"), cont),
        CallRepl { chan, bind, cont } => line(out, format!("call {chan}({bind})"), cont),
        Select { label, chan, cont } => line(out, format!("#{label} {chan}"), cont),
        Wait { chan, cont } => line(out, format!("wait {chan}"), cont),
        Affine { chan, cont } => line(out, format!("affine {chan}"), cont),
        Use { chan, cont } => line(out, format!("use {chan}"), cont),
        Server { chan, bind, body } => line(out, format!("!{chan}({bind})"), body),
        Print { expr, newline, cont } => {
            let kw = if *newline { "println" } else { "print" };
            line(out, format!("{kw}({})", print_expr(expr)), cont)
        }
        Sleep { ticks, cont } => line(out, format!("sleep {}", print_expr(ticks)), cont),
    }
}

pub fn print_process(p: &Process) -> String {
    let mut s = String::new();
    print_proc(p, 0, &mut s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{desugar::desugar_decl, parse_source};

    fn roundtrip(src: &str) {
        let once = print_decls(&parse_source(src).unwrap());
        let reparsed = parse_source(&once).unwrap_or_else(|e| panic!("{e}\n{once}"));
        assert_eq!(print_decls(&reparsed), once);
        let core: Vec<Decl> = reparsed.into_iter().map(desugar_decl).collect();
        let core_text = print_decls(&core);
        assert_eq!(core_text, once, "desugared tree prints like the surface tree");
    }

    #[test]
    fn roundtrips() {
        roundtrip(r#"proc main(){ println("hello world "+(2*3));[] };;"#);
        roundtrip("type tmenu { offer of { |#Neg: recv lint; send lint; close |#Dup: recv lint; send lint; close } };;");
        roundtrip("proc f(a:close, b:close){ close a; close b };;");
        roundtrip("proc f(x:X){ { x <- 1; close x }; []; () };;");
        roundtrip("proc f(;n:~lint){ if n - -1 == -(2 * n) then { [] } else { sleep 3; [] } };;");
        roundtrip("proc f(b:X){ put b(nw. affine nw; init(nw;0)); release b };;");
        roundtrip("proc f(){ letc s: { mk(s) }; cut { a(s) |s: send (send lint; close); ~close| b(s) } };;");
        roundtrip("type rec L(A) { choice of { |#Nil: close |#Cons: send A; L(A) } } and M { ~L(lint) };;");
        roundtrip(r#"proc s(c:X){ share c { take c(x); put c("a\"b"); drop c || par { [] || [] } } };;"#);
    }
}
