//! Removal of the two remaining surface forms.
//!
//! `letc x:T {P}; Q` becomes a cut and `terminal; Q` becomes an implicit
//! parallel composition. All other sugar is already resolved by the parser.

use super::ast::*;

pub fn desugar_decl(decl: Decl) -> Decl {
    match decl {
        Decl::Proc(mut p) => {
            p.body = desugar_process(p.body);
            Decl::Proc(p)
        }
        d @ Decl::Types(_) => d,
    }
}

pub fn desugar_process(p: Process) -> Process {
    use ProcKind::*;
    let span = p.span;
    let b = |p: Box<Process>| Box::new(desugar_process(*p));
    let kind = match p.kind {
        Letc { chan, ty, body, cont } => Cut { chan, ty, left: b(body), right: b(cont) },
        Then { first, cont } => Par { left: b(first), right: b(cont), implicit: true },
        Par { left, right, implicit } => Par { left: b(left), right: b(right), implicit },
        Cut { chan, ty, left, right } => Cut { chan, ty, left: b(left), right: b(right) },
        Share { chan, left, right } => Share { chan, left: b(left), right: b(right) },
        Call { name, type_args, args, exp_args } => Call {
            name,
            type_args,
            args: args.into_iter().map(desugar_arg).collect(),
            exp_args,
        },
        Send { chan, arg, cont } => Send { chan, arg: desugar_arg(arg), cont: b(cont) },
        Put { chan, arg, cont } => Put { chan, arg: desugar_arg(arg), cont: b(cont) },
        Cell { chan, init } => Cell { chan, init: desugar_arg(init) },
        Recv { chan, bind, cont } => Recv { chan, bind, cont: b(cont) },
        Select { label, chan, cont } => Select { label, chan, cont: b(cont) },
        Case { chan, branches } => Case {
            chan,
            branches: branches.into_iter().map(|(l, p)| (l, desugar_process(p))).collect(),
        },
        Wait { chan, cont } => Wait { chan, cont: b(cont) },
        Server { chan, bind, body } => Server { chan, bind, body: b(body) },
        CallRepl { chan, bind, cont } => CallRepl { chan, bind, cont: b(cont) },
        Affine { chan, cont } => Affine { chan, cont: b(cont) },
        Use { chan, cont } => Use { chan, cont: b(cont) },
        Take { chan, bind, cont } => Take { chan, bind, cont: b(cont) },
        If { cond, then, els } => If { cond, then: b(then), els: b(els) },
        Print { expr, newline, cont } => Print { expr, newline, cont: b(cont) },
        Sleep { ticks, cont } => Sleep { ticks, cont: b(cont) },
        k @ (Inert | Forward(..) | Close(_) | Discard(_) | Drop(_)) => k,
    };
    Process::new(kind, span)
}

fn desugar_arg(a: Arg) -> Arg {
    match a {
        Arg::Closure(x, body) => Arg::Closure(x, Box::new(desugar_process(*body))),
        a => a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_source;

    fn body(src: &str) -> Process {
        match desugar_decl(parse_source(src).unwrap().remove(0)) {
            Decl::Proc(p) => p.body,
            _ => panic!(),
        }
    }

    #[test]
    fn letc_becomes_cut() {
        let p = body("proc m(){ letc x:close { close x }; wait x; [] };;");
        let ProcKind::Cut { chan, ty, left, right } = p.kind else { panic!() };
        assert_eq!(chan, "x");
        assert_eq!(ty, Some(TypeExpr::Close));
        assert_eq!(left.kind, ProcKind::Close("x".into()));
        assert!(matches!(right.kind, ProcKind::Wait { .. }));
    }

    #[test]
    fn alice0_shape() {
        let p = body(r#"proc alice0(c:~tmenu){ #Dup c; c <- 2; c -> m; println("alice got "+m); close c };;"#);
        let ProcKind::Select { label, cont, .. } = p.kind else { panic!() };
        assert_eq!(label, "Dup");
        let ProcKind::Send { arg, cont, .. } = cont.kind else { panic!() };
        assert_eq!(arg, Arg::Expr(Expr::Int(2)));
        let ProcKind::Recv { bind, cont, .. } = cont.kind else { panic!() };
        assert_eq!(bind, "m");
        let ProcKind::Print { newline: true, cont, .. } = cont.kind else { panic!() };
        assert_eq!(cont.kind, ProcKind::Close("c".into()));
    }

    #[test]
    fn terminal_sequencing_becomes_implicit_par() {
        let p = body("proc f(a:close, b:close){ close a; close b };;");
        assert!(matches!(p.kind, ProcKind::Par { implicit: true, .. }));
        assert!(p.is_core());
    }

    #[test]
    fn closures_are_desugared_too() {
        let p = body("proc f(b:X){ put b(nw. letc y:close { close y }; wait y; affine nw; init(nw;0)); release b };;");
        assert!(p.is_core());
        let ProcKind::Put { arg: Arg::Closure(x, inner), .. } = p.kind else { panic!() };
        assert_eq!(x, "nw");
        assert!(matches!(inner.kind, ProcKind::Cut { .. }));
    }

    #[test]
    fn letc_hole_is_kept() {
        let p = body("proc f(){ letc s: { mk(s) }; use_it(s) };;");
        assert!(matches!(p.kind, ProcKind::Cut { ty: None, .. }));
    }
}
