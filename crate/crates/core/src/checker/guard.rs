use std::collections::{BTreeMap, BTreeSet};

use crate::diag::{Diagnostic, Span};
use crate::syntax::{ProcDef, ProcKind, Process, RecFlag};

struct Site {
    callee: String,
    guarded: bool,
    span: Span,
}

fn sites(p: &Process, guarded: bool, out: &mut Vec<Site>) {
    use ProcKind::*;
    let after = match &p.kind {
        Recv { .. } | Case { .. } | Send { .. } | Select { .. } | Take { .. } | CallRepl { .. } => true,
        Call { name, .. } => {
            out.push(Site { callee: name.clone(), guarded, span: p.span });
            guarded
        }
        _ => guarded,
    };
    for c in p.children() {
        sites(c, after, out);
    }
}

/// Recursive calls in `rec`/`corec` procedures must come after a
/// communication or cell action; `gen_rec` procedures are exempt, and
/// plain procedures may not be recursive at all.
///
/// Returns the offending procedure names with their first violation.
pub fn check_guardedness(defs: &[&ProcDef]) -> Vec<(String, Diagnostic)> {
    let by_name: BTreeMap<&str, &ProcDef> = defs.iter().map(|d| (d.name.as_str(), *d)).collect();
    let mut calls: BTreeMap<&str, Vec<Site>> = BTreeMap::new();
    for d in defs {
        let mut out = Vec::new();
        sites(&d.body, false, &mut out);
        calls.insert(&d.name, out);
    }
    let reach = |from: &str| {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from.to_string()];
        while let Some(n) = stack.pop() {
            for s in calls.get(n.as_str()).into_iter().flatten() {
                if by_name.contains_key(s.callee.as_str()) && seen.insert(s.callee.clone()) {
                    stack.push(s.callee.clone());
                }
            }
        }
        seen
    };
    let reaches: BTreeMap<&str, BTreeSet<String>> = by_name.keys().map(|n| (*n, reach(n))).collect();

    let mut errs = Vec::new();
    for d in defs {
        if d.rec == RecFlag::GenRec {
            continue;
        }
        let mine = &reaches[d.name.as_str()];
        for s in &calls[d.name.as_str()] {
            let cyclic = mine.contains(&s.callee) && reaches.get(s.callee.as_str()).is_some_and(|r| r.contains(&d.name));
            if !cyclic {
                continue;
            }
            let msg = if d.rec == RecFlag::None {
                format!("{} is recursive through {} but is declared neither rec nor gen_rec", d.name, s.callee)
            } else if !s.guarded {
                format!(
                    "recursive call to {} is not preceded by a communication action; declare {} gen_rec to allow it",
                    s.callee, d.name
                )
            } else {
                continue;
            };
            errs.push((d.name.clone(), Diagnostic::error("unguarded-recursion", msg, s.span)));
            break;
        }
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_core, Decl};

    fn run(src: &str) -> Vec<String> {
        let decls = parse_core(src).unwrap();
        let defs: Vec<&ProcDef> = decls
            .iter()
            .filter_map(|d| match d {
                Decl::Proc(p) => Some(p),
                _ => None,
            })
            .collect();
        check_guardedness(&defs).into_iter().map(|(n, _)| n).collect()
    }

    #[test]
    fn immediate_self_call_is_rejected() {
        assert_eq!(run("proc rec loop(x:close){ loop(x) };;"), vec!["loop"]);
    }

    #[test]
    fn guarded_and_gen_rec_are_accepted() {
        assert!(run("proc rec f(x:~lint, y:close){ x -> v; f(x, y) };;").is_empty());
        assert!(run("proc gen_rec g(x:close){ g(x) };;").is_empty());
    }

    #[test]
    fn mutual_recursion_needs_a_flag() {
        let errs = run("proc a(x:~lint){ b(x) };; proc rec b(x:~lint){ x -> v; a(x) };;");
        assert_eq!(errs, vec!["a"]);
    }
}
