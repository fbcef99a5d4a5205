use std::path::PathBuf;

use clls::syntax::parse_core;
use clls::{check_program, Diagnostic};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn check(src: &str) -> Result<clls::Program, Vec<Diagnostic>> {
    check_program(&parse_core(src).map_err(|d| vec![d])?)
}

#[test]
fn every_corpus_program_checks() {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "clls") {
            let src = std::fs::read_to_string(&path).unwrap();
            if let Err(ds) = check(&src) {
                let msgs: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
                panic!("{} rejected:\n{}", path.display(), msgs.join("\n"));
            }
            names.push(path.file_stem().unwrap().to_string_lossy().to_string());
        }
    }
    assert_eq!(names.len(), 10, "{names:?}");
}

#[test]
fn negative_programs_report_their_rule() {
    let mut failures = Vec::new();
    let mut count = 0;
    let mut paths: Vec<PathBuf> =
        std::fs::read_dir(corpus_dir().join("negative")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for path in paths {
        let src = std::fs::read_to_string(&path).unwrap();
        let want = src
            .lines()
            .find_map(|l| l.strip_prefix("-- expect:"))
            .unwrap_or_else(|| panic!("{} has no expect line", path.display()))
            .trim()
            .to_string();
        count += 1;
        match check(&src) {
            Ok(_) => failures.push(format!("{}: accepted, wanted {want}", path.display())),
            Err(ds) if ds[0].rule != want => {
                failures.push(format!("{}: got {} ({}), wanted {want}", path.display(), ds[0].rule, ds[0].message))
            }
            Err(_) => {}
        }
    }
    assert!(count >= 12);
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
