mod common;

use std::collections::BTreeMap;
use std::process::Command;

fn clickrank(args: &[&str]) -> std::process::Output {
    let dir = common::workspace().dir().to_str().unwrap().to_string();
    Command::new(env!("CARGO_BIN_EXE_clickrank"))
        .arg("--dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn snapshot() -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(common::workspace().dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn search_prints_at_most_k_rows() {
    let q = common::workspace().pairs().unwrap()[0].query_key();
    let out = clickrank(&["search", "--q", &q, "--k", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert!(!rows.is_empty() && rows.len() <= 4);
    for row in rows {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols.len(), 3);
        assert!(cols[1].parse::<f64>().is_ok() && cols[2].parse::<f64>().is_ok());
    }
}

#[test]
fn search_leaves_artifacts_untouched() {
    let before = snapshot();
    for q in ["", "zzqqxx", "的"] {
        assert!(clickrank(&["search", "--q", q]).status.success());
    }
    assert_eq!(snapshot(), before);
}

#[test]
fn oversized_k_fails_cleanly() {
    let out = clickrank(&["search", "--q", "anything", "--k", "500"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn missing_artifacts_are_reported() {
    let empty = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_clickrank"))
        .args(["--dir", empty.path().to_str().unwrap(), "search", "--q", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
