use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn flexq(kb: &std::path::Path, args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flexq"));
    cmd.arg("--workdir")
        .arg(fixtures().join(".."))
        .arg("--kb")
        .arg(kb)
        .args(args)
        .env_remove("FLEXQ_CATALOG")
        .env_remove("FLEXQ_DATA")
        .env_remove("FLEXQ_LEXICON")
        .env_remove("FLEXQ_KB");
    cmd
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn translate_prints_sql_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexq(&dir.path().join("kb.jsonl"), &["translate", "List suplier details where city is equal to London."])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("SELECT * FROM suppliers AS A WHERE A.city = 'London'\n"));
    assert!(text.contains("fuzzy, levenshtein distance 2"));
}

#[test]
fn run_prints_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexq(&dir.path().join("kb.jsonl"), &["run", "list suppliers where city equals Paris"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("(2 rows)"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.jsonl");
    let out = flexq(&kb, &["translate", "  "]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty-query"));

    let out = flexq(&kb, &["--catalog", "/nonexistent/catalog.json", "translate", "list suppliers"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repl_records_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.jsonl");
    let mut child = flexq(&kb, &["repl"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"list suppliers where city equals Rome\na\nlist suppliers where city equals Rome\n\n:quit\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("recorded: accepted"));
    assert!(text.contains("source: knowledge-base"));
    assert!(std::fs::read_to_string(&kb).unwrap().contains("\"event\":\"feedback\""));
}

#[test]
fn add_conjunction_updates_lexicon_file() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("lexicon.json");
    std::fs::copy(fixtures().join("lexicon.json"), &lex).unwrap();
    let kb = dir.path().join("kb.jsonl");
    let out = flexq(&kb, &["--lexicon", lex.to_str().unwrap(), "add-conjunction", "when"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = flexq(&kb, &["--lexicon", lex.to_str().unwrap(), "translate", "list suppliers when city equals Rome"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
