//! End-to-end runs of the `cyborg` binary.

use std::path::Path;
use std::process::{Command, Output};

fn cyborg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyborg")).args(args).current_dir(cwd).output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cyborg(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(cyborg(&["grid", "--config", "missing.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(cyborg(&["evaluate", "--gold", "g.csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn render_prompt_matches_layout_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = cyborg(&["render-prompt", "--essay", &data("essay.txt"), "--rubric", &data("rubric.txt")], dir.path());
    assert!(out.status.success());
    let expected = std::fs::read(data("prompt_layout.txt")).unwrap();
    assert!(out.stdout.starts_with(&expected));
    assert!(out.stdout.len() <= expected.len() + 1);
}

#[test]
fn fixture_to_evaluation_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let out = cyborg(args, d);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    run(&["fixture", "--train-size", "120", "--test-size", "60", "--seed", "4", "--out", "fx"]);
    run(&["ingest", "--train", "fx/train.csv", "--test", "fx/test.csv", "--out", "ing"]);
    assert!(d.join("ing/summary.json").exists());
    run(&["split", "--train", "fx/train.csv", "--fraction", "0.25", "--seed", "2", "--out", "split"]);
    run(&["augment", "--train", "fx/train.csv", "--fraction", "0.25", "--seed", "2", "--sigma", "0.5", "--out", "aug"]);
    run(&["train", "--data", "aug/augmented.csv", "--feature-dim", "1024", "--learning-rate", "0.02", "--out", "m"]);
    let eval = run(&["evaluate", "--gold", "fx/test.csv", "--model", "m/model.json"]);
    assert!(eval.contains("QWK"));
    let same = run(&["evaluate", "--gold", "fx/test.csv", "--pred", "fx/test.csv"]);
    assert!(same.contains("QWK 1.000") && same.contains("SMD 0.000"), "{same}");
    run(&["bias-report", "--human", "fx/train.csv", "--augmented", "0.25=aug/augmented.csv", "--out", "bias"]);
    assert!(std::fs::read_dir(d.join("bias")).unwrap().count() > 1);
    run(&["lora-demo"]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        assert!(cyborg(&["fixture", "--train-size", "80", "--test-size", "40", "--seed", "9", "--out", out], d).status.success());
        assert!(cyborg(&["augment", "--train", &format!("{out}/train.csv"), "--fraction", "0.5", "--seed", "1", "--out", &format!("{out}/aug")], d)
            .status
            .success());
    }
    for f in ["train.csv", "test.csv", "aug/augmented.csv"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
}
