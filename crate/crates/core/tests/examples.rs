//! The cheap examples must run to completion.

use std::process::Command;

#[test]
fn examples_run() {
    for name in ["corpus_fixture", "metrics", "significance", "lora", "bias"] {
        let status = Command::new(env!("CARGO"))
            .args(["run", "--quiet", "--example", name])
            .current_dir(env!("CARGO_MANIFEST_DIR"))
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "example {name}");
    }
}
