//! Score essays against an HTTP teacher endpoint.
//!
//! Usage: `cargo run --example remote_teacher -- http://host:port`. The
//! server must answer `POST /score` with `{"completion": "..."}`.

use cyborg::teacher::{score_remote, RemoteScorerConfig};

fn main() -> cyborg::Result<()> {
    let Some(endpoint) = std::env::args().nth(1) else {
        eprintln!("usage: remote_teacher <endpoint>");
        std::process::exit(2);
    };
    let config = RemoteScorerConfig {
        endpoint,
        rubric: "Score 6: mastery.\nScore 1: no mastery.".into(),
        ..RemoteScorerConfig::default()
    }
    .with_env_overrides();
    let essays = ["Phones help students learn.", "Homework should be optional."];
    for (essay, outcome) in essays.iter().zip(score_remote(&config, &essays)?) {
        match outcome {
            Ok(s) => println!("{} <- {essay}", s.get()),
            Err(e) => println!("failed ({e}) <- {essay}"),
        }
    }
    Ok(())
}
