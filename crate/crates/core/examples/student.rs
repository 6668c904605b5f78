//! Train the linear student on a small fixture and score the test split.

use cyborg::corpus::{generate_fixture, FixtureConfig};
use cyborg::metrics::report;
use cyborg::student::{train_student, TrainConfig};

fn main() -> cyborg::Result<()> {
    let fixture = FixtureConfig {
        train_size: 600,
        test_size: 300,
        ..FixtureConfig::default()
    };
    let (train, test) = generate_fixture(&fixture, 1)?;
    let config = TrainConfig {
        feature_dim: 4096,
        learning_rate: 0.02,
        ..TrainConfig::default()
    };
    let model = train_student(&train, &config)?;
    println!("{} steps, epoch loss {:.3} -> {:.3}", model.steps, model.epoch_loss[0], model.epoch_loss[9]);
    let pred: Vec<_> = test.iter().map(|r| model.predict(&r.essay)).collect();
    let r = report(&test.labels(), &pred)?;
    println!("test QWK {:.3}, SMD {:.3}", r.qwk, r.smd);
    Ok(())
}
