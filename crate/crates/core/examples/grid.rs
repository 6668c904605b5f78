//! Run a small fraction x replicate grid and write its tables.

use cyborg::corpus::FixtureConfig;
use cyborg::pipeline::{emit_tables, run_grid, CorpusSource, ExperimentConfig, PreparedCorpus, Ramp, SimSchedule, TeacherSpec};
use cyborg::student::TrainConfig;

fn main() -> cyborg::Result<()> {
    let config = ExperimentConfig {
        seed: 5,
        fractions: vec![0.1, 0.5, 0.9],
        replicates: 2,
        jobs: 4,
        corpus: CorpusSource::Fixture(FixtureConfig {
            train_size: 600,
            test_size: 300,
            ..FixtureConfig::default()
        }),
        teacher: TeacherSpec::Simulated(SimSchedule::Ramp(Ramp::default())),
        student: TrainConfig {
            feature_dim: 2048,
            learning_rate: 0.02,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let (train, test) = config.corpus.load(config.seed, std::path::Path::new("."))?;
    let corpus = PreparedCorpus::new(train, test, &config.student)?;
    let report = run_grid(&config, &corpus)?;
    for f in &report.fractions {
        println!("p = {:.1}: orig {:.3}, aug {:.3}", f.p, f.qwk_orig.unwrap_or(f64::NAN), f.qwk_aug.unwrap_or(f64::NAN));
    }
    let out = std::env::temp_dir().join("cyborg-grid-example");
    let files = emit_tables(&report, &corpus.train, &out)?;
    println!("wrote {} files to {}", files.files.len(), out.display());
    Ok(())
}
