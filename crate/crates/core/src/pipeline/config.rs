//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! fractions = [0.1, 0.5, 0.9]
//! replicates = 5
//! jobs = 4
//! output_dir = "out"
//!
//! [corpus.fixture]
//! train_size = 2000
//! test_size = 1000
//!
//! [teacher.simulated.ramp]
//! qwk_at_min = 0.80
//! qwk_at_max = 0.92
//!
//! [student]
//! feature_dim = 4096
//! learning_rate = 0.02
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{generate_fixture, load_csv, load_csv_split, ColumnMap, FixtureConfig, ScoredDataset};
use crate::student::TrainConfig;
use crate::teacher::RemoteScorerConfig;
use crate::{seed, Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub replicates: usize,
    pub jobs: usize,
    pub output_dir: PathBuf,
    pub corpus: CorpusSource,
    pub teacher: TeacherSpec,
    pub student: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            replicates: 5,
            jobs: 1,
            output_dir: PathBuf::from("out"),
            corpus: CorpusSource::Fixture(FixtureConfig::default()),
            teacher: TeacherSpec::Simulated(SimSchedule::default()),
            student: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    /// Synthetic corpus generated from the master seed.
    Fixture(FixtureConfig),
    /// Separate train and test files.
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        columns: Vec<String>,
    },
    /// One file whose split column says train or test.
    CsvSplit {
        path: PathBuf,
        #[serde(default)]
        columns: Vec<String>,
    },
}

fn column_map(overrides: &[String]) -> Result<ColumnMap> {
    let mut map = ColumnMap::default();
    for o in overrides {
        map.set(o)?;
    }
    Ok(map)
}

impl CorpusSource {
    /// Load `(train, test)`; relative paths resolve against `base`.
    pub fn load(&self, master_seed: u64, base: &Path) -> Result<(ScoredDataset, ScoredDataset)> {
        let (train, test) = match self {
            CorpusSource::Fixture(cfg) => generate_fixture(cfg, seed::derive(master_seed, &[b"corpus"]))?,
            CorpusSource::Csv { train, test, columns } => {
                let map = column_map(columns)?;
                (load_csv(base.join(train), &map)?, load_csv(base.join(test), &map)?)
            }
            CorpusSource::CsvSplit { path, columns } => load_csv_split(base.join(path), &column_map(columns)?)?,
        };
        check_disjoint(&train, &test)?;
        Ok((train, test))
    }
}

/// Refuse to run when an essay sits in both train and test.
pub fn check_disjoint(train: &ScoredDataset, test: &ScoredDataset) -> Result<()> {
    let test_ids: BTreeSet<&str> = test.iter().map(|r| r.id()).collect();
    if let Some(r) = train.iter().find(|r| test_ids.contains(r.id())) {
        return Err(Error::InvalidInput(format!("essay `{}` is in both train and test", r.id())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TeacherSpec {
    Simulated(SimSchedule),
    Remote(RemoteTeacherSpec),
}

/// How the simulated teacher's quality depends on the subset fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SimSchedule {
    /// Fit a teacher on each cell's human subset to targets interpolated
    /// linearly between `p_min` and `p_max` (clamped outside).
    Ramp(Ramp),
    /// The same noise and severity in every cell.
    Fixed { sigma: f64, severity: f64 },
}

impl Default for SimSchedule {
    fn default() -> Self {
        SimSchedule::Ramp(Ramp::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ramp {
    pub p_min: f64,
    pub p_max: f64,
    pub qwk_at_min: f64,
    pub qwk_at_max: f64,
    pub smd_at_min: f64,
    pub smd_at_max: f64,
}

impl Default for Ramp {
    fn default() -> Self {
        Ramp {
            p_min: 0.1,
            p_max: 0.9,
            qwk_at_min: 0.80,
            qwk_at_max: 0.92,
            smd_at_min: 0.0,
            smd_at_max: 0.0,
        }
    }
}

impl Ramp {
    pub fn constant(qwk: f64, smd: f64) -> Self {
        Ramp {
            qwk_at_min: qwk,
            qwk_at_max: qwk,
            smd_at_min: smd,
            smd_at_max: smd,
            ..Ramp::default()
        }
    }

    /// `(target_qwk, target_smd)` at fraction `p`.
    pub fn targets(&self, p: f64) -> (f64, f64) {
        let t = if self.p_max > self.p_min {
            ((p - self.p_min) / (self.p_max - self.p_min)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (
            self.qwk_at_min + t * (self.qwk_at_max - self.qwk_at_min),
            self.smd_at_min + t * (self.smd_at_max - self.smd_at_min),
        )
    }
}

/// A remote teacher. Tuning it on each cell's human subset happens outside
/// the harness; `attestation` records the operator's statement about that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteTeacherSpec {
    #[serde(default)]
    pub scorer: RemoteScorerConfig,
    /// Read into `scorer.rubric` when set.
    #[serde(default)]
    pub rubric_file: Option<PathBuf>,
    /// Endpoint to use for a given fraction instead of `scorer.endpoint`.
    #[serde(default)]
    pub per_fraction: Vec<FractionEndpoint>,
    pub attestation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionEndpoint {
    pub p: f64,
    pub endpoint: String,
}

impl RemoteTeacherSpec {
    pub fn scorer_for(&self, p: f64) -> RemoteScorerConfig {
        let mut cfg = self.scorer.clone();
        if let Some(f) = self.per_fraction.iter().find(|f| seed::fraction_key(f.p) == seed::fraction_key(p)) {
            cfg.endpoint = f.endpoint.clone();
        }
        cfg
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file; a remote teacher's `rubric_file` is read
    /// relative to the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let TeacherSpec::Remote(r) = &mut cfg.teacher {
            if let Some(f) = &r.rubric_file {
                let base = path.parent().unwrap_or(Path::new("."));
                r.scorer.rubric = std::fs::read_to_string(base.join(f))?;
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::Config("fractions must not be empty".into()));
        }
        if let Some(p) = self.fractions.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Config(format!("fraction {p} must be strictly between 0 and 1")));
        }
        let keys: BTreeSet<[u8; 8]> = self.fractions.iter().map(|p| seed::fraction_key(*p)).collect();
        if keys.len() != self.fractions.len() {
            return Err(Error::Config("fractions must be distinct".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.student.validate()?;
        if let CorpusSource::Fixture(f) = &self.corpus {
            f.validate()?;
        }
        match &self.teacher {
            TeacherSpec::Simulated(SimSchedule::Fixed { sigma, severity }) => {
                if !(*sigma >= 0.0 && sigma.is_finite() && severity.is_finite()) {
                    return Err(Error::Config("simulated teacher needs sigma >= 0".into()));
                }
            }
            TeacherSpec::Simulated(SimSchedule::Ramp(r)) => {
                for q in [r.qwk_at_min, r.qwk_at_max] {
                    if !(q > 0.0 && q <= 1.0) {
                        return Err(Error::Config(format!("target QWK {q} must be in (0, 1]")));
                    }
                }
            }
            TeacherSpec::Remote(r) => {
                if r.attestation.trim().is_empty() {
                    return Err(Error::Config("remote teacher requires an attestation".into()));
                }
                if r.scorer.max_concurrency == 0 {
                    return Err(Error::Config("max_concurrency must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn parses_documented_example() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seed = 7
            fractions = [0.1, 0.5, 0.9]
            replicates = 5
            jobs = 4
            output_dir = "out"
            [corpus.fixture]
            train_size = 2000
            test_size = 1000
            [teacher.simulated.ramp]
            qwk_at_min = 0.80
            qwk_at_max = 0.92
            [student]
            feature_dim = 4096
            learning_rate = 0.02
            "#,
        )
        .unwrap();
        assert_eq!(cfg.fractions, vec![0.1, 0.5, 0.9]);
        assert_eq!(cfg.student.epochs, 10);
        assert_eq!(cfg.student.feature_dim, 4096);
        match cfg.teacher {
            TeacherSpec::Simulated(SimSchedule::Ramp(r)) => {
                let (q, s) = r.targets(0.5);
                assert!((q - 0.86).abs() < 1e-12 && s == 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "fractions = [1.0]",
            "fractions = [0.1, 0.1]",
            "replicates = 0",
            "jobs = 0",
            "unknown_key = 3",
            "[teacher.simulated.fixed]\nsigma = -1.0\nseverity = 0.0",
            "[teacher.remote]\nattestation = \"\"",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn ramp_interpolates_and_clamps() {
        let r = Ramp {
            smd_at_min: -0.3,
            smd_at_max: -0.1,
            ..Ramp::default()
        };
        let (q, s) = r.targets(0.1);
        assert_eq!((q, s), (0.80, -0.3));
        let (q, s) = r.targets(0.9);
        assert!((q - 0.92).abs() < 1e-12 && (s + 0.1).abs() < 1e-12);
        assert_eq!(r.targets(0.05), r.targets(0.1));
    }

    #[test]
    fn per_fraction_endpoint() {
        let remote = RemoteTeacherSpec {
            scorer: RemoteScorerConfig::default(),
            rubric_file: None,
            per_fraction: vec![FractionEndpoint {
                p: 0.3,
                endpoint: "http://other".into(),
            }],
            attestation: "tuned per subset".into(),
        };
        assert_eq!(remote.scorer_for(0.3).endpoint, "http://other");
        assert_eq!(remote.scorer_for(0.5).endpoint, RemoteScorerConfig::default().endpoint);
    }
}
