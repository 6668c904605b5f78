use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::augment::{build_augmented, AugmentedDataset, Origin, TeacherFailure};
use super::config::{check_disjoint, ExperimentConfig, SimSchedule, TeacherSpec};
use crate::corpus::{sample_subset, ScoreLabel, ScoredDataset};
use crate::metrics::{qwk_scores, smd_scores};
use crate::stats::{ks_two_sample, paired_t_test, TestResult};
use crate::student::{train_on_features, FeatureVector, StudentModel, TrainConfig};
use crate::teacher::{fit_sim_params, RemoteTeacher, Scorer, SimFit, SimTeacherParams};
use crate::{seed, Error, Result};

/// Train and test sets with every essay featurized once.
#[derive(Debug)]
pub struct PreparedCorpus {
    pub train: ScoredDataset,
    pub test: ScoredDataset,
    feature_dim: usize,
    features: Vec<FeatureVector>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub qwk: f64,
    pub smd: f64,
    #[serde(skip)]
    pub predictions: Vec<ScoreLabel>,
}

impl PreparedCorpus {
    pub fn new(train: ScoredDataset, test: ScoredDataset, student: &TrainConfig) -> Result<Self> {
        check_disjoint(&train, &test)?;
        if test.is_empty() {
            return Err(Error::InvalidInput("test set is empty".into()));
        }
        let f = student.featurizer();
        let texts: Vec<&str> = train.iter().chain(test.iter()).map(|r| r.essay.text.as_str()).collect();
        let features: Vec<FeatureVector> = texts.par_iter().map(|t| f.featurize(t)).collect();
        let index = train
            .iter()
            .chain(test.iter())
            .enumerate()
            .map(|(i, r)| (r.id().to_string(), i))
            .collect();
        Ok(PreparedCorpus {
            train,
            test,
            feature_dim: student.feature_dim,
            features,
            index,
        })
    }

    pub fn features(&self, essay_id: &str) -> Option<&FeatureVector> {
        self.index.get(essay_id).map(|&i| &self.features[i])
    }

    /// Train a student on `data`'s labels using the cached features.
    pub fn train_student(&self, data: &ScoredDataset, config: &TrainConfig) -> Result<StudentModel> {
        if config.feature_dim != self.feature_dim {
            return Err(Error::Config(format!(
                "student feature_dim {} differs from the prepared corpus ({})",
                config.feature_dim, self.feature_dim
            )));
        }
        let examples = data
            .iter()
            .map(|r| {
                self.features(r.id())
                    .map(|x| (x, r.label))
                    .ok_or_else(|| Error::InvalidInput(format!("essay `{}` is not in the prepared corpus", r.id())))
            })
            .collect::<Result<Vec<_>>>()?;
        train_on_features(&examples, config)
    }

    /// QWK and SMD of `model` against the test set's labels.
    pub fn evaluate(&self, model: &StudentModel) -> Result<Evaluation> {
        let predictions: Vec<ScoreLabel> = self
            .test
            .iter()
            .map(|r| model.predict_features(self.features(r.id()).expect("test essay featurized")))
            .collect();
        let gold = self.test.labels();
        Ok(Evaluation {
            qwk: qwk_scores(&gold, &predictions)?,
            smd: smd_scores(&gold, &predictions)?,
            predictions,
        })
    }
}

/// Seeds of one grid cell, all derived from the master seed, the fraction
/// and the replicate index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellSeeds {
    pub cell: u64,
    pub subset: u64,
    pub teacher: u64,
    /// Shared by both students of the cell.
    pub student: u64,
}

impl CellSeeds {
    pub fn derive(master: u64, p: f64, replicate: usize) -> Self {
        let cell = seed::derive(master, &[b"cell", &seed::fraction_key(p), &(replicate as u64).to_le_bytes()]);
        CellSeeds {
            cell,
            subset: seed::derive(cell, &[b"subset"]),
            teacher: seed::derive(cell, &[b"teacher"]),
            student: seed::derive(cell, &[b"student"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCellResult {
    pub p: f64,
    /// 1-based.
    pub replicate: usize,
    pub seeds: CellSeeds,
    pub human_count: usize,
    pub synthetic_count: usize,
    pub teacher: String,
    pub teacher_fit: Option<SimFit>,
    pub teacher_failures: Vec<TeacherFailure>,
    /// Teacher labels against gold on the teacher-labelled essays.
    pub teacher_qwk_vs_gold: Option<f64>,
    pub teacher_smd_vs_gold: Option<f64>,
    pub orig: Evaluation,
    pub aug: Evaluation,
    pub steps_orig: usize,
    pub steps_aug: usize,
    #[serde(skip)]
    pub augmented: Option<ScoredDataset>,
}

impl GridCellResult {
    pub fn qwk_gain(&self) -> f64 {
        self.aug.qwk - self.orig.qwk
    }
}

fn cell_teacher(teacher: &TeacherSpec, p: f64, u: &ScoredDataset, teacher_seed: u64) -> Result<(Box<dyn Scorer>, Option<SimFit>)> {
    Ok(match teacher {
        TeacherSpec::Simulated(SimSchedule::Fixed { sigma, severity }) => {
            (Box::new(SimTeacherParams::new(*sigma, *severity, teacher_seed)?), None)
        }
        TeacherSpec::Simulated(SimSchedule::Ramp(r)) => {
            let (q, s) = r.targets(p);
            let fit = fit_sim_params(q, s, u, teacher_seed)?;
            (Box::new(fit.params), Some(fit))
        }
        TeacherSpec::Remote(r) => (Box::new(RemoteTeacher::new(r.scorer_for(p))?), None),
    })
}

fn teacher_agreement(aug: &AugmentedDataset) -> (Option<f64>, Option<f64>) {
    let synth: Vec<_> = aug.data.iter().filter(|r| !r.provenance.is_human()).collect();
    let gold: Vec<ScoreLabel> = synth.iter().map(|r| r.essay.gold_score).collect();
    let labels: Vec<ScoreLabel> = synth.iter().map(|r| r.label).collect();
    (qwk_scores(&gold, &labels).ok(), smd_scores(&gold, &labels).ok())
}

/// One (fraction, replicate) cell: sample `U`, build the augmented set,
/// train a student on each with the same config and seed, and score both on
/// the test set.
pub fn run_cell(
    p: f64,
    replicate: usize,
    master_seed: u64,
    corpus: &PreparedCorpus,
    teacher: &TeacherSpec,
    student: &TrainConfig,
) -> Result<GridCellResult> {
    let seeds = CellSeeds::derive(master_seed, p, replicate);
    let subset = sample_subset(&corpus.train, p, seeds.subset)?;
    let (scorer, fit) = cell_teacher(teacher, p, &subset.u, seeds.teacher)?;
    let origin = Origin {
        p,
        seed: seeds.subset,
        teacher: String::new(),
    };
    let augmented = build_augmented(&corpus.train, &subset.u, scorer.as_ref(), origin)?;
    let (teacher_qwk_vs_gold, teacher_smd_vs_gold) = teacher_agreement(&augmented);

    let config = TrainConfig {
        seed: seeds.student,
        ..student.clone()
    };
    let m_orig = corpus.train_student(&subset.u, &config)?;
    let m_aug = corpus.train_student(&augmented.data, &config)?;
    Ok(GridCellResult {
        p,
        replicate,
        seeds,
        human_count: augmented.human_count(),
        synthetic_count: augmented.synthetic_count(),
        teacher: augmented.origin.teacher.clone(),
        teacher_fit: fit,
        teacher_failures: augmented.failures.clone(),
        teacher_qwk_vs_gold,
        teacher_smd_vs_gold,
        orig: corpus.evaluate(&m_orig)?,
        aug: corpus.evaluate(&m_aug)?,
        steps_orig: m_orig.steps,
        steps_aug: m_aug.steps,
        augmented: Some(augmented.data),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Done(Box<GridCellResult>),
    Failed { p: f64, replicate: usize, error: String },
}

impl CellOutcome {
    pub fn result(&self) -> Option<&GridCellResult> {
        match self {
            CellOutcome::Done(r) => Some(r),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Paired t-test and KS p-values, original vs augmented, per metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionTests {
    pub qwk_t: Option<TestResult>,
    pub qwk_ks: Option<TestResult>,
    pub smd_t: Option<TestResult>,
    pub smd_ks: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionSummary {
    pub p: f64,
    pub replicates: usize,
    pub qwk_orig: Option<f64>,
    pub qwk_aug: Option<f64>,
    pub smd_orig: Option<f64>,
    pub smd_aug: Option<f64>,
    /// Absent with fewer than two replicates.
    pub tests: Option<FractionTests>,
}

impl FractionSummary {
    pub fn qwk_gap(&self) -> Option<f64> {
        Some(self.qwk_aug? - self.qwk_orig?)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize_fraction(p: f64, cells: &[&GridCellResult]) -> FractionSummary {
    let pick = |f: &dyn Fn(&GridCellResult) -> f64| cells.iter().map(|c| f(c)).collect::<Vec<f64>>();
    let qo = pick(&|c| c.orig.qwk);
    let qa = pick(&|c| c.aug.qwk);
    let so = pick(&|c| c.orig.smd);
    let sa = pick(&|c| c.aug.smd);
    let tests = (cells.len() >= 2).then(|| FractionTests {
        qwk_t: paired_t_test(&qo, &qa).ok(),
        qwk_ks: ks_two_sample(&qo, &qa).ok(),
        smd_t: paired_t_test(&so, &sa).ok(),
        smd_ks: ks_two_sample(&so, &sa).ok(),
    });
    FractionSummary {
        p,
        replicates: cells.len(),
        qwk_orig: mean(&qo),
        qwk_aug: mean(&qa),
        smd_orig: mean(&so),
        smd_aug: mean(&sa),
        tests,
    }
}

/// Student trained on every human label of the training set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Baseline {
    pub seed: u64,
    pub eval: Evaluation,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub master_seed: u64,
    pub replicates: usize,
    pub fractions: Vec<FractionSummary>,
    pub baseline: Baseline,
    pub cells: Vec<CellOutcome>,
}

impl GridReport {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.result().is_none()).count()
    }

    pub fn completed(&self) -> impl Iterator<Item = &GridCellResult> {
        self.cells.iter().filter_map(CellOutcome::result)
    }

    pub fn fraction(&self, p: f64) -> Option<&FractionSummary> {
        self.fractions.iter().find(|f| seed::fraction_key(f.p) == seed::fraction_key(p))
    }

    /// Completed cells of fraction `p`, in replicate order.
    pub fn cells_at(&self, p: f64) -> Vec<&GridCellResult> {
        self.completed()
            .filter(|c| seed::fraction_key(c.p) == seed::fraction_key(p))
            .collect()
    }

    pub fn teacher_failures(&self) -> usize {
        self.completed().map(|c| c.teacher_failures.len()).sum()
    }
}

/// Run every (fraction, replicate) cell plus the all-human baseline on a
/// pool of `config.jobs` threads. A failing cell is recorded and the rest
/// continue; results do not depend on the thread count.
pub fn run_grid(config: &ExperimentConfig, corpus: &PreparedCorpus) -> Result<GridReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", config.jobs)))?;
    let specs: Vec<(f64, usize)> = config
        .fractions
        .iter()
        .flat_map(|&p| (1..=config.replicates).map(move |r| (p, r)))
        .collect();
    let baseline_seed = seed::derive(config.seed, &[b"baseline"]);
    let (baseline, cells) = pool.install(|| {
        rayon::join(
            || -> Result<Baseline> {
                let cfg = TrainConfig {
                    seed: baseline_seed,
                    ..config.student.clone()
                };
                let m = corpus.train_student(&corpus.train, &cfg)?;
                Ok(Baseline {
                    seed: baseline_seed,
                    eval: corpus.evaluate(&m)?,
                    steps: m.steps,
                })
            },
            || {
                specs
                    .par_iter()
                    .map(|&(p, r)| match run_cell(p, r, config.seed, corpus, &config.teacher, &config.student) {
                        Ok(c) => CellOutcome::Done(Box::new(c)),
                        Err(e) => CellOutcome::Failed {
                            p,
                            replicate: r,
                            error: e.to_string(),
                        },
                    })
                    .collect::<Vec<_>>()
            },
        )
    });
    let baseline = baseline?;
    let mut report = GridReport {
        master_seed: config.seed,
        replicates: config.replicates,
        fractions: Vec::new(),
        baseline,
        cells,
    };
    report.fractions = config
        .fractions
        .iter()
        .map(|&p| summarize_fraction(p, &report.cells_at(p)))
        .collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_fixture, FixtureConfig};
    use crate::pipeline::config::{CorpusSource, Ramp};

    fn small_config(replicates: usize, fractions: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            seed: 5,
            fractions,
            replicates,
            jobs: 1,
            corpus: CorpusSource::Fixture(FixtureConfig {
                train_size: 240,
                test_size: 120,
                ..FixtureConfig::default()
            }),
            teacher: TeacherSpec::Simulated(SimSchedule::Ramp(Ramp::constant(0.85, 0.0))),
            student: TrainConfig {
                epochs: 3,
                feature_dim: 1024,
                learning_rate: 0.02,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    fn prepare(cfg: &ExperimentConfig) -> PreparedCorpus {
        let (train, test) = cfg.corpus.load(cfg.seed, std::path::Path::new(".")).unwrap();
        PreparedCorpus::new(train, test, &cfg.student).unwrap()
    }

    #[test]
    fn cell_is_deterministic() {
        let cfg = small_config(1, vec![0.3]);
        let corpus = prepare(&cfg);
        let a = run_cell(0.3, 1, 5, &corpus, &cfg.teacher, &cfg.student).unwrap();
        let b = run_cell(0.3, 1, 5, &corpus, &cfg.teacher, &cfg.student).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.aug.predictions, b.aug.predictions);
        assert_eq!(a.human_count, 72);
        assert_eq!(a.human_count + a.synthetic_count, 240);
        assert_eq!(a.steps_orig, 3 * 18);
        assert_eq!(a.steps_aug, 3 * 60);
        assert_ne!(CellSeeds::derive(5, 0.3, 1), CellSeeds::derive(5, 0.3, 2));
    }

    #[test]
    fn single_replicate_has_no_tests_and_single_fraction_one_row() {
        let cfg = small_config(1, vec![0.5]);
        let report = run_grid(&cfg, &prepare(&cfg)).unwrap();
        assert_eq!(report.fractions.len(), 1);
        assert!(report.fractions[0].tests.is_none());
        assert_eq!(report.failed_cells(), 0);
        assert_eq!(report.baseline.steps, 3 * 60);
    }

    #[test]
    fn two_replicates_have_tests() {
        let cfg = small_config(2, vec![0.2]);
        let report = run_grid(&cfg, &prepare(&cfg)).unwrap();
        let f = &report.fractions[0];
        assert_eq!(f.replicates, 2);
        let t = f.tests.as_ref().unwrap();
        assert!(t.qwk_ks.is_some());
    }

    #[test]
    fn failing_cell_is_recorded() {
        let mut cfg = small_config(1, vec![0.2, 0.5]);
        cfg.teacher = TeacherSpec::Remote(crate::pipeline::config::RemoteTeacherSpec {
            scorer: Default::default(),
            rubric_file: None,
            per_fraction: vec![],
            attestation: "n/a".into(),
        });
        let report = run_grid(&cfg, &prepare(&cfg)).unwrap();
        assert_eq!(report.failed_cells(), 2);
        assert!(report.fractions.iter().all(|f| f.qwk_orig.is_none()));
    }

    #[test]
    fn overlapping_corpus_rejected() {
        let (train, _) = generate_fixture(&FixtureConfig { train_size: 20, test_size: 5, ..FixtureConfig::default() }, 1).unwrap();
        let cfg = small_config(1, vec![0.5]);
        assert!(PreparedCorpus::new(train.clone(), train, &cfg.student).is_err());
    }
}
