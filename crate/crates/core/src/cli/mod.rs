//! The `cyborg` command line. Every command that writes files also writes a
//! `manifest.json` next to them.
//!
//! Exit codes: 0 success, 1 a stage failed, 2 usage or input error,
//! 3 grid finished with some failed cells.
//!
//! For `grid`, flags override the config file, which overrides built-in
//! defaults. The only environment variables read are
//! `CYBORG_TEACHER_ENDPOINT` and `CYBORG_TEACHER_TOKEN`.

mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub use manifest::{CellSeed, RunManifest};

use crate::bias::{bias_audit, demographic_table, FractionRuns};
use crate::corpus::{
    generate_fixture, load_csv, load_csv_split, sample_subset, summarize, summarize_split, write_csv, ColumnMap,
    FixtureConfig, ScoreLabel, ScoredDataset,
};
use crate::lora::LoraLinear;
use crate::metrics::{report as metric_report, MetricReport};
use crate::pipeline::{build_augmented, emit_tables, run_grid, ExperimentConfig, Origin, PreparedCorpus};
use crate::student::{calibrate_cutoffs, train_student, Mode, StudentModel, TrainConfig};
use crate::teacher::{render_prompt, RemoteScorerConfig, RemoteTeacher, Scorer, SimTeacherParams};
use crate::{seed, Error};

#[derive(Debug, Parser)]
#[command(name = "cyborg", version, about = "Teacher-student score distillation for essay scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a corpus CSV and write descriptive summaries.
    Ingest(IngestArgs),
    /// Generate a synthetic train/test corpus.
    Fixture(FixtureArgs),
    /// Draw the human-labelled subset U from a training file.
    Split(SplitArgs),
    /// Print the teacher prompt for one essay.
    RenderPrompt(RenderArgs),
    /// Score essays with a teacher.
    Score(ScoreArgs),
    /// Build an augmented training set: human labels on U, teacher labels elsewhere.
    Augment(AugmentArgs),
    /// Train a student model.
    Train(TrainArgs),
    /// Compare predictions (or a model's predictions) with gold scores.
    Evaluate(EvaluateArgs),
    /// Run the fraction x replicate experiment grid.
    Grid(GridArgs),
    /// Subgroup audit of teacher labels against human labels.
    BiasReport(BiasArgs),
    /// Train a low-rank adapter on a toy linear map.
    LoraDemo(LoraArgs),
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    /// Column override `key=header` (keys: essay_id, text, score, grade_level,
    /// prompt_name, race, gender, ell, disability, econ, split).
    #[arg(long = "column", value_name = "KEY=HEADER")]
    pub columns: Vec<String>,
}

impl ColumnArgs {
    fn map(&self) -> crate::Result<ColumnMap> {
        let mut m = ColumnMap::default();
        for c in &self.columns {
            m.set(c)?;
        }
        Ok(m)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// One file; split into train/test when it has a split column.
    #[arg(long, conflicts_with_all = ["train", "test"])]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 2000)]
    pub train_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Share of the training set kept with human labels.
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub essay: PathBuf,
    #[arg(long)]
    pub rubric: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub lo: u8,
    #[arg(long, default_value_t = 6)]
    pub hi: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TeacherKind {
    Simulated,
    Remote,
}

#[derive(Debug, Args)]
pub struct TeacherArgs {
    #[arg(long, value_enum, default_value_t = TeacherKind::Simulated)]
    pub teacher: TeacherKind,
    /// Simulated teacher noise (score points).
    #[arg(long, default_value_t = 0.7)]
    pub sigma: f64,
    /// Simulated teacher additive bias (score points).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub severity: f64,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Rubric text file (remote teacher).
    #[arg(long)]
    pub rubric: Option<PathBuf>,
}

impl TeacherArgs {
    fn build(&self, seed: u64) -> crate::Result<Box<dyn Scorer>> {
        match self.teacher {
            TeacherKind::Simulated => Ok(Box::new(SimTeacherParams::new(self.sigma, self.severity, seed)?)),
            TeacherKind::Remote => {
                let mut cfg = RemoteScorerConfig {
                    timeout_secs: self.timeout,
                    max_concurrency: self.concurrency,
                    retries: self.retries,
                    ..RemoteScorerConfig::default()
                };
                if let Some(e) = &self.endpoint {
                    cfg.endpoint = e.clone();
                }
                if let Some(r) = &self.rubric {
                    cfg.rubric = std::fs::read_to_string(r)?;
                }
                Ok(Box::new(RemoteTeacher::new(cfg.with_env_overrides())?))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub teacher: TeacherArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub teacher: TeacherArgs,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Classifier,
    Regressor,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV; its `label` column (or gold score) is the target.
    #[arg(long)]
    pub data: PathBuf,
    /// Development CSV for regressor cutoff calibration.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Classifier)]
    pub mode: ModeArg,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Output directory; the model is written to `model.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with `essay_id` and a `score`, `label` or gold-score column.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub pred: Option<PathBuf>,
    /// Student model file; `--gold` must then be a corpus CSV with essay text.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    /// Training CSV with the human labels.
    #[arg(long)]
    pub human: PathBuf,
    /// Augmented training CSV for one fraction, as `P=PATH`; repeatable.
    #[arg(long = "augmented", value_name = "P=PATH", required = true)]
    pub augmented: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LoraArgs {
    #[arg(long, default_value_t = 6)]
    pub rows: usize,
    #[arg(long, default_value_t = 5)]
    pub cols: usize,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 4000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure tagged with the stage it happened in.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.message)
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_STAGE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

fn classify(e: &Error) -> i32 {
    match e {
        Error::MissingColumn(_)
        | Error::Row { .. }
        | Error::DuplicateId(_)
        | Error::ScoreRange(..)
        | Error::Config(_)
        | Error::Csv(_)
        | Error::Toml(_)
        | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_STAGE,
    }
}

trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, name: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            stage: name,
            code: classify(&e),
            message: e.to_string(),
        })
    }
}

fn usage(stage: &'static str, message: impl Into<String>) -> CliError {
    CliError {
        stage,
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| usage("output", format!("cannot create {}: {e}", dir.display())))
}

fn write_dataset(data: &ScoredDataset, path: &Path) -> crate::Result<()> {
    write_csv(data, BufWriter::new(File::create(path)?))
}

/// Parse arguments and run. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, recorded) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// Run a parsed command. `Ok` carries the exit code (0, or 3 for a partial
/// grid).
pub fn run(cli: Cli, args: Vec<String>) -> Result<i32, CliError> {
    match cli.command {
        Command::Ingest(a) => ingest(a, args),
        Command::Fixture(a) => fixture(a, args),
        Command::Split(a) => split(a, args),
        Command::RenderPrompt(a) => render(a),
        Command::Score(a) => score(a, args),
        Command::Augment(a) => augment(a, args),
        Command::Train(a) => train(a, args),
        Command::Evaluate(a) => evaluate(a, args),
        Command::Grid(a) => grid(a, args),
        Command::BiasReport(a) => bias_report(a, args),
        Command::LoraDemo(a) => lora_demo(a, args),
    }
}

fn has_column(path: &Path, header: &str) -> crate::Result<bool> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.headers()?.iter().any(|h| h.trim() == header))
}

fn ingest(a: IngestArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("ingest", args);
    let map = a.columns.map().stage("config")?;
    m.config(&map);
    prepare_dir(&a.out)?;
    let split = match (&a.input, &a.train, &a.test) {
        (Some(input), _, _) => {
            if has_column(input, &map.split).stage("load")? {
                Some(m.stage("load", || load_csv_split(input, &map)).stage("load")?)
            } else {
                let data = m.stage("load", || load_csv(input, &map)).stage("load")?;
                let s = summarize(&data);
                let body = serde_json::to_string_pretty(&s).map_err(Error::from).stage("summary")?;
                std::fs::write(a.out.join("summary.json"), body + "\n").map_err(Error::from).stage("summary")?;
                m.output("summary.json");
                None
            }
        }
        (None, Some(train), Some(test)) => {
            let tr = load_csv(train, &map).stage("load")?;
            let te = load_csv(test, &map).stage("load")?;
            Some((tr, te))
        }
        _ => return Err(usage("arguments", "give --input, or --train and --test")),
    };
    if let Some((train, test)) = split {
        let s = summarize_split(&train, &test);
        let files = [
            ("grades.csv", s.grade_table_csv()),
            ("subgroups.csv", s.subgroup_table_csv()),
            ("summary.json", serde_json::to_string_pretty(&s).map_err(Error::from).stage("summary")? + "\n"),
        ];
        for (name, body) in files {
            std::fs::write(a.out.join(name), body).map_err(Error::from).stage("summary")?;
            m.output(name);
        }
        println!("train {} / test {} / total {}", s.train.total, s.test.total, s.train.total + s.test.total);
    }
    m.write(&a.out).stage("manifest")?;
    Ok(EXIT_OK)
}

fn fixture(a: FixtureArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("fixture", args);
    let cfg = FixtureConfig {
        train_size: a.train_size,
        test_size: a.test_size,
        ..FixtureConfig::default()
    };
    m.config(&cfg);
    m.master_seed = Some(a.seed);
    prepare_dir(&a.out)?;
    let (train, test) = m.stage("generate", || generate_fixture(&cfg, a.seed)).stage("generate")?;
    write_dataset(&train, &a.out.join("train.csv")).stage("write")?;
    write_dataset(&test, &a.out.join("test.csv")).stage("write")?;
    m.output("train.csv");
    m.output("test.csv");
    m.write(&a.out).stage("manifest")?;
    Ok(EXIT_OK)
}

fn split(a: SplitArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("split", args);
    m.master_seed = Some(a.seed);
    m.config(&serde_json::json!({ "fraction": a.fraction }));
    prepare_dir(&a.out)?;
    let train = load_csv(&a.train, &a.columns.map().stage("config")?).stage("load")?;
    let s = sample_subset(&train, a.fraction, a.seed).stage("sample")?;
    write_dataset(&s.u, &a.out.join("u.csv")).stage("write")?;
    write_dataset(&s.rest, &a.out.join("rest.csv")).stage("write")?;
    m.output("u.csv");
    m.output("rest.csv");
    println!("U: {} essays, rest: {}", s.u.len(), s.rest.len());
    m.write(&a.out).stage("manifest")?;
    Ok(EXIT_OK)
}

fn render(a: RenderArgs) -> Result<i32, CliError> {
    let essay = std::fs::read_to_string(&a.essay).map_err(Error::from).stage("read")?;
    let rubric = std::fs::read_to_string(&a.rubric).map_err(Error::from).stage("read")?;
    let text = render_prompt(&essay, &rubric, a.lo, a.hi).map_err(|e| usage("render", e.to_string()))?;
    print!("{text}");
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    essay_id: &'a str,
    score: String,
    status: String,
}

fn score(a: ScoreArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("score", args);
    m.master_seed = Some(a.seed);
    prepare_dir(&a.out)?;
    let data = load_csv(&a.input, &a.columns.map().stage("config")?).stage("load")?;
    let teacher = a.teacher.build(seed::derive(a.seed, &[b"teacher"])).stage("teacher")?;
    m.config(&serde_json::json!({ "teacher": teacher.descriptor() }));
    let essays: Vec<_> = data.iter().map(|r| r.essay.as_ref()).collect();
    let outcomes = m.stage("score", || teacher.score_essays(&essays));
    let mut w = csv::Writer::from_path(a.out.join("scores.csv")).map_err(Error::from).stage("write")?;
    let mut failed = 0;
    for (r, o) in data.iter().zip(&outcomes) {
        let row = match o {
            Ok(s) => ScoreRow {
                essay_id: r.id(),
                score: s.to_string(),
                status: "ok".into(),
            },
            Err(e) => {
                failed += 1;
                ScoreRow {
                    essay_id: r.id(),
                    score: String::new(),
                    status: format!("failed: {e}"),
                }
            }
        };
        w.serialize(row).map_err(Error::from).stage("write")?;
    }
    w.flush().map_err(Error::from).stage("write")?;
    m.teacher_failures = failed;
    m.output("scores.csv");
    println!("scored {} essays, {failed} failed", outcomes.len() - failed);
    m.write(&a.out).stage("manifest")?;
    Ok(EXIT_OK)
}

fn augment(a: AugmentArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("augment", args);
    m.master_seed = Some(a.seed);
    prepare_dir(&a.out)?;
    let train = load_csv(&a.train, &a.columns.map().stage("config")?).stage("load")?;
    let subset_seed = seed::derive(a.seed, &[b"subset"]);
    let s = sample_subset(&train, a.fraction, subset_seed).stage("sample")?;
    let teacher = a.teacher.build(seed::derive(a.seed, &[b"teacher"])).stage("teacher")?;
    let origin = Origin {
        p: a.fraction,
        seed: subset_seed,
        teacher: String::new(),
    };
    let aug = m
        .stage("augment", || build_augmented(&train, &s.u, teacher.as_ref(), origin))
        .stage("augment")?;
    m.config(&aug.origin);
    write_dataset(&aug.data, &a.out.join("augmented.csv")).stage("write")?;
    let mut w = csv::Writer::from_path(a.out.join("failures.csv")).map_err(Error::from).stage("write")?;
    w.write_record(["essay_id", "error"]).map_err(Error::from).stage("write")?;
    for f in &aug.failures {
        w.write_record([f.essay_id.as_str(), &f.error.to_string()]).map_err(Error::from).stage("write")?;
    }
    w.flush().map_err(Error::from).stage("write")?;
    m.teacher_failures = aug.failures.len();
    m.output("augmented.csv");
    m.output("failures.csv");
    println!(
        "{} human + {} teacher-labelled essays, {} teacher failures",
        aug.human_count(),
        aug.synthetic_count(),
        aug.failures.len()
    );
    m.write(&a.out).stage("manifest")?;
    Ok(EXIT_OK)
}

fn train(a: TrainArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("train", args);
    m.master_seed = Some(a.seed);
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        feature_dim: a.feature_dim.unwrap_or(d.feature_dim),
        mode: match a.mode {
            ModeArg::Classifier => Mode::Classifier,
            ModeArg::Regressor => Mode::Regressor,
        },
        seed: a.seed,
        ..d
    };
    cfg.validate().stage("config")?;
    m.config(&cfg);
    prepare_dir(&a.out)?;
    let map = a.columns.map().stage("config")?;
    let data = load_csv(&a.data, &map).stage("load")?;
    let mut model = m.stage("train", || train_student(&data, &cfg)).stage("train")?;
    if let Some(dev) = &a.dev {
        let dev = load_csv(dev, &map).stage("load")?;
        let cal = m.stage("calibrate", || calibrate_cutoffs(&model, &dev)).stage("calibrate")?;
        println!(
            "cutoffs {:?}: dev QWK {:.3}, SMD {:.3}{}",
            cal.search.cutoffs,
            cal.search.qwk,
            cal.search.smd,
            if cal.search.feasible { "" } else { " (SMD tolerance not met)" }
        );
        model = cal.model;
    }
    model.save(a.out.join("model.json")).stage("write")?;
    m.output("model.json");
    println!("trained {} steps over {} essays", model.steps, data.len());
    m.write(&a.out).stage("manifest")?;
    Ok(EXIT_OK)
}

/// Read `essay_id` plus the first of `score`, `label`, `holistic_essay_score`.
fn read_scores(path: &Path) -> crate::Result<BTreeMap<String, ScoreLabel>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id = find("essay_id").ok_or_else(|| Error::MissingColumn("essay_id".into()))?;
    let col = ["score", "label", "holistic_essay_score"]
        .iter()
        .find_map(|c| find(c))
        .ok_or_else(|| Error::MissingColumn("score".into()))?;
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(col).unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let v: f64 = raw.parse().map_err(|_| Error::Row {
            row: i + 1,
            message: format!("score `{raw}` is not a number"),
        })?;
        if v.fract() != 0.0 {
            return Err(Error::Row {
                row: i + 1,
                message: format!("score `{raw}` is not an integer"),
            });
        }
        let key = rec.get(id).unwrap_or("").trim().to_string();
        if out.insert(key.clone(), ScoreLabel::new(v as i64)?).is_some() {
            return Err(Error::DuplicateId(key));
        }
    }
    Ok(out)
}

fn evaluate(a: EvaluateArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("evaluate", args);
    let (gold, pred): (Vec<ScoreLabel>, Vec<ScoreLabel>) = if let Some(model) = &a.model {
        let model = StudentModel::load(model).stage("load")?;
        let data = load_csv(&a.gold, &ColumnMap::default()).stage("load")?;
        data.iter().map(|r| (r.label, model.predict(&r.essay))).unzip()
    } else {
        let gold = read_scores(&a.gold).stage("load")?;
        let pred = read_scores(a.pred.as_ref().expect("clap requires --pred")).stage("load")?;
        let mut pairs = Vec::with_capacity(gold.len());
        for (id, g) in &gold {
            let p = pred.get(id).ok_or_else(|| usage("match", format!("essay `{id}` has no prediction")))?;
            pairs.push((*g, *p));
        }
        if let Some(id) = pred.keys().find(|k| !gold.contains_key(*k)) {
            return Err(usage("match", format!("essay `{id}` has no gold score")));
        }
        pairs.into_iter().unzip()
    };
    let r: MetricReport = metric_report(&gold, &pred).stage("metrics")?;
    println!("QWK {:.3}", r.qwk);
    println!("SMD {:.3}", r.smd);
    println!("exact agreement {:.3} over {} essays", r.exact_agreement, gold.len());
    if let Some(out) = &a.out {
        prepare_dir(out)?;
        let body = serde_json::to_string_pretty(&r).map_err(Error::from).stage("write")?;
        std::fs::write(out.join("metrics.json"), body + "\n").map_err(Error::from).stage("write")?;
        m.output("metrics.json");
        m.write(out).stage("manifest")?;
    }
    Ok(EXIT_OK)
}

fn grid(a: GridArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("grid", args);
    let mut cfg = ExperimentConfig::load(&a.config).stage("config")?;
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match &a.out {
        Some(o) => o.clone(),
        None => base.join(&cfg.output_dir),
    };
    cfg.output_dir = out.clone();
    cfg.validate().stage("config")?;
    m.config(&cfg);
    m.master_seed = Some(cfg.seed);
    if let crate::pipeline::TeacherSpec::Remote(r) = &cfg.teacher {
        m.notes.push(format!("remote teacher attestation: {}", r.attestation));
    }
    prepare_dir(&out)?;
    let (train, test) = m.stage("load", || cfg.corpus.load(cfg.seed, &base)).stage("load")?;
    let corpus = m
        .stage("featurize", || PreparedCorpus::new(train, test, &cfg.student))
        .stage("featurize")?;
    let report = m.stage("grid", || run_grid(&cfg, &corpus)).stage("grid")?;
    for c in report.completed() {
        m.cell_seeds.push(CellSeed {
            p: c.p,
            replicate: c.replicate,
            seed: c.seeds.cell,
        });
    }
    m.teacher_failures = report.teacher_failures();
    let files = m
        .stage("tables", || emit_tables(&report, &corpus.train, &out))
        .stage("tables")?;
    for f in files.files {
        m.output(f);
    }
    let body = serde_json::to_string_pretty(&report).map_err(Error::from).stage("write")?;
    std::fs::write(out.join("report.json"), body + "\n").map_err(Error::from).stage("write")?;
    m.output("report.json");
    m.write(&out).stage("manifest")?;

    println!("human  qwk_orig qwk_aug  smd_orig smd_aug");
    for f in &report.fractions {
        let show = |v: Option<f64>| v.map_or_else(|| "  n/a  ".to_string(), |x| format!("{x:+.3}"));
        println!(
            "{:>4.0}%  {}   {}   {}   {}",
            f.p * 100.0,
            show(f.qwk_orig),
            show(f.qwk_aug),
            show(f.smd_orig),
            show(f.smd_aug)
        );
    }
    println!("100%  {:+.3}            {:+.3}", report.baseline.eval.qwk, report.baseline.eval.smd);
    let failed = report.failed_cells();
    if failed == 0 {
        Ok(EXIT_OK)
    } else if failed == report.cells.len() {
        let first = report.cells.iter().find_map(|c| match c {
            crate::pipeline::CellOutcome::Failed { error, .. } => Some(error.clone()),
            _ => None,
        });
        Err(CliError {
            stage: "grid",
            code: EXIT_STAGE,
            message: format!("every cell failed; first error: {}", first.unwrap_or_default()),
        })
    } else {
        eprintln!("warning: {failed} of {} grid cells failed; see cells.csv", report.cells.len());
        Ok(EXIT_PARTIAL)
    }
}

fn bias_report(a: BiasArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("bias-report", args);
    prepare_dir(&a.out)?;
    let human = load_csv(&a.human, &ColumnMap::default()).stage("load")?;
    let mut loaded: Vec<(f64, ScoredDataset)> = Vec::new();
    for arg in &a.augmented {
        let (p, path) = arg
            .split_once('=')
            .ok_or_else(|| usage("arguments", format!("--augmented `{arg}` is not P=PATH")))?;
        let p: f64 = p.trim().parse().map_err(|_| usage("arguments", format!("bad fraction `{p}`")))?;
        loaded.push((p, load_csv(path, &ColumnMap::default()).stage("load")?));
    }
    loaded.sort_by(|x, y| x.0.total_cmp(&y.0));
    let by_p: Vec<FractionRuns<'_>> = loaded
        .iter()
        .map(|(p, d)| FractionRuns { p: *p, runs: vec![d] })
        .collect();
    let traj = bias_audit(&human, &by_p).stage("audit")?;
    let table = demographic_table(&by_p, &human);
    let mut put = |name: &str, body: String| -> Result<(), CliError> {
        std::fs::write(a.out.join(name), body).map_err(Error::from).stage("write")?;
        m.output(name);
        Ok(())
    };
    put("bias_smd.csv", traj.to_csv())?;
    put("subgroup_means.csv", table.to_csv())?;
    for (axis, chart) in traj.charts() {
        put(&format!("bias_{}.svg", axis.name()), chart.to_svg())?;
    }
    m.notes.push("human-labelled records excluded from the audit".into());
    m.write(&a.out).stage("manifest")?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct LoraSummary {
    rows: usize,
    cols: usize,
    rank: usize,
    steps: usize,
    loss_before: f64,
    loss_after: f64,
    effective_rank: usize,
    weight_unchanged: bool,
}

fn lora_demo(a: LoraArgs, args: Vec<String>) -> Result<i32, CliError> {
    let mut m = RunManifest::new("lora-demo", args);
    m.master_seed = Some(a.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(a.seed, &[b"lora-demo"]));
    let mut draw = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let w: DMatrix<f64> = draw(a.rows, a.cols);
    let b: DVector<f64> = draw(a.rows, 1).column(0).into();
    let target = &w + draw(a.rows, a.rank) * draw(a.rank, a.cols);
    let data: Vec<(DVector<f64>, DVector<f64>)> = (0..4 * (a.rows + a.cols))
        .map(|_| {
            let x: DVector<f64> = draw(a.cols, 1).column(0).into();
            let t = &target * &x + &b;
            (x, t)
        })
        .collect();
    let layer = LoraLinear::new(w.clone(), b, a.rank, a.seed).map_err(|e| usage("lora", e.to_string()))?;
    let loss_before = layer.loss(&data).stage("lora")?;
    let trained = m.stage("train", || layer.train(&data, a.steps, a.lr)).stage("lora")?;
    let summary = LoraSummary {
        rows: a.rows,
        cols: a.cols,
        rank: a.rank,
        steps: a.steps,
        loss_before,
        loss_after: trained.loss(&data).stage("lora")?,
        effective_rank: trained.effective_rank(),
        weight_unchanged: trained.weight().iter().zip(w.iter()).all(|(x, y)| x.to_bits() == y.to_bits()),
    };
    let body = serde_json::to_string_pretty(&summary).map_err(Error::from).stage("write")?;
    println!("{body}");
    if let Some(out) = &a.out {
        prepare_dir(out)?;
        m.config(&summary);
        std::fs::write(out.join("lora.json"), body + "\n").map_err(Error::from).stage("write")?;
        m.output("lora.json");
        m.write(out).stage("manifest")?;
    }
    let _ = std::io::stdout().flush();
    Ok(EXIT_OK)
}
