//! Teacher-student score distillation for automated essay scoring.
//!
//! The harness builds "cyborg" training sets, where a human-scored subset `U`
//! of the training essays keeps its gold labels and the remaining essays are
//! labelled by a teacher scorer. A lightweight student is trained on the
//! subset alone and on the augmented set, and both are compared on a held-out
//! test set with quadratic weighted kappa (QWK) and standardized mean
//! difference (SMD).
//!
//! Module map:
//!
//! * [`corpus`]: essay records, CSV ingestion, synthetic fixture corpora,
//!   descriptive summaries and subset sampling.
//! * [`metrics`]: confusion matrices, QWK, SMD and score distributions.
//! * [`stats`]: paired t-test and two-sample Kolmogorov-Smirnov test.
//! * [`student`]: hashed n-gram features and the native linear student.
//! * [`teacher`]: prompt rendering, completion parsing, the simulated
//!   teacher and the HTTP teacher client.
//! * [`lora`]: a frozen linear map with a trainable low-rank delta.
//! * [`pipeline`]: augmented datasets, the fraction x replicate grid and
//!   table/plot emission.
//! * [`bias`]: subgroup SMDs and demographic score tables.
//! * [`cli`]: the `cyborg` command-line surface.

pub mod bias;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod lora;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod seed;
pub mod stats;
pub mod student;
pub mod teacher;

pub use error::{Error, Result};
