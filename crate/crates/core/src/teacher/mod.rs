//! Teacher scorers: the prompt format and completion parser for a generative
//! teacher, an HTTP client for one, and a simulated teacher with
//! controllable noise and severity.

mod prompt;
mod remote;
mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{parse_score, render_prompt, ParseError, PromptTemplate, SCORE_MARKER};
pub use remote::{score_remote, RemoteScorerConfig, ENDPOINT_ENV, TOKEN_ENV};
pub use sim::{fit_sim_params, sim_score, Quality, QualityEstimator, SimFit, SimTeacherParams, MIN_DRAWS};

use crate::corpus::{EssayRecord, ScoreLabel};
use crate::student::StudentModel;

/// Why a teacher produced no score for an essay.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum TeacherError {
    #[error("unparseable completion: {0}")]
    Parse(#[from] ParseError),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Response(String),
    #[error("teacher misconfigured: {0}")]
    Config(String),
}

/// Anything that can label essays. Outcomes are per essay and in input
/// order.
pub trait Scorer: Sync {
    /// Short identifier recorded as the provenance tag of its labels.
    fn descriptor(&self) -> String;

    fn score_essays(&self, essays: &[&EssayRecord]) -> Vec<Result<ScoreLabel, TeacherError>>;
}

impl Scorer for SimTeacherParams {
    fn descriptor(&self) -> String {
        SimTeacherParams::descriptor(self)
    }

    fn score_essays(&self, essays: &[&EssayRecord]) -> Vec<Result<ScoreLabel, TeacherError>> {
        essays.iter().map(|e| Ok(sim_score(e.gold_score, self, &e.essay_id))).collect()
    }
}

/// Remote teacher bound to a validated config.
#[derive(Debug, Clone)]
pub struct RemoteTeacher {
    config: RemoteScorerConfig,
}

impl RemoteTeacher {
    pub fn new(config: RemoteScorerConfig) -> crate::Result<Self> {
        config.validate()?;
        Ok(RemoteTeacher { config })
    }

    pub fn config(&self) -> &RemoteScorerConfig {
        &self.config
    }
}

impl Scorer for RemoteTeacher {
    fn descriptor(&self) -> String {
        format!("remote({})", self.config.endpoint)
    }

    fn score_essays(&self, essays: &[&EssayRecord]) -> Vec<Result<ScoreLabel, TeacherError>> {
        let texts: Vec<&str> = essays.iter().map(|e| e.text.as_str()).collect();
        score_remote(&self.config, &texts)
            .unwrap_or_else(|e| essays.iter().map(|_| Err(TeacherError::Config(e.to_string()))).collect())
    }
}

impl Scorer for StudentModel {
    fn descriptor(&self) -> String {
        format!("student({:?},dim={})", self.mode, self.dim())
    }

    fn score_essays(&self, essays: &[&EssayRecord]) -> Vec<Result<ScoreLabel, TeacherError>> {
        essays.iter().map(|e| Ok(self.predict(e))).collect()
    }
}
