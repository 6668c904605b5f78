use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, Featurizer, DEFAULT_DIM};
use crate::corpus::{EssayRecord, ScoreLabel};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Evenly spaced cutoffs over the unit interval.
pub const EVEN_CUTOFFS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Six-way softmax trained with cross-entropy.
    Classifier,
    /// Sigmoid output in (0, 1) trained with squared error against
    /// `(label - 1) / 5`, mapped to scores by cutoffs.
    Regressor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak learning rate, decayed linearly to zero over all steps.
    pub learning_rate: f64,
    /// Decoupled (AdamW-style) weight decay.
    pub weight_decay: f64,
    pub seed: u64,
    pub feature_dim: usize,
    pub mode: Mode,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 4,
            learning_rate: 5e-5,
            weight_decay: 0.01,
            seed: 0,
            feature_dim: DEFAULT_DIM,
            mode: Mode::Classifier,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be nonnegative".into()));
        }
        if self.feature_dim <= super::features::LENGTH_FEATURES + 1 {
            return Err(Error::Config("feature_dim too small".into()));
        }
        Ok(())
    }

    pub fn featurizer(&self) -> Featurizer {
        Featurizer::new(self.feature_dim)
    }

    /// Optimizer steps for `n` examples: `epochs * ceil(n / batch_size)`.
    pub fn total_steps(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.batch_size)
    }
}

/// Pick the highest logit; ties go to the lower score.
pub fn argmax_score(logits: &[f64]) -> ScoreLabel {
    let mut best = 0;
    for (k, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = k;
        }
    }
    ScoreLabel::from_index(best)
}

/// Score `1 + #{cutoffs <= output}`.
pub fn score_from_cutoffs(output: f64, cutoffs: &[f64; 5]) -> ScoreLabel {
    let above = cutoffs.iter().filter(|&&c| output >= c).count();
    ScoreLabel::from_index(above)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentModel {
    pub format_version: u32,
    pub mode: Mode,
    pub config: TrainConfig,
    /// Row-major `outputs x dim` weights (6 rows for the classifier, 1 for
    /// the regressor).
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Ascending cutoffs in (0, 1); regressor only.
    pub cutoffs: Option<[f64; 5]>,
    pub steps: usize,
    /// Mean training loss of each epoch.
    pub epoch_loss: Vec<f64>,
}

impl StudentModel {
    pub(crate) fn zeroed(config: &TrainConfig) -> Self {
        let outputs = match config.mode {
            Mode::Classifier => ScoreLabel::COUNT,
            Mode::Regressor => 1,
        };
        StudentModel {
            format_version: MODEL_FORMAT_VERSION,
            mode: config.mode,
            config: config.clone(),
            weights: vec![0.0; outputs * config.feature_dim],
            bias: vec![0.0; outputs],
            cutoffs: (config.mode == Mode::Regressor).then_some(EVEN_CUTOFFS),
            steps: 0,
            epoch_loss: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn featurizer(&self) -> Featurizer {
        self.config.featurizer()
    }

    /// Raw linear outputs (logits, or the pre-sigmoid value).
    pub fn linear(&self, x: &FeatureVector) -> Vec<f64> {
        let d = self.dim();
        (0..self.outputs())
            .map(|k| x.dot_dense(&self.weights[k * d..(k + 1) * d]) + self.bias[k])
            .collect()
    }

    /// Regressor output in (0, 1).
    pub fn regression_output(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.linear(x)[0])
    }

    pub fn predict_features(&self, x: &FeatureVector) -> ScoreLabel {
        match self.mode {
            Mode::Classifier => argmax_score(&self.linear(x)),
            Mode::Regressor => {
                score_from_cutoffs(self.regression_output(x), &self.cutoffs.unwrap_or(EVEN_CUTOFFS))
            }
        }
    }

    pub fn predict(&self, essay: &EssayRecord) -> ScoreLabel {
        self.predict_features(&self.featurizer().featurize(&essay.text))
    }

    pub fn with_cutoffs(mut self, cutoffs: [f64; 5]) -> Result<Self> {
        validate_cutoffs(&cutoffs)?;
        self.cutoffs = Some(cutoffs);
        Ok(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: StudentModel = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        let outputs = m.bias.len();
        if m.weights.len() != outputs * m.config.feature_dim {
            return Err(Error::InvalidInput("model weights do not match its dimensions".into()));
        }
        if let Some(c) = &m.cutoffs {
            validate_cutoffs(c)?;
        }
        Ok(m)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn validate_cutoffs(c: &[f64; 5]) -> Result<()> {
    let inside = c.iter().all(|&v| v > 0.0 && v < 1.0);
    let ascending = c.windows(2).all(|w| w[0] < w[1]);
    if inside && ascending {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("cutoffs {c:?} must be strictly ascending in (0, 1)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_score(&[0.1, 0.9, 0.9, 0.1, 0.0, 0.0]).get(), 2);
        assert_eq!(argmax_score(&[0.0; 6]).get(), 1);
        assert_eq!(argmax_score(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).get(), 6);
    }

    #[test]
    fn cutoff_boundaries() {
        let c = [0.2, 0.4, 0.6, 0.8, 0.9];
        assert_eq!(score_from_cutoffs(0.0, &c).get(), 1);
        assert_eq!(score_from_cutoffs(0.95, &c).get(), 6);
        assert_eq!(score_from_cutoffs(0.4, &c).get(), 3);
    }

    #[test]
    fn cutoff_validation() {
        assert!(validate_cutoffs(&EVEN_CUTOFFS).is_ok());
        assert!(validate_cutoffs(&[0.1, 0.1, 0.5, 0.7, 0.9]).is_err());
        assert!(validate_cutoffs(&[0.0, 0.3, 0.5, 0.7, 0.9]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!(TrainConfig::default().total_steps(10), 30);
    }
}
