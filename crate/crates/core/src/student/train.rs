use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::FeatureVector;
use super::model::{sigmoid, Mode, StudentModel, TrainConfig};
use crate::corpus::{ScoreLabel, ScoredDataset};
use crate::{seed, Error, Result};

/// Dense gradient buffer matching a model's parameter layout.
pub(crate) struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    pub(crate) fn zeros_like(model: &StudentModel) -> Self {
        Gradient {
            weights: vec![0.0; model.weights.len()],
            bias: vec![0.0; model.bias.len()],
        }
    }
}

/// Mean loss over `batch`, accumulating the mean gradient into `grad`
/// (which must be zero on entry).
pub(crate) fn batch_loss_grad(model: &StudentModel, batch: &[(&FeatureVector, ScoreLabel)], grad: &mut Gradient) -> f64 {
    let d = model.dim();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (x, y) in batch {
        let z = model.linear(x);
        match model.mode {
            Mode::Classifier => {
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                let target = y.index();
                loss -= (exps[target] / sum).ln();
                for (k, e) in exps.iter().enumerate() {
                    let g = (e / sum - if k == target { 1.0 } else { 0.0 }) * scale;
                    if g != 0.0 {
                        let row = &mut grad.weights[k * d..(k + 1) * d];
                        for (i, v) in x.iter() {
                            row[i] += g * v;
                        }
                    }
                    grad.bias[k] += g;
                }
            }
            Mode::Regressor => {
                let s = sigmoid(z[0]);
                let t = (y.get() - 1) as f64 / 5.0;
                loss += 0.5 * (s - t) * (s - t);
                let g = (s - t) * s * (1.0 - s) * scale;
                for (i, v) in x.iter() {
                    grad.weights[i] += g * v;
                }
                grad.bias[0] += g;
            }
        }
    }
    loss * scale
}

struct AdamW {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(model: &StudentModel) -> Self {
        AdamW {
            m_w: vec![0.0; model.weights.len()],
            v_w: vec![0.0; model.weights.len()],
            m_b: vec![0.0; model.bias.len()],
            v_b: vec![0.0; model.bias.len()],
            t: 0,
        }
    }

    /// One update; consumes (and re-zeroes) the gradient.
    fn step(&mut self, model: &mut StudentModel, grad: &mut Gradient, lr: f64) {
        let c = &model.config;
        let (b1, b2, eps, wd) = (c.beta1, c.beta2, c.epsilon, c.weight_decay);
        self.t += 1;
        let bc1 = 1.0 - b1.powi(self.t);
        let bc2 = 1.0 - b2.powi(self.t);
        let update = |p: &mut [f64], g: &mut [f64], m: &mut [f64], v: &mut [f64], decay: bool| {
            for i in 0..p.len() {
                let gi = g[i];
                g[i] = 0.0;
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                if decay {
                    p[i] -= lr * wd * p[i];
                }
                p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            }
        };
        update(&mut model.weights, &mut grad.weights, &mut self.m_w, &mut self.v_w, true);
        update(&mut model.bias, &mut grad.bias, &mut self.m_b, &mut self.v_b, false);
    }
}

/// Train on precomputed features. Runs exactly
/// `epochs * ceil(n / batch_size)` steps with a per-epoch shuffle keyed by
/// `config.seed`; there is no early stopping and no held-out split.
pub fn train_on_features(examples: &[(&FeatureVector, ScoreLabel)], config: &TrainConfig) -> Result<StudentModel> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidInput("cannot train a student on an empty dataset".into()));
    }
    if let Some((x, _)) = examples.iter().find(|(x, _)| x.dim() != config.feature_dim) {
        return Err(Error::InvalidInput(format!(
            "feature dimension {} does not match config {}",
            x.dim(),
            config.feature_dim
        )));
    }
    let mut model = StudentModel::zeroed(config);
    let mut opt = AdamW::new(&model);
    let mut grad = Gradient::zeros_like(&model);
    let total = config.total_steps(examples.len());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut batch: Vec<(&FeatureVector, ScoreLabel)> = Vec::with_capacity(config.batch_size);
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, &[b"epoch", &(epoch as u64).to_le_bytes()]));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i]));
            epoch_loss += batch_loss_grad(&model, &batch, &mut grad);
            let lr = config.learning_rate * (total - step) as f64 / total as f64;
            opt.step(&mut model, &mut grad, lr);
            step += 1;
            batches += 1;
        }
        model.epoch_loss.push(epoch_loss / batches as f64);
    }
    debug_assert_eq!(step, total);
    model.steps = step;
    Ok(model)
}

/// Featurize `data` with the config's featurizer and train on its labels.
pub fn train_student(data: &ScoredDataset, config: &TrainConfig) -> Result<StudentModel> {
    config.validate()?;
    let f = config.featurizer();
    let features: Vec<FeatureVector> = data.iter().map(|r| f.featurize(&r.essay.text)).collect();
    let examples: Vec<(&FeatureVector, ScoreLabel)> = features.iter().zip(data.iter().map(|r| r.label)).collect();
    train_on_features(&examples, config)
}
