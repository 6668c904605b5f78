//! Agreement and scale metrics.
//!
//! Quadratic weighted kappa follows
//!
//! ```text
//! kappa = 1 - sum(w_ij * O_ij) / sum(w_ij * E_ij),   w_ij = (i - j)^2 / (N + 1)^2
//! ```
//!
//! where `O` is the observed confusion matrix (rows: first rater / gold,
//! columns: second rater / prediction) and `E_ij = row_i * col_j / total` is
//! the chance-agreement matrix built from the marginals. `N` is the number of
//! score categories. Because kappa is a ratio of two weighted sums, any
//! positive rescaling of the weights, including the more common
//! `(N - 1)^2` denominator, yields the same kappa.
//!
//! SMD uses population variances and is positive when predictions run high.

use serde::{Deserialize, Serialize};

use crate::corpus::ScoreLabel;
use crate::{Error, Result};

/// Observed counts `O_ij` over the score range `lo..=lo + n_points - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    lo: i64,
    n_points: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(lo: i64, n_points: usize, counts: Vec<u64>) -> Result<Self> {
        if n_points == 0 || counts.len() != n_points * n_points {
            return Err(Error::InvalidInput(format!(
                "confusion matrix needs {n_points}x{n_points} counts, got {}",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { lo, n_points, counts })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n_points + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_points).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n_points)
            .map(|i| (0..self.n_points).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_points)
            .map(|j| (0..self.n_points).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n_points).all(|i| (0..self.n_points).all(|j| i == j || self.get(i, j) == 0))
    }

    /// Chance-agreement matrix `E_ij = row_i * col_j / total`, row-major.
    pub fn expected(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let rows = self.row_sums();
        let cols = self.col_sums();
        let mut e = Vec::with_capacity(self.counts.len());
        for r in &rows {
            for c in &cols {
                e.push(*r as f64 * *c as f64 / total);
            }
        }
        e
    }
}

/// Count `(true, pred)` pairs over the inclusive range `lo..=hi`.
pub fn confusion(y_true: &[i64], y_pred: &[i64], lo: i64, hi: i64) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} true vs {} predicted",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidInput("confusion matrix needs at least one pair".into()));
    }
    if hi < lo {
        return Err(Error::InvalidInput(format!("empty score range {lo}..={hi}")));
    }
    let n = (hi - lo + 1) as usize;
    let mut counts = vec![0u64; n * n];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t < lo || t > hi || p < lo || p > hi {
            return Err(Error::InvalidInput(format!("pair ({t}, {p}) outside range {lo}..={hi}")));
        }
        counts[(t - lo) as usize * n + (p - lo) as usize] += 1;
    }
    ConfusionMatrix::from_counts(lo, n, counts)
}

/// Confusion matrix over the 1..=6 score scale.
pub fn score_confusion(y_true: &[ScoreLabel], y_pred: &[ScoreLabel]) -> Result<ConfusionMatrix> {
    let t: Vec<i64> = y_true.iter().map(|s| s.get() as i64).collect();
    let p: Vec<i64> = y_pred.iter().map(|s| s.get() as i64).collect();
    confusion(&t, &p, ScoreLabel::MIN as i64, ScoreLabel::MAX as i64)
}

/// Quadratic weight `(i - j)^2 / (N + 1)^2`.
pub fn quad_weight(i: i64, j: i64, n_points: usize) -> f64 {
    let d = (i - j) as f64;
    let s = (n_points + 1) as f64;
    d * d / (s * s)
}

/// The full quadratic weight matrix, row-major.
pub fn quad_weights(n_points: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_points * n_points);
    for i in 0..n_points {
        for j in 0..n_points {
            w.push(quad_weight(i as i64, j as i64, n_points));
        }
    }
    w
}

/// Weighted kappa for an arbitrary weight matrix (row-major, `N x N`).
pub fn weighted_kappa(m: &ConfusionMatrix, weights: &[f64]) -> Result<f64> {
    let n = m.n_points();
    if weights.len() != n * n {
        return Err(Error::InvalidInput("weight matrix shape does not match".into()));
    }
    if m.total() == 0 {
        return Err(Error::Degenerate("kappa of an empty confusion matrix"));
    }
    let expected = m.expected();
    let mut observed_sum = 0.0;
    let mut expected_sum = 0.0;
    for k in 0..n * n {
        observed_sum += weights[k] * m.counts[k] as f64;
        expected_sum += weights[k] * expected[k];
    }
    if expected_sum <= 0.0 {
        return Err(Error::Degenerate("kappa undefined: chance disagreement is zero"));
    }
    Ok(1.0 - observed_sum / expected_sum)
}

/// Quadratic weighted kappa.
pub fn qwk(m: &ConfusionMatrix) -> Result<f64> {
    weighted_kappa(m, &quad_weights(m.n_points()))
}

/// QWK of two label lists on the 1..=6 scale.
pub fn qwk_scores(y_true: &[ScoreLabel], y_pred: &[ScoreLabel]) -> Result<f64> {
    qwk(&score_confusion(y_true, y_pred)?)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Standardized mean difference `(mean(pred) - mean(true)) / pooled SD`,
/// pooled SD = `sqrt((var(pred) + var(true)) / 2)` with population variances.
pub fn smd(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} true vs {} predicted",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidInput("SMD needs at least two pairs".into()));
    }
    let (mt, vt) = mean_var(y_true);
    let (mp, vp) = mean_var(y_pred);
    let pooled = ((vp + vt) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::Degenerate("SMD undefined: both label sets are constant"));
    }
    Ok((mp - mt) / pooled)
}

pub fn smd_scores(y_true: &[ScoreLabel], y_pred: &[ScoreLabel]) -> Result<f64> {
    let t: Vec<f64> = y_true.iter().map(|s| s.get() as f64).collect();
    let p: Vec<f64> = y_pred.iter().map(|s| s.get() as f64).collect();
    smd(&t, &p)
}

/// Share of points per score plus the mean label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    /// Percentages for scores 1..=6, unrounded.
    pub percent: [f64; ScoreLabel::COUNT],
    pub mean: f64,
    pub n: usize,
}

impl ScoreDistribution {
    /// Percentages at one decimal, as printed in report tables.
    pub fn percent_rounded(&self) -> [String; ScoreLabel::COUNT] {
        std::array::from_fn(|i| format!("{:.1}", self.percent[i]))
    }

    pub fn mean_rounded(&self) -> String {
        format!("{:.2}", self.mean)
    }
}

pub fn score_distribution(labels: &[ScoreLabel]) -> Result<ScoreDistribution> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("score distribution of an empty label list".into()));
    }
    let mut counts = [0usize; ScoreLabel::COUNT];
    let mut sum = 0.0;
    for l in labels {
        counts[l.index()] += 1;
        sum += l.get() as f64;
    }
    let n = labels.len();
    Ok(ScoreDistribution {
        percent: std::array::from_fn(|i| 100.0 * counts[i] as f64 / n as f64),
        mean: sum / n as f64,
        n,
    })
}

/// QWK, SMD, exact agreement and the prediction distribution in one go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub qwk: f64,
    pub smd: f64,
    pub exact_agreement: f64,
    pub distribution: ScoreDistribution,
}

pub fn report(y_true: &[ScoreLabel], y_pred: &[ScoreLabel]) -> Result<MetricReport> {
    let m = score_confusion(y_true, y_pred)?;
    Ok(MetricReport {
        qwk: qwk(&m)?,
        smd: smd_scores(y_true, y_pred)?,
        exact_agreement: m.trace() as f64 / m.total() as f64,
        distribution: score_distribution(y_pred)?,
    })
}
