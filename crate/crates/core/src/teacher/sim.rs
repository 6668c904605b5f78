//! Simulated teacher: `clip(round(gold + severity + e), 1, 6)` with
//! `e ~ Normal(0, sigma^2)` drawn from a stream keyed by the essay id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{ScoreLabel, ScoredDataset};
use crate::metrics::{qwk, ConfusionMatrix};
use crate::{seed, Error, Result};

/// Minimum number of simulated (gold, teacher) pairs behind every Monte
/// Carlo quality estimate.
pub const MIN_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTeacherParams {
    pub sigma: f64,
    pub severity: f64,
    pub seed: u64,
}

impl SimTeacherParams {
    pub fn new(sigma: f64, severity: f64, seed: u64) -> Result<Self> {
        let p = SimTeacherParams { sigma, severity, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn noiseless(seed: u64) -> Self {
        SimTeacherParams {
            sigma: 0.0,
            severity: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) || !self.severity.is_finite() {
            return Err(Error::Config(format!(
                "teacher sigma must be finite and >= 0 (got {}), severity finite (got {})",
                self.sigma, self.severity
            )));
        }
        Ok(())
    }

    pub fn descriptor(&self) -> String {
        format!("sim(sigma={:.3},severity={:+.3},seed={})", self.sigma, self.severity, self.seed)
    }
}

fn noise(seed: u64, essay_id: &str) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[b"sim-teacher", essay_id.as_bytes()]));
    StandardNormal.sample(&mut rng)
}

fn apply(gold: ScoreLabel, sigma: f64, severity: f64, z: f64) -> ScoreLabel {
    ScoreLabel::clip_round(gold.get() as f64 + severity + sigma * z)
}

pub fn sim_score(gold: ScoreLabel, params: &SimTeacherParams, essay_id: &str) -> ScoreLabel {
    apply(gold, params.sigma, params.severity, noise(params.seed, essay_id))
}

/// Monte Carlo estimate of how a parameter setting agrees with a set of gold
/// scores. The same standard-normal draws are reused for every setting
/// (common random numbers), so comparisons between settings are smooth.
#[derive(Debug, Clone)]
pub struct QualityEstimator {
    gold: Vec<u8>,
    z: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub qwk: f64,
    pub smd: f64,
}

impl QualityEstimator {
    /// Replicates `gold` until at least `min_draws` pairs are covered.
    pub fn new(gold: &[ScoreLabel], min_draws: usize, seed: u64) -> Result<Self> {
        if gold.is_empty() {
            return Err(Error::InvalidInput("no reference scores for the teacher fit".into()));
        }
        let reps = min_draws.div_ceil(gold.len()).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[b"sim-fit"]));
        let gold: Vec<u8> = (0..reps).flat_map(|_| gold.iter().map(|g| g.get())).collect();
        let z = (0..gold.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(QualityEstimator { gold, z })
    }

    pub fn draws(&self) -> usize {
        self.gold.len()
    }

    /// `None` when QWK or SMD is undefined for this setting.
    pub fn estimate(&self, sigma: f64, severity: f64) -> Option<Quality> {
        let mut counts = vec![0u64; 36];
        for (&g, &z) in self.gold.iter().zip(&self.z) {
            let s = apply(ScoreLabel::from_index(g as usize - 1), sigma, severity, z);
            counts[(g as usize - 1) * 6 + s.index()] += 1;
        }
        let m = ConfusionMatrix::from_counts(1, 6, counts).ok()?;
        let kappa = qwk(&m).ok()?;
        Some(Quality {
            qwk: kappa,
            smd: smd_of(&m)?,
        })
    }
}

fn smd_of(m: &ConfusionMatrix) -> Option<f64> {
    let n = m.total() as f64;
    let moments = |sums: Vec<u64>| {
        let mean = sums.iter().enumerate().map(|(k, &c)| (k + 1) as f64 * c as f64).sum::<f64>() / n;
        let var = sums
            .iter()
            .enumerate()
            .map(|(k, &c)| ((k + 1) as f64 - mean).powi(2) * c as f64)
            .sum::<f64>()
            / n;
        (mean, var)
    };
    let (mt, vt) = moments(m.row_sums());
    let (mp, vp) = moments(m.col_sums());
    let pooled = ((vt + vp) / 2.0).sqrt();
    (pooled > 0.0).then(|| (mp - mt) / pooled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimFit {
    pub params: SimTeacherParams,
    /// Estimated quality at the chosen parameters.
    pub quality: Quality,
    /// `|qwk - target_qwk| + |smd - target_smd|` at the chosen parameters.
    pub residual: f64,
}

const COARSE_STEP: f64 = 0.05;
const FINE_STEP: f64 = 0.005;

/// Grid search for `(sigma, severity)` whose Monte Carlo QWK and SMD against
/// `reference`'s gold scores are closest to the targets. Coarse grid:
/// sigma in [0, 2], severity in [-1.5, 1.5], step 0.05; then a 0.005 grid
/// around the best point. Ties prefer smaller sigma, then smaller |severity|.
/// An unreachable target returns the closest setting and its residual.
pub fn fit_sim_params(target_qwk: f64, target_smd: f64, reference: &ScoredDataset, seed: u64) -> Result<SimFit> {
    if !(target_qwk > 0.0 && target_qwk <= 1.0) {
        return Err(Error::InvalidInput(format!("target QWK {target_qwk} must be in (0, 1]")));
    }
    if !target_smd.is_finite() {
        return Err(Error::InvalidInput("target SMD must be finite".into()));
    }
    let est = QualityEstimator::new(&reference.gold_labels(), MIN_DRAWS, seed)?;
    let mut best: Option<(f64, f64, f64, Quality)> = None;
    let consider = |best: &mut Option<(f64, f64, f64, Quality)>, sigma: f64, severity: f64| {
        let Some(q) = est.estimate(sigma, severity) else { return };
        let r = (q.qwk - target_qwk).abs() + (q.smd - target_smd).abs();
        let better = match best {
            None => true,
            Some((br, bs, bv, _)) => (r, sigma, severity.abs()) < (*br, *bs, bv.abs()),
        };
        if better {
            *best = Some((r, sigma, severity, q));
        }
    };
    for i in 0..=40 {
        for j in 0..=60 {
            consider(&mut best, i as f64 * COARSE_STEP, (j as f64 - 30.0) * COARSE_STEP);
        }
    }
    let (_, cs, cv, _) = best.ok_or(Error::Degenerate("no teacher setting gives a defined QWK and SMD"))?;
    for i in 0..=20 {
        let sigma = cs + (i as f64 - 10.0) * FINE_STEP;
        if sigma < 0.0 {
            continue;
        }
        for j in 0..=20 {
            consider(&mut best, sigma, cv + (j as f64 - 10.0) * FINE_STEP);
        }
    }
    let (residual, sigma, severity, quality) = best.expect("coarse pass found a point");
    Ok(SimFit {
        params: SimTeacherParams { sigma, severity, seed },
        quality,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_fixture, FixtureConfig};
    use crate::metrics::{qwk_scores, smd_scores};

    fn fixture_train() -> ScoredDataset {
        generate_fixture(&FixtureConfig::default(), 11).unwrap().0
    }

    fn teacher_labels(data: &ScoredDataset, p: &SimTeacherParams) -> Vec<ScoreLabel> {
        data.iter().map(|r| sim_score(r.essay.gold_score, p, r.id())).collect()
    }

    #[test]
    fn noiseless_is_identity_and_clips() {
        let p = SimTeacherParams::noiseless(5);
        for g in ScoreLabel::all() {
            assert_eq!(sim_score(g, &p, "x"), g);
        }
        let harsh = SimTeacherParams::new(0.0, -1.0, 5).unwrap();
        assert_eq!(sim_score(ScoreLabel::new(1).unwrap(), &harsh, "x").get(), 1);
        assert_eq!(sim_score(ScoreLabel::new(4).unwrap(), &harsh, "x").get(), 3);
        assert!(SimTeacherParams::new(-0.1, 0.0, 0).is_err());
    }

    #[test]
    fn order_independent() {
        let data = fixture_train();
        let p = SimTeacherParams::new(0.8, -0.2, 9).unwrap();
        let forward = teacher_labels(&data, &p);
        let mut rev: Vec<_> = data.iter().rev().map(|r| sim_score(r.essay.gold_score, &p, r.id())).collect();
        rev.reverse();
        assert_eq!(forward, rev);
        let chunked: Vec<_> = data
            .records()
            .chunks(7)
            .flat_map(|c| c.iter().map(|r| sim_score(r.essay.gold_score, &p, r.id())))
            .collect();
        assert_eq!(forward, chunked);
    }

    #[test]
    fn sigma_point_seven_matches_estimate() {
        let data = fixture_train();
        let est = QualityEstimator::new(&data.gold_labels(), MIN_DRAWS, 1).unwrap();
        assert!(est.draws() >= MIN_DRAWS);
        let predicted = est.estimate(0.7, 0.0).unwrap().qwk;
        let p = SimTeacherParams::new(0.7, 0.0, 21).unwrap();
        let measured = qwk_scores(&data.gold_labels(), &teacher_labels(&data, &p)).unwrap();
        assert!((measured - predicted).abs() <= 0.03, "measured {measured} estimate {predicted}");
    }

    #[test]
    fn qwk_non_increasing_in_sigma() {
        let data = fixture_train();
        let est = QualityEstimator::new(&data.gold_labels(), MIN_DRAWS, 2).unwrap();
        let q: Vec<f64> = [0.0, 0.3, 0.7, 1.2].iter().map(|&s| est.estimate(s, 0.0).unwrap().qwk).collect();
        assert_eq!(q[0], 1.0);
        for w in q.windows(2) {
            assert!(w[1] <= w[0] + 0.01, "{q:?}");
        }
    }

    #[test]
    fn exact_target_gives_noiseless() {
        let fit = fit_sim_params(1.0, 0.0, &fixture_train(), 4).unwrap();
        assert_eq!(fit.params.sigma, 0.0);
        assert_eq!(fit.params.severity, 0.0);
        assert_eq!(fit.residual, 0.0);
    }

    #[test]
    fn fit_hits_target_on_fixture() {
        let data = fixture_train();
        let fit = fit_sim_params(0.85, 0.0, &data, 8).unwrap();
        let measured = qwk_scores(&data.gold_labels(), &teacher_labels(&data, &fit.params)).unwrap();
        assert!((0.82..=0.88).contains(&measured), "measured {measured} fit {fit:?}");
    }

    #[test]
    fn negative_smd_target_forces_negative_severity() {
        let data = fixture_train();
        let fit = fit_sim_params(0.85, -0.15, &data, 8).unwrap();
        assert!(fit.params.severity < 0.0, "{fit:?}");
        let measured = smd_scores(&data.gold_labels(), &teacher_labels(&data, &fit.params)).unwrap();
        assert!(measured < 0.0);
    }

    #[test]
    fn unreachable_target_reports_residual() {
        let fit = fit_sim_params(1.0, 0.5, &fixture_train(), 4).unwrap();
        assert!(fit.residual > 0.05);
        assert!(fit_sim_params(0.0, 0.0, &fixture_train(), 4).is_err());
    }
}
