//! Cutoff calibration for the regression student.
//!
//! Cutoffs are chosen by coordinate search to maximize dev-set QWK subject
//! to `|SMD(dev gold, dev predicted)| <= 0.05`. Among equally good cutoff
//! sets the one closest (squared distance) to even spacing wins. If no
//! candidate satisfies the constraint the search minimizes `|SMD|` instead
//! and the result is flagged infeasible.

use serde::{Deserialize, Serialize};

use super::model::{score_from_cutoffs, Mode, StudentModel, EVEN_CUTOFFS};
use crate::corpus::{ScoreLabel, ScoredDataset};
use crate::metrics::{qwk_scores, smd_scores};
use crate::{Error, Result};

pub const SMD_TOLERANCE: f64 = 0.05;
const GRID_STEP: f64 = 0.005;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSearch {
    pub cutoffs: [f64; 5],
    pub qwk: f64,
    pub smd: f64,
    /// False when no cutoffs met the SMD constraint.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    feasible: bool,
    qwk: f64,
    abs_smd: f64,
    smd: f64,
    dist: f64,
}

fn evaluate(outputs: &[f64], gold: &[ScoreLabel], cutoffs: &[f64; 5]) -> Eval {
    let pred: Vec<ScoreLabel> = outputs.iter().map(|&o| score_from_cutoffs(o, cutoffs)).collect();
    let qwk = qwk_scores(gold, &pred).unwrap_or(0.0);
    let smd = match smd_scores(gold, &pred) {
        Ok(v) => v,
        // both constant: zero gap only when they agree
        Err(_) if gold.first() == pred.first() => 0.0,
        Err(_) => f64::INFINITY,
    };
    let dist = cutoffs.iter().zip(EVEN_CUTOFFS).map(|(c, e)| (c - e) * (c - e)).sum();
    Eval {
        feasible: smd.abs() <= SMD_TOLERANCE,
        qwk,
        abs_smd: smd.abs(),
        smd,
        dist,
    }
}

const TIE: f64 = 1e-12;

fn better(a: &Eval, b: &Eval) -> bool {
    if a.feasible != b.feasible {
        return a.feasible;
    }
    if a.feasible {
        if (a.qwk - b.qwk).abs() > TIE {
            return a.qwk > b.qwk;
        }
    } else {
        if (a.abs_smd - b.abs_smd).abs() > TIE {
            return a.abs_smd < b.abs_smd;
        }
        if (a.qwk - b.qwk).abs() > TIE {
            return a.qwk > b.qwk;
        }
    }
    a.dist < b.dist - TIE
}

fn candidates(outputs: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = (1..)
        .map(|k| k as f64 * GRID_STEP)
        .take_while(|v| *v < 1.0 - GRID_STEP / 2.0)
        .collect();
    c.extend(EVEN_CUTOFFS);
    let mut sorted: Vec<f64> = outputs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    for w in sorted.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if mid > 0.0 && mid < 1.0 {
            c.push(mid);
        }
    }
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Search cutoffs for raw regressor outputs against dev gold labels.
pub fn search_cutoffs(outputs: &[f64], gold: &[ScoreLabel]) -> Result<CutoffSearch> {
    if outputs.is_empty() || outputs.len() != gold.len() {
        return Err(Error::InvalidInput("cutoff search needs matching nonempty outputs and labels".into()));
    }
    if outputs.iter().any(|o| !o.is_finite()) {
        return Err(Error::InvalidInput("regressor outputs must be finite".into()));
    }
    let constant = outputs.iter().all(|&o| o == outputs[0]);
    let cands = candidates(outputs);
    let mut cut = EVEN_CUTOFFS;
    let mut best = evaluate(outputs, gold, &cut);
    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for k in 0..5 {
            let lo = if k == 0 { 0.0 } else { cut[k - 1] };
            let hi = if k == 4 { 1.0 } else { cut[k + 1] };
            for &c in cands.iter().filter(|&&c| c > lo && c < hi) {
                let mut trial = cut;
                trial[k] = c;
                let e = evaluate(outputs, gold, &trial);
                if better(&e, &best) {
                    best = e;
                    cut = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    Ok(CutoffSearch {
        cutoffs: cut,
        qwk: best.qwk,
        smd: best.smd,
        // a constant signal cannot be calibrated meaningfully
        feasible: best.feasible && !constant,
    })
}

/// Calibrated model plus the dev-set outcome of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub model: StudentModel,
    pub search: CutoffSearch,
}

pub fn calibrate_cutoffs(model: &StudentModel, dev: &ScoredDataset) -> Result<Calibrated> {
    if model.mode != Mode::Regressor {
        return Err(Error::InvalidInput("cutoff calibration needs a regressor student".into()));
    }
    if dev.is_empty() {
        return Err(Error::InvalidInput("cutoff calibration needs a nonempty dev set".into()));
    }
    let f = model.featurizer();
    let outputs: Vec<f64> = dev
        .iter()
        .map(|r| model.regression_output(&f.featurize(&r.essay.text)))
        .collect();
    let search = search_cutoffs(&outputs, &dev.labels())?;
    let model = model.clone().with_cutoffs(search.cutoffs)?;
    Ok(Calibrated { model, search })
}
