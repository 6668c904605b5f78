use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ScoredDataset;
use crate::{Error, Result};

/// Round half away from zero, so 0.1 * 15594 = 1559.4 -> 1559 and
/// 0.2 * 15594 = 3118.8 -> 3119.
pub fn round_half_away(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// A human-scored subset `U` and the remainder of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub u: ScoredDataset,
    pub rest: ScoredDataset,
    /// Selected ids in training-set order.
    pub u_ids: Vec<String>,
}

/// Uniform random (unstratified) subset of size `round(p * |train|)`.
///
/// Both halves keep the training-set record order.
pub fn sample_subset(train: &ScoredDataset, p: f64, seed: u64) -> Result<Subset> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("subset fraction {p} must lie in (0, 1)")));
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot sample from an empty training set".into()));
    }
    let n = train.len();
    let k = round_half_away(p * n as f64).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let chosen: HashSet<usize> = order[..k].iter().copied().collect();

    let mut u = Vec::with_capacity(k);
    let mut rest = Vec::with_capacity(n - k);
    for (i, r) in train.records().iter().enumerate() {
        if chosen.contains(&i) {
            u.push(r.clone());
        } else {
            rest.push(r.clone());
        }
    }
    let u = ScoredDataset::new(u, train.split())?;
    let rest = ScoredDataset::new(rest, train.split())?;
    let u_ids = u.ids();
    Ok(Subset { u, rest, u_ids })
}
