//! Hashed n-gram features.
//!
//! The vector has `dim` slots. The first `dim - 2` hold hashed word unigrams,
//! word bigrams and character 3-5-grams (of each word wrapped in `<` `>`),
//! with value `1 + ln(count)`. That block is scaled to unit norm, then two
//! length features are appended (`ln(1 + words) / ln(1001)` and mean word
//! length / 10) and the whole vector is scaled to unit norm.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

pub const LENGTH_FEATURES: usize = 2;
pub const DEFAULT_DIM: usize = 32_768;

const WORD_NS: u64 = 0x77;
const BIGRAM_NS: u64 = 0x62;
const CHAR_NS: u64 = 0x63;

/// Sparse storage of a conceptually dense `dim`-vector. Indices are strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (i, x) in self.iter() {
            v[i] = x;
        }
        v
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.iter().map(|(i, x)| w[i] * x).sum()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut a, mut b, mut s) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        s
    }

    pub fn cosine(&self, other: &FeatureVector) -> f64 {
        let d = self.norm() * other.norm();
        if d == 0.0 {
            0.0
        } else {
            self.dot(other) / d
        }
    }

    /// Value of the length features (word-count feature, word-length feature).
    pub fn length_features(&self) -> [f64; LENGTH_FEATURES] {
        let start = self.dim - LENGTH_FEATURES;
        let mut out = [0.0; LENGTH_FEATURES];
        for (i, x) in self.iter() {
            if i >= start {
                out[i - start] = x;
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn from_dense(dense: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &x) in dense.iter().enumerate() {
            if x != 0.0 {
                indices.push(i as u32);
                values.push(x);
            }
        }
        FeatureVector {
            dim: dense.len(),
            indices,
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    dim: usize,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer { dim: DEFAULT_DIM }
    }
}

impl Featurizer {
    pub fn new(dim: usize) -> Self {
        assert!(dim > LENGTH_FEATURES + 1, "feature dimension {dim} too small");
        Featurizer { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slot(&self, ns: u64, bytes: &[u8]) -> u32 {
        (xxh3_64_with_seed(bytes, ns) % (self.dim - LENGTH_FEATURES) as u64) as u32
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        let tokens: Vec<String> = text.split_whitespace().map(|t| t.to_lowercase()).collect();
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        let mut bump = |slot: u32| *counts.entry(slot).or_insert(0.0) += 1.0;

        let mut wrapped = String::new();
        for (k, tok) in tokens.iter().enumerate() {
            bump(self.slot(WORD_NS, tok.as_bytes()));
            if k + 1 < tokens.len() {
                let pair = format!("{tok} {}", tokens[k + 1]);
                bump(self.slot(BIGRAM_NS, pair.as_bytes()));
            }
            wrapped.clear();
            wrapped.push('<');
            wrapped.push_str(tok);
            wrapped.push('>');
            let chars: Vec<(usize, char)> = wrapped.char_indices().collect();
            for n in 3..=5 {
                if chars.len() < n {
                    break;
                }
                for s in 0..=chars.len() - n {
                    let from = chars[s].0;
                    let to = chars.get(s + n).map(|c| c.0).unwrap_or(wrapped.len());
                    bump(self.slot(CHAR_NS, wrapped[from..to].as_bytes()));
                }
            }
        }

        let mut indices: Vec<u32> = Vec::with_capacity(counts.len() + LENGTH_FEATURES);
        let mut values: Vec<f64> = Vec::with_capacity(counts.len() + LENGTH_FEATURES);
        for (slot, c) in counts {
            indices.push(slot);
            values.push(1.0 + c.ln());
        }
        let block_norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if block_norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= block_norm);
        }

        let words = tokens.len() as f64;
        let len_feature = (1.0 + words).ln() / 1001f64.ln();
        let mean_word_len = if tokens.is_empty() {
            0.0
        } else {
            tokens.iter().map(|t| t.chars().count()).sum::<usize>() as f64 / words
        };
        let base = (self.dim - LENGTH_FEATURES) as u32;
        for (k, v) in [len_feature, mean_word_len / 10.0].into_iter().enumerate() {
            if v != 0.0 {
                indices.push(base + k as u32);
                values.push(v);
            }
        }

        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        FeatureVector {
            dim: self.dim,
            indices,
            values,
        }
    }
}
