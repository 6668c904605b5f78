//! Significance tests across experiment replicates.

mod beta;
mod ks;
mod ttest;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use beta::{regularized_incomplete_beta, student_t_two_sided};
pub use ks::{ks_asymptotic_pvalue, ks_two_sample, EXACT_KS_LIMIT};
pub use ttest::paired_t_test;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    PairedT,
    KsExact,
    KsAsymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `t` for the paired t-test, `D` for Kolmogorov-Smirnov.
    pub statistic: f64,
    /// Degrees of freedom (t-test only).
    pub dof: Option<u32>,
    pub p_value: f64,
    pub method: TestMethod,
}

/// Mean of the replicate values alongside the raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub values: Vec<f64>,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::InvalidInput("aggregate needs at least one replicate".into()));
    }
    Ok(Aggregate {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        values: values.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_cases() {
        let a = aggregate(&[0.80, 0.81, 0.82, 0.80, 0.81]).unwrap();
        assert!((a.mean - 0.808).abs() < 1e-12);
        assert_eq!(a.values.len(), 5);
        assert_eq!(aggregate(&[0.3]).unwrap().mean, 0.3);
        assert!(aggregate(&[]).is_err());
    }
}
