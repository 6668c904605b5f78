//! Two-sample Kolmogorov-Smirnov test.
//!
//! For small samples the p-value is exact: every way of assigning the pooled
//! observations to the two groups is equally likely under the null, and the
//! p-value is the share of assignments whose statistic is at least the
//! observed one. The count is taken over monotone lattice paths through the
//! sorted pooled sample; ties are handled by only checking the ECDF gap at
//! the end of each run of equal values.

use super::{TestMethod, TestResult};
use crate::{Error, Result};

/// Largest `C(n + m, n)` for which the exact p-value is computed.
pub const EXACT_KS_LIMIT: f64 = 20_000.0;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Pooled sample sorted ascending, tagged with its group (true = first).
fn pooled(a: &[f64], b: &[f64]) -> Vec<(f64, bool)> {
    let mut v: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    v
}

/// Positions (1-based prefix lengths) at which a run of equal values ends.
fn run_ends(values: &[(f64, bool)]) -> Vec<bool> {
    let n = values.len();
    let mut ends = vec![false; n + 1];
    for k in 1..=n {
        ends[k] = k == n || values[k].0 != values[k - 1].0;
    }
    ends
}

/// Observed statistic as the integer `max |i*m - j*n|` over run ends.
fn observed_gap(values: &[(f64, bool)], ends: &[bool], n: usize, m: usize) -> u64 {
    let (mut i, mut j, mut best) = (0i64, 0i64, 0u64);
    for (k, &(_, first)) in values.iter().enumerate() {
        if first {
            i += 1;
        } else {
            j += 1;
        }
        if ends[k + 1] {
            best = best.max((i * m as i64 - j * n as i64).unsigned_abs());
        }
    }
    best
}

/// Number of lattice paths whose gap stays strictly below `gap` at every
/// run end.
fn paths_below(ends: &[bool], n: usize, m: usize, gap: u64) -> f64 {
    // dp[i] holds the count of paths reaching (i, k - i) after k steps
    let mut dp = vec![0.0f64; n + 1];
    dp[0] = 1.0;
    for k in 1..=n + m {
        let mut next = vec![0.0f64; n + 1];
        let lo = k.saturating_sub(m);
        let hi = k.min(n);
        for i in lo..=hi {
            let j = k - i;
            let mut c = 0.0;
            if i > 0 {
                c += dp[i - 1];
            }
            if j > 0 && j - 1 <= m && i <= k - 1 {
                c += dp[i];
            }
            if ends[k] && (i as i64 * m as i64 - j as i64 * n as i64).unsigned_abs() >= gap {
                c = 0.0;
            }
            next[i] = c;
        }
        dp = next;
    }
    dp[n]
}

/// Kolmogorov limiting distribution tail `Q(lambda)`.
pub fn ks_asymptotic_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let en = (n * m) as f64 / (n + m) as f64;
    let sq = en.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = sign * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `D = max |ECDF_a - ECDF_b|` over the pooled points, with an exact
/// p-value when `C(n + m, n) <= 20_000` and the asymptotic one otherwise.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("KS test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("KS test sample contains NaN".into()));
    }
    let (n, m) = (a.len(), b.len());
    let values = pooled(a, b);
    let ends = run_ends(&values);
    let gap = observed_gap(&values, &ends, n, m);
    let d = gap as f64 / (n * m) as f64;
    let total = binomial(n + m, n);
    if total <= EXACT_KS_LIMIT {
        let inside = if gap == 0 { 0.0 } else { paths_below(&ends, n, m, gap) };
        Ok(TestResult {
            statistic: d,
            dof: None,
            p_value: (total - inside) / total,
            method: TestMethod::KsExact,
        })
    } else {
        Ok(TestResult {
            statistic: d,
            dof: None,
            p_value: ks_asymptotic_pvalue(d, n, m),
            method: TestMethod::KsAsymptotic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_five_by_five() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0, 5.0], &[6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.method, TestMethod::KsExact);
        assert_eq!(r.p_value, 2.0 / 252.0);
    }

    #[test]
    fn identical_samples() {
        let a = [0.8, 0.81, 0.79, 0.8, 0.83];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn no_tie_values_for_five_by_five() {
        // D = 0.8 and D = 0.6 tails of the exact null distribution
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0, 6.0], &[5.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert!((r.statistic - 0.8).abs() < 1e-12);
        assert!((r.p_value - 20.0 / 252.0).abs() < 1e-15, "{}", r.p_value);
        assert_eq!(format!("{:.3}", r.p_value), "0.079");
    }

    #[test]
    fn large_samples_use_asymptotic() {
        let a: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..40).map(|i| i as f64 + 0.5).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.method, TestMethod::KsAsymptotic);
        assert!(r.p_value > 0.9);
    }

    #[test]
    fn empty_sample_errors() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }
}
