use super::{student_t_two_sided, TestMethod, TestResult};
use crate::{Error, Result};

/// Two-sided paired t-test on `a[i] - b[i]` with `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("paired t-test needs equal-length samples".into()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidInput("paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 || d.iter().all(|v| *v == d[0]) {
        return Err(Error::Degenerate("paired t-test: differences have zero variance"));
    }
    let t = mean / (var.sqrt() / nf.sqrt());
    let dof = n - 1;
    Ok(TestResult {
        statistic: t,
        dof: Some(dof as u32),
        p_value: student_t_two_sided(t, dof as f64),
        method: TestMethod::PairedT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples_are_degenerate() {
        let a = [0.8, 0.81, 0.79];
        assert!(matches!(paired_t_test(&a, &a), Err(Error::Degenerate(_))));
    }

    #[test]
    fn antisymmetric_differences() {
        let r = paired_t_test(&[2.0, -1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    proptest! {
        #[test]
        fn shift_and_swap(v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..12), c in -10.0f64..10.0) {
            let a: Vec<f64> = v.iter().map(|p| p.0).collect();
            let b: Vec<f64> = v.iter().map(|p| p.1).collect();
            if let Ok(base) = paired_t_test(&a, &b) {
                let a2: Vec<f64> = a.iter().map(|x| x + c).collect();
                let b2: Vec<f64> = b.iter().map(|x| x + c).collect();
                if let Ok(shifted) = paired_t_test(&a2, &b2) {
                    prop_assert!((shifted.p_value - base.p_value).abs() < 1e-6);
                }
                let swapped = paired_t_test(&b, &a).unwrap();
                prop_assert_eq!(swapped.statistic, -base.statistic);
                prop_assert_eq!(swapped.p_value, base.p_value);
            }
        }
    }
}
