//! Paired t-test and exact two-sample KS test on replicate scores.

use cyborg::stats::{ks_two_sample, paired_t_test};

fn main() -> cyborg::Result<()> {
    let augmented = [0.77, 0.75, 0.78, 0.76, 0.79];
    let original = [0.65, 0.70, 0.62, 0.66, 0.60];
    let t = paired_t_test(&augmented, &original)?;
    let ks = ks_two_sample(&augmented, &original)?;
    println!("paired t = {:.3}, p = {:.4}", t.statistic, t.p_value);
    println!("KS D = {:.3}, p = {:.4} ({:?})", ks.statistic, ks.p_value, ks.method);
    Ok(())
}
