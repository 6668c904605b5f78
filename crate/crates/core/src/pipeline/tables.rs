//! Report files: fraction-level QWK/SMD means, significance tests,
//! subgroup score means, label distributions, the bias audit and plots.
//! Every file is a pure function of the report, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::grid::GridReport;
use crate::bias::{bias_audit, demographic_table, FractionRuns};
use crate::corpus::{ScoreLabel, ScoredDataset};
use crate::metrics::{score_distribution, ScoreDistribution};
use crate::plot::LineChart;
use crate::stats::TestResult;
use crate::Result;

pub const SIGNIFICANCE: f64 = 0.05;

/// Names of the files written, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableFiles {
    pub files: Vec<String>,
}

fn pct(p: f64) -> String {
    format!("{:.0}%", p * 100.0)
}

fn opt3(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

/// Three decimals, wrapped in `**` when at or below 0.05; `n/a` if absent.
pub fn format_p_value(t: Option<&TestResult>) -> String {
    match t {
        None => "n/a".into(),
        Some(t) if t.p_value <= SIGNIFICANCE => format!("**{:.3}**", t.p_value),
        Some(t) => format!("{:.3}", t.p_value),
    }
}

fn runs_by_fraction(report: &GridReport) -> Vec<FractionRuns<'_>> {
    report
        .fractions
        .iter()
        .map(|f| FractionRuns {
            p: f.p,
            runs: report.cells_at(f.p).into_iter().filter_map(|c| c.augmented.as_ref()).collect(),
        })
        .collect()
}

fn qwk_smd_table(report: &GridReport) -> String {
    let mut out = String::from("human_data,qwk_orig,qwk_aug,smd_orig,smd_aug,replicates\n");
    for f in &report.fractions {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            pct(f.p),
            opt3(f.qwk_orig),
            opt3(f.qwk_aug),
            opt3(f.smd_orig),
            opt3(f.smd_aug),
            f.replicates
        );
    }
    let b = &report.baseline.eval;
    let _ = writeln!(out, "100%,{:.3},n/a,{:.3},n/a,1", b.qwk, b.smd);
    out
}

fn p_value_table(report: &GridReport) -> String {
    let mut out = String::from("human_data,qwk_t_test,qwk_ks,smd_t_test,smd_ks\n");
    for f in &report.fractions {
        let t = f.tests.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            pct(f.p),
            format_p_value(t.and_then(|t| t.qwk_t.as_ref())),
            format_p_value(t.and_then(|t| t.qwk_ks.as_ref())),
            format_p_value(t.and_then(|t| t.smd_t.as_ref())),
            format_p_value(t.and_then(|t| t.smd_ks.as_ref())),
        );
    }
    out
}

fn distribution_row(out: &mut String, name: &str, d: &ScoreDistribution) {
    let _ = write!(out, "{name}");
    for v in d.percent_rounded() {
        let _ = write!(out, ",{v}");
    }
    let _ = writeln!(out, ",{},{}", d.mean_rounded(), d.n);
}

fn distribution_table(by_p: &[FractionRuns<'_>], human: &ScoredDataset) -> Result<String> {
    let mut out = String::from("human_data");
    for s in ScoreLabel::all() {
        let _ = write!(out, ",score_{}", s.get());
    }
    out.push_str(",mean,n\n");
    let mut per_p = Vec::new();
    for f in by_p {
        let labels: Vec<ScoreLabel> = f.runs.iter().flat_map(|d| d.labels()).collect();
        if labels.is_empty() {
            let _ = writeln!(out, "{},n/a,n/a,n/a,n/a,n/a,n/a,n/a,0", pct(f.p));
            continue;
        }
        let d = score_distribution(&labels)?;
        distribution_row(&mut out, &pct(f.p), &d);
        per_p.push(d);
    }
    if !per_p.is_empty() {
        let k = per_p.len() as f64;
        let avg = ScoreDistribution {
            percent: std::array::from_fn(|i| per_p.iter().map(|d| d.percent[i]).sum::<f64>() / k),
            mean: per_p.iter().map(|d| d.mean).sum::<f64>() / k,
            n: per_p.iter().map(|d| d.n).sum(),
        };
        distribution_row(&mut out, "w/Aug. Avg.", &avg);
    }
    distribution_row(&mut out, "Original Avg.", &score_distribution(&human.labels())?);
    Ok(out)
}

fn cells_table(report: &GridReport) -> String {
    let mut out = String::from(
        "p,replicate,status,cell_seed,human,synthetic,teacher_failures,teacher,teacher_qwk,teacher_smd,qwk_orig,qwk_aug,smd_orig,smd_aug,steps_orig,steps_aug\n",
    );
    for c in &report.cells {
        match c {
            super::grid::CellOutcome::Done(r) => {
                let _ = writeln!(
                    out,
                    "{:.3},{},ok,{},{},{},{},\"{}\",{},{},{:.4},{:.4},{:.4},{:.4},{},{}",
                    r.p,
                    r.replicate,
                    r.seeds.cell,
                    r.human_count,
                    r.synthetic_count,
                    r.teacher_failures.len(),
                    r.teacher,
                    opt3(r.teacher_qwk_vs_gold),
                    opt3(r.teacher_smd_vs_gold),
                    r.orig.qwk,
                    r.aug.qwk,
                    r.orig.smd,
                    r.aug.smd,
                    r.steps_orig,
                    r.steps_aug
                );
            }
            super::grid::CellOutcome::Failed { p, replicate, error } => {
                let _ = writeln!(
                    out,
                    "{p:.3},{replicate},\"failed: {}\",,,,,,,,,,,,,",
                    error.replace('"', "'")
                );
            }
        }
    }
    out
}

fn metric_chart(report: &GridReport, title: &str, label: &str, pick: impl Fn(&super::grid::FractionSummary) -> (Option<f64>, Option<f64>), baseline: f64) -> LineChart {
    let mut orig = Vec::new();
    let mut aug = Vec::new();
    for f in &report.fractions {
        let (o, a) = pick(f);
        orig.push((f.p * 100.0, o.unwrap_or(f64::NAN)));
        aug.push((f.p * 100.0, a.unwrap_or(f64::NAN)));
    }
    let mut chart = LineChart::new(title, "% human-labelled data", label)
        .with_series("Original", orig)
        .with_series("W/Aug.", aug);
    chart.reference_y = Some(baseline);
    chart
}

/// Write all report tables and plots into `dir`, creating it if needed.
pub fn emit_tables(report: &GridReport, human_train: &ScoredDataset, dir: impl AsRef<Path>) -> Result<TableFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let by_p = runs_by_fraction(report);
    let mut files = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        std::fs::write(dir.join(name), body)?;
        files.push(name.to_string());
        Ok(())
    };
    put("qwk_smd_by_fraction.csv", qwk_smd_table(report))?;
    put("p_values.csv", p_value_table(report))?;
    put("subgroup_means.csv", demographic_table(&by_p, human_train).to_csv())?;
    put("label_distribution.csv", distribution_table(&by_p, human_train)?)?;
    put("cells.csv", cells_table(report))?;
    let trajectory = bias_audit(human_train, &by_p)?;
    put("bias_smd.csv", trajectory.to_csv())?;
    let b = &report.baseline.eval;
    put(
        "qwk_vs_fraction.svg",
        metric_chart(report, "Student QWK on the test set", "QWK", |f| (f.qwk_orig, f.qwk_aug), b.qwk).to_svg(),
    )?;
    put(
        "smd_vs_fraction.svg",
        metric_chart(report, "Student SMD on the test set", "SMD", |f| (f.smd_orig, f.smd_aug), b.smd).to_svg(),
    )?;
    for (axis, chart) in trajectory.charts() {
        put(&format!("bias_{}.svg", axis.name()), chart.to_svg())?;
    }
    Ok(TableFiles { files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::TestMethod;

    fn t(p: f64) -> TestResult {
        TestResult {
            statistic: 1.0,
            dof: None,
            p_value: p,
            method: TestMethod::KsExact,
        }
    }

    #[test]
    fn bold_exactly_at_or_below_threshold() {
        assert_eq!(format_p_value(Some(&t(0.0079365))), "**0.008**");
        assert_eq!(format_p_value(Some(&t(0.05))), "**0.050**");
        assert_eq!(format_p_value(Some(&t(0.0500001))), "0.050");
        assert_eq!(format_p_value(Some(&t(0.357))), "0.357");
        assert_eq!(format_p_value(None), "n/a");
    }
}
