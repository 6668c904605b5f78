//! Subgroup score analysis: per-subgroup SMDs, mean-score tables across
//! subset fractions, and the audit of teacher labels against the human labels
//! of the same essays.
//!
//! The audit only looks at records labelled by the teacher. Records that kept
//! their human label are identical on both sides and would only dilute the
//! difference.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::corpus::{Axis, Demographics, ScoreLabel, ScoredDataset, SubgroupKey};
use crate::metrics::smd_scores;
use crate::plot::LineChart;
use crate::{Error, Result};

/// Essay id to label.
pub type LabelMap = BTreeMap<String, ScoreLabel>;

pub fn label_map(data: &ScoredDataset) -> LabelMap {
    data.iter().map(|r| (r.id().to_string(), r.label)).collect()
}

/// SMD of `comparison` against `reference` over `members`. `None` when fewer
/// than two members or both sides are constant.
pub fn subgroup_smd<'a>(
    reference: &LabelMap,
    comparison: &LabelMap,
    members: impl IntoIterator<Item = &'a str>,
) -> Result<Option<f64>> {
    if let Some(id) = reference.keys().find(|k| !comparison.contains_key(*k)) {
        return Err(Error::InvalidInput(format!("essay `{id}` has a reference label but no comparison label")));
    }
    if let Some(id) = comparison.keys().find(|k| !reference.contains_key(*k)) {
        return Err(Error::InvalidInput(format!("essay `{id}` has a comparison label but no reference label")));
    }
    let mut r = Vec::new();
    let mut c = Vec::new();
    for id in members {
        let (Some(a), Some(b)) = (reference.get(id), comparison.get(id)) else {
            return Err(Error::InvalidInput(format!("member `{id}` is not labelled")));
        };
        r.push(*a);
        c.push(*b);
    }
    if r.len() < 2 {
        return Ok(None);
    }
    match smd_scores(&r, &c) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupRow {
    pub key: SubgroupKey,
    pub count: usize,
    /// Mean comparison label; `None` for an empty subgroup.
    pub mean: Option<f64>,
    pub smd: Option<f64>,
}

/// Per-subgroup counts, mean scores and SMDs for one pair of label sets over
/// the same essays. Every key of every axis gets a row, Unknown included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupReport {
    pub total: usize,
    pub rows: Vec<SubgroupRow>,
}

impl SubgroupReport {
    pub fn row(&self, key: SubgroupKey) -> Option<&SubgroupRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subgroup,description,count,mean_score,smd\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.key,
                csv_field(&r.key.description()),
                r.count,
                fmt_opt(r.mean, 2),
                fmt_opt(r.smd, 3)
            );
        }
        out
    }
}

/// Compare `comparison` labels against `reference` labels essay by essay.
/// Both datasets must hold the same essay ids.
pub fn subgroup_report(reference: &ScoredDataset, comparison: &ScoredDataset) -> Result<SubgroupReport> {
    let rmap = label_map(reference);
    let cmap = label_map(comparison);
    let demo: BTreeMap<&str, &Demographics> = comparison.iter().map(|r| (r.id(), &r.essay.demographics)).collect();
    let mut rows = Vec::new();
    for key in SubgroupKey::all() {
        let members: Vec<&str> = demo.iter().filter(|(_, d)| key.matches(d)).map(|(id, _)| *id).collect();
        let mean = mean_of(members.iter().map(|id| cmap[*id]));
        let smd = subgroup_smd(&rmap, &cmap, members.iter().copied())?;
        rows.push(SubgroupRow {
            key,
            count: members.len(),
            mean,
            smd,
        });
    }
    Ok(SubgroupReport {
        total: comparison.len(),
        rows,
    })
}

fn mean_of(labels: impl Iterator<Item = ScoreLabel>) -> Option<f64> {
    let (s, n) = labels.fold((0.0, 0usize), |(s, n), l| (s + l.get() as f64, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn fmt_opt(v: Option<f64>, places: usize) -> String {
    match v {
        Some(x) => format!("{x:.places$}"),
        None => "n/a".into(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn pct(p: f64) -> String {
    format!("{:.0}%", p * 100.0)
}

/// Augmented training sets of one fraction, one per replicate.
#[derive(Debug, Clone)]
pub struct FractionRuns<'a> {
    pub p: f64,
    pub runs: Vec<&'a ScoredDataset>,
}

/// Mean training-label score per subgroup at each fraction, pooled over
/// replicates, plus the all-human column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemographicTable {
    pub ps: Vec<f64>,
    pub keys: Vec<SubgroupKey>,
    /// `means[key][p]`.
    pub means: Vec<Vec<Option<f64>>>,
    pub human: Vec<Option<f64>>,
    /// Overall mean label at each fraction.
    pub overall: Vec<Option<f64>>,
    pub human_overall: Option<f64>,
}

pub fn demographic_table(by_p: &[FractionRuns<'_>], human: &ScoredDataset) -> DemographicTable {
    let keys = SubgroupKey::all();
    let pooled_mean = |sets: &[&ScoredDataset], key: Option<SubgroupKey>| {
        mean_of(
            sets.iter()
                .flat_map(|d| d.iter())
                .filter(|r| key.map_or(true, |k| k.matches(&r.essay.demographics)))
                .map(|r| r.label),
        )
    };
    let per_p: Vec<Vec<&ScoredDataset>> = by_p.iter().map(|f| f.runs.clone()).collect();
    DemographicTable {
        ps: by_p.iter().map(|f| f.p).collect(),
        means: keys
            .iter()
            .map(|&k| per_p.iter().map(|sets| pooled_mean(sets, Some(k))).collect())
            .collect(),
        human: keys.iter().map(|&k| pooled_mean(&[human], Some(k))).collect(),
        overall: per_p.iter().map(|sets| pooled_mean(sets, None)).collect(),
        human_overall: pooled_mean(&[human], None),
        keys,
    }
}

impl DemographicTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subgroup,description");
        for p in &self.ps {
            let _ = write!(out, ",{}", pct(*p));
        }
        out.push_str(",100%\n");
        for (i, key) in self.keys.iter().enumerate() {
            let _ = write!(out, "{key},{}", csv_field(&key.description()));
            for v in &self.means[i] {
                let _ = write!(out, ",{}", fmt_opt(*v, 2));
            }
            let _ = writeln!(out, ",{}", fmt_opt(self.human[i], 2));
        }
        out.push_str("all,All students");
        for v in &self.overall {
            let _ = write!(out, ",{}", fmt_opt(*v, 2));
        }
        let _ = writeln!(out, ",{}", fmt_opt(self.human_overall, 2));
        out
    }
}

/// Teacher-vs-human SMD per subgroup at each fraction. Per-replicate SMDs are
/// averaged over the replicates where they are defined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasTrajectory {
    pub ps: Vec<f64>,
    pub keys: Vec<SubgroupKey>,
    /// `smd[key][p]`.
    pub smd: Vec<Vec<Option<f64>>>,
    /// Smallest per-replicate member count, `count[key][p]`.
    pub count: Vec<Vec<usize>>,
    /// SMD over all teacher-labelled essays, per fraction.
    pub overall: Vec<Option<f64>>,
}

/// Audit one augmented set: teacher labels against the human labels of the
/// same essays, over teacher-labelled records only.
pub fn audit_one(human: &ScoredDataset, augmented: &ScoredDataset) -> Result<(SubgroupReport, Option<f64>)> {
    let synthetic = augmented.filter(|r| !r.provenance.is_human());
    let mut reference = Vec::with_capacity(synthetic.len());
    for r in synthetic.iter() {
        let h = human
            .get(r.id())
            .ok_or_else(|| Error::InvalidInput(format!("essay `{}` has no human label", r.id())))?;
        reference.push(h.clone());
    }
    let reference = ScoredDataset::new(reference, human.split())?;
    let overall = subgroup_smd(&label_map(&reference), &label_map(&synthetic), synthetic.iter().map(|r| r.id()))?;
    Ok((subgroup_report(&reference, &synthetic)?, overall))
}

pub fn bias_audit(human: &ScoredDataset, by_p: &[FractionRuns<'_>]) -> Result<BiasTrajectory> {
    let keys = SubgroupKey::all();
    let mut smd = vec![Vec::with_capacity(by_p.len()); keys.len()];
    let mut count = vec![Vec::with_capacity(by_p.len()); keys.len()];
    let mut overall = Vec::with_capacity(by_p.len());
    for f in by_p {
        let audits = f.runs.iter().map(|d| audit_one(human, d)).collect::<Result<Vec<_>>>()?;
        for (i, key) in keys.iter().enumerate() {
            let rows: Vec<&SubgroupRow> = audits.iter().map(|(rep, _)| rep.row(*key).expect("all keys")).collect();
            smd[i].push(mean_defined(rows.iter().map(|r| r.smd)));
            count[i].push(rows.iter().map(|r| r.count).min().unwrap_or(0));
        }
        overall.push(mean_defined(audits.iter().map(|(_, o)| *o)));
    }
    Ok(BiasTrajectory {
        ps: by_p.iter().map(|f| f.p).collect(),
        keys,
        smd,
        count,
        overall,
    })
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl BiasTrajectory {
    pub fn smd_of(&self, key: SubgroupKey) -> Option<&[Option<f64>]> {
        self.keys.iter().position(|k| *k == key).map(|i| self.smd[i].as_slice())
    }

    pub fn count_of(&self, key: SubgroupKey) -> Option<&[usize]> {
        self.keys.iter().position(|k| *k == key).map(|i| self.count[i].as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# teacher labels vs human labels of the same essays; human-labelled records excluded\n");
        out.push_str("subgroup,description");
        for p in &self.ps {
            let _ = write!(out, ",smd_{0},n_{0}", pct(*p));
        }
        out.push('\n');
        for (i, key) in self.keys.iter().enumerate() {
            let _ = write!(out, "{key},{}", csv_field(&key.description()));
            for (v, n) in self.smd[i].iter().zip(&self.count[i]) {
                let _ = write!(out, ",{},{n}", fmt_opt(*v, 3));
            }
            out.push('\n');
        }
        out.push_str("all,All teacher-labelled essays");
        for v in &self.overall {
            let _ = write!(out, ",{},", fmt_opt(*v, 3));
        }
        out.push('\n');
        out
    }

    /// One SMD-vs-fraction chart per demographic axis.
    pub fn charts(&self) -> Vec<(Axis, LineChart)> {
        Axis::ALL
            .iter()
            .map(|&axis| {
                let mut chart = LineChart::new(
                    &format!("Teacher vs human SMD by {}", axis.name()),
                    "% human-labelled data",
                    "SMD",
                );
                chart.reference_y = Some(0.0);
                for (i, key) in self.keys.iter().enumerate().filter(|(_, k)| k.axis() == axis) {
                    let pts = self
                        .ps
                        .iter()
                        .zip(&self.smd[i])
                        .map(|(p, v)| (p * 100.0, v.unwrap_or(f64::NAN)))
                        .collect();
                    chart = chart.with_series(&key.description(), pts);
                }
                (axis, chart)
            })
            .collect()
    }

    pub fn write_charts(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for (axis, chart) in self.charts() {
            let name = format!("bias_{}.svg", axis.name());
            chart.write(dir.as_ref().join(&name))?;
            names.push(name);
        }
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_fixture, sample_subset, FixtureConfig, Gender, LabeledRecord, Provenance, TriState};
    use crate::teacher::{sim_score, SimTeacherParams};

    fn fixture() -> ScoredDataset {
        generate_fixture(
            &FixtureConfig {
                train_size: 1500,
                test_size: 10,
                ..FixtureConfig::default()
            },
            3,
        )
        .unwrap()
        .0
    }

    fn augment(train: &ScoredDataset, p: f64, teacher: &SimTeacherParams, seed: u64) -> ScoredDataset {
        let u = sample_subset(train, p, seed).unwrap();
        let records = train
            .iter()
            .map(|r| {
                if u.u.contains(r.id()) {
                    r.clone()
                } else {
                    LabeledRecord {
                        label: sim_score(r.essay.gold_score, teacher, r.id()),
                        provenance: Provenance::Synthetic(teacher.descriptor()),
                        essay: r.essay.clone(),
                    }
                }
            })
            .collect();
        ScoredDataset::new(records, train.split()).unwrap()
    }

    #[test]
    fn identical_labels_give_zero_and_small_groups_absent() {
        let train = fixture();
        let m = label_map(&train);
        let ids: Vec<&str> = train.iter().take(50).map(|r| r.id()).collect();
        let v = subgroup_smd(&m, &m, ids.iter().copied()).unwrap();
        assert_eq!(v, Some(0.0));
        assert_eq!(subgroup_smd(&m, &m, ids[..1].iter().copied()).unwrap(), None);
        let mut short = m.clone();
        short.remove(ids[0]);
        assert!(subgroup_smd(&m, &short, ids[1..].iter().copied()).is_err());
    }

    #[test]
    fn global_severity_shows_in_every_subgroup() {
        let train = fixture();
        let harsh = SimTeacherParams::new(0.5, -0.3, 1).unwrap();
        let aug = augment(&train, 0.1, &harsh, 2);
        let (report, overall) = audit_one(&train, &aug).unwrap();
        assert!(overall.unwrap() < 0.0);
        for row in report.rows.iter().filter(|r| r.count >= 30) {
            assert!(row.smd.unwrap() < 0.0, "{row:?}");
        }
    }

    #[test]
    fn counts_partition_and_means_decompose() {
        let train = fixture();
        let report = subgroup_report(&train, &train).unwrap();
        let overall = train.iter().map(|r| r.label.get() as f64).sum::<f64>() / train.len() as f64;
        for axis in Axis::ALL {
            let rows: Vec<_> = report.rows.iter().filter(|r| r.key.axis() == axis).collect();
            assert_eq!(rows.iter().map(|r| r.count).sum::<usize>(), report.total);
            let weighted: f64 = rows.iter().filter_map(|r| r.mean.map(|m| m * r.count as f64)).sum::<f64>()
                / report.total as f64;
            assert!((weighted - overall).abs() < 1e-9);
        }
    }

    #[test]
    fn swapping_sides_flips_sign() {
        let train = fixture();
        let t = SimTeacherParams::new(0.8, -0.2, 4).unwrap();
        let aug = augment(&train, 0.2, &t, 5);
        let synth = aug.filter(|r| !r.provenance.is_human());
        let human_side = train.filter(|r| synth.contains(r.id()));
        let a = subgroup_report(&human_side, &synth).unwrap();
        let b = subgroup_report(&synth, &human_side).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            match (x.smd, y.smd) {
                (Some(u), Some(v)) => assert!((u + v).abs() < 1e-12),
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn noiseless_teacher_gives_zero_trajectory_and_flat_table() {
        let train = fixture();
        let t = SimTeacherParams::noiseless(0);
        let runs10 = vec![augment(&train, 0.1, &t, 1), augment(&train, 0.1, &t, 2)];
        let runs50 = vec![augment(&train, 0.5, &t, 3)];
        let by_p = [
            FractionRuns { p: 0.1, runs: runs10.iter().collect() },
            FractionRuns { p: 0.5, runs: runs50.iter().collect() },
        ];
        let traj = bias_audit(&train, &by_p).unwrap();
        for row in &traj.smd {
            for v in row {
                assert!(v.is_none() || *v == Some(0.0));
            }
        }
        let table = demographic_table(&by_p, &train);
        for (i, _) in table.keys.iter().enumerate() {
            for v in &table.means[i] {
                assert_eq!(v.map(|x| (x * 1e9).round()), table.human[i].map(|x| (x * 1e9).round()));
            }
        }
        assert!(table.to_csv().lines().next().unwrap().ends_with(",10%,50%,100%"));
        assert_eq!(traj.charts().len(), 5);
    }

    #[test]
    fn absent_subgroup_is_absent() {
        let train = fixture();
        let only_male = train.filter(|r| r.essay.demographics.gender == Gender::Male);
        let report = subgroup_report(&only_male, &only_male).unwrap();
        let female = report.row(SubgroupKey::Gender(Gender::Female)).unwrap();
        assert_eq!(female.count, 0);
        assert_eq!(female.mean, None);
        assert_eq!(female.smd, None);
        assert!(report.row(SubgroupKey::Ell(TriState::Unknown)).is_some());
    }
}
