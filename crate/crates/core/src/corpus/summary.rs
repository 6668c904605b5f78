use std::collections::BTreeMap;

use serde::Serialize;

use super::{GradeLevel, ScoreLabel, ScoredDataset, SubgroupKey};

/// Descriptive statistics of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    /// Mean whitespace word count; `None` for an empty dataset.
    pub avg_word_count: Option<f64>,
    pub grade_counts: BTreeMap<GradeLevel, usize>,
    pub grade_avg_word_count: BTreeMap<GradeLevel, Option<f64>>,
    /// Every subgroup key on every axis, `Unknown` included, so each axis
    /// sums to `total`.
    pub subgroup_counts: BTreeMap<SubgroupKey, usize>,
    /// Counts of the dataset's labels per score point.
    pub score_counts: [usize; ScoreLabel::COUNT],
}

fn mean(sum: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| sum as f64 / n as f64)
}

pub fn summarize(dataset: &ScoredDataset) -> Summary {
    let mut grade_counts: BTreeMap<GradeLevel, usize> = GradeLevel::ALL.iter().map(|&g| (g, 0)).collect();
    let mut grade_words: BTreeMap<GradeLevel, usize> = grade_counts.clone();
    let mut subgroup_counts: BTreeMap<SubgroupKey, usize> =
        SubgroupKey::all().into_iter().map(|k| (k, 0)).collect();
    let mut score_counts = [0usize; ScoreLabel::COUNT];
    let mut words = 0usize;
    for r in dataset.iter() {
        let e = &r.essay;
        words += e.word_count;
        *grade_counts.get_mut(&e.grade_level).unwrap() += 1;
        *grade_words.get_mut(&e.grade_level).unwrap() += e.word_count;
        for axis in super::Axis::ALL {
            *subgroup_counts
                .get_mut(&SubgroupKey::of(&e.demographics, axis))
                .unwrap() += 1;
        }
        score_counts[r.label.index()] += 1;
    }
    let grade_avg_word_count = grade_counts
        .iter()
        .map(|(g, &n)| (*g, mean(grade_words[g], n)))
        .collect();
    Summary {
        total: dataset.len(),
        avg_word_count: mean(words, dataset.len()),
        grade_counts,
        grade_avg_word_count,
        subgroup_counts,
        score_counts,
    }
}

/// One row of the train/test/total by grade table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeRow {
    pub grade: Option<GradeLevel>,
    pub train: usize,
    pub test: usize,
    pub total: usize,
    pub avg_word_count: Option<f64>,
}

/// Train/test descriptive table: counts by grade with average length over
/// both splits, and subgroup populations per split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub train: Summary,
    pub test: Summary,
    /// One row per grade followed by a `grade: None` total row.
    pub grade_rows: Vec<GradeRow>,
}

pub fn summarize_split(train: &ScoredDataset, test: &ScoredDataset) -> SplitSummary {
    let tr = summarize(train);
    let te = summarize(test);
    let weighted = |a: Option<f64>, na: usize, b: Option<f64>, nb: usize| {
        let n = na + nb;
        (n > 0).then(|| (a.unwrap_or(0.0) * na as f64 + b.unwrap_or(0.0) * nb as f64) / n as f64)
    };
    let mut grade_rows: Vec<GradeRow> = GradeLevel::ALL
        .iter()
        .map(|g| {
            let (a, b) = (tr.grade_counts[g], te.grade_counts[g]);
            GradeRow {
                grade: Some(*g),
                train: a,
                test: b,
                total: a + b,
                avg_word_count: weighted(tr.grade_avg_word_count[g], a, te.grade_avg_word_count[g], b),
            }
        })
        .collect();
    grade_rows.push(GradeRow {
        grade: None,
        train: tr.total,
        test: te.total,
        total: tr.total + te.total,
        avg_word_count: weighted(tr.avg_word_count, tr.total, te.avg_word_count, te.total),
    });
    SplitSummary {
        train: tr,
        test: te,
        grade_rows,
    }
}

impl SplitSummary {
    /// Render the grade table as CSV (`grade,train,test,total,avg_len`).
    pub fn grade_table_csv(&self) -> String {
        let mut s = String::from("grade,train,test,total,avg_len\n");
        for row in &self.grade_rows {
            let g = row.grade.map(|g| g.label()).unwrap_or("Total");
            let len = row
                .avg_word_count
                .map(|v| format!("{v:.1}"))
                .unwrap_or_else(|| "-".into());
            s.push_str(&format!("{g},{},{},{},{len}\n", row.train, row.test, row.total));
        }
        s
    }

    /// Render subgroup populations as CSV (`subgroup,train,test`).
    pub fn subgroup_table_csv(&self) -> String {
        let mut s = String::from("subgroup,train,test\n");
        for (k, n) in &self.train.subgroup_counts {
            s.push_str(&format!("{k},{n},{}\n", self.test.subgroup_counts[k]));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_fixture, Axis, FixtureConfig, SplitTag, TriState};

    #[test]
    fn empty_dataset_summary() {
        let s = summarize(&ScoredDataset::empty(SplitTag::Train));
        assert_eq!(s.total, 0);
        assert_eq!(s.avg_word_count, None);
        assert!(s.grade_counts.values().all(|&n| n == 0));
        assert!(s.subgroup_counts.values().all(|&n| n == 0));
    }

    #[test]
    fn counts_sum_to_total_per_axis() {
        let cfg = FixtureConfig {
            train_size: 300,
            test_size: 100,
            ..FixtureConfig::default()
        };
        let (train, test) = generate_fixture(&cfg, 11).unwrap();
        let s = summarize(&train);
        assert_eq!(s.grade_counts.values().sum::<usize>(), 300);
        assert_eq!(s.score_counts.iter().sum::<usize>(), 300);
        for axis in Axis::ALL {
            let n: usize = axis.keys().iter().map(|k| s.subgroup_counts[k]).sum();
            assert_eq!(n, 300, "{axis:?}");
        }
        let mean = train.iter().map(|r| r.essay.word_count as f64).sum::<f64>() / 300.0;
        assert!((s.avg_word_count.unwrap() - mean).abs() < 1e-9);

        let split = summarize_split(&train, &test);
        let total = split.grade_rows.last().unwrap();
        assert_eq!((total.train, total.test, total.total), (300, 100, 400));
        assert!(split.subgroup_table_csv().contains(&format!(
            "ell=Yes,{},{}",
            s.subgroup_counts[&SubgroupKey::Ell(TriState::Yes)],
            split.test.subgroup_counts[&SubgroupKey::Ell(TriState::Yes)]
        )));
    }
}
