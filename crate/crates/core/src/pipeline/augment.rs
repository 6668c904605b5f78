use std::collections::HashSet;

use serde::Serialize;

use crate::corpus::{EssayRecord, LabeledRecord, Provenance, ScoredDataset};
use crate::teacher::{Scorer, TeacherError};
use crate::{Error, Result};

/// Human labels on the subset `U`, teacher labels on the rest of train.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    /// Records in the original train order.
    pub data: ScoredDataset,
    pub origin: Origin,
    /// Essays the teacher failed on; they are left out of `data`.
    pub failures: Vec<TeacherFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Origin {
    pub p: f64,
    pub seed: u64,
    pub teacher: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeacherFailure {
    pub essay_id: String,
    pub error: TeacherError,
}

impl AugmentedDataset {
    pub fn human_count(&self) -> usize {
        self.data.provenance_counts().0
    }

    pub fn synthetic_count(&self) -> usize {
        self.data.provenance_counts().1
    }
}

/// Label every essay of `train` outside `u` with `teacher`. Records of `u`
/// keep their labels and Human provenance.
pub fn build_augmented(train: &ScoredDataset, u: &ScoredDataset, teacher: &dyn Scorer, origin: Origin) -> Result<AugmentedDataset> {
    let in_u: HashSet<&str> = u.iter().map(|r| r.id()).collect();
    if let Some(r) = u.iter().find(|r| !train.contains(r.id())) {
        return Err(Error::InvalidInput(format!("subset essay `{}` is not in the training set", r.id())));
    }
    let rest: Vec<&EssayRecord> = train
        .iter()
        .filter(|r| !in_u.contains(r.id()))
        .map(|r| r.essay.as_ref())
        .collect();
    let outcomes = teacher.score_essays(&rest);
    if outcomes.len() != rest.len() {
        return Err(Error::InvalidInput(format!(
            "teacher returned {} outcomes for {} essays",
            outcomes.len(),
            rest.len()
        )));
    }
    let tag = teacher.descriptor();
    let mut outcomes = outcomes.into_iter();
    let mut records = Vec::with_capacity(train.len());
    let mut failures = Vec::new();
    for r in train.iter() {
        if in_u.contains(r.id()) {
            let human = u.get(r.id()).expect("member of u");
            records.push(LabeledRecord {
                essay: r.essay.clone(),
                label: human.label,
                provenance: Provenance::Human,
            });
            continue;
        }
        match outcomes.next().expect("one outcome per essay") {
            Ok(label) => records.push(LabeledRecord {
                essay: r.essay.clone(),
                label,
                provenance: Provenance::Synthetic(tag.clone()),
            }),
            Err(error) => failures.push(TeacherFailure {
                essay_id: r.id().to_string(),
                error,
            }),
        }
    }
    Ok(AugmentedDataset {
        data: ScoredDataset::new(records, train.split())?,
        origin: Origin { teacher: tag, ..origin },
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_fixture, sample_subset, FixtureConfig, ScoreLabel};
    use crate::teacher::{ParseError, SimTeacherParams};

    struct Flaky;

    impl Scorer for Flaky {
        fn descriptor(&self) -> String {
            "flaky".into()
        }

        fn score_essays(&self, essays: &[&EssayRecord]) -> Vec<Result<ScoreLabel, TeacherError>> {
            essays
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    if i % 100 == 7 && i < 300 {
                        Err(TeacherError::Parse(ParseError::OutOfRange(0, 1, 6)))
                    } else {
                        Ok(e.gold_score)
                    }
                })
                .collect()
        }
    }

    fn origin(p: f64) -> Origin {
        Origin {
            p,
            seed: 1,
            teacher: String::new(),
        }
    }

    #[test]
    fn noiseless_teacher_reproduces_gold() {
        let (train, _) = generate_fixture(&FixtureConfig::default(), 1).unwrap();
        let s = sample_subset(&train, 0.1, 1).unwrap();
        let aug = build_augmented(&train, &s.u, &SimTeacherParams::noiseless(3), origin(0.1)).unwrap();
        assert_eq!(aug.human_count(), 200);
        assert_eq!(aug.synthetic_count(), 1800);
        assert_eq!(aug.data.labels(), train.labels());
        assert_eq!(aug.data.ids(), train.ids());
        assert!(aug.failures.is_empty());
        assert!(aug.origin.teacher.starts_with("sim("));
    }

    #[test]
    fn failures_are_excluded_and_counted() {
        let (train, _) = generate_fixture(&FixtureConfig::default(), 1).unwrap();
        let s = sample_subset(&train, 0.5, 2).unwrap();
        let aug = build_augmented(&train, &s.u, &Flaky, origin(0.5)).unwrap();
        assert_eq!(aug.failures.len(), 3);
        assert_eq!(aug.data.len(), train.len() - 3);
        assert_eq!(aug.human_count(), s.u.len());
        for f in &aug.failures {
            assert!(!aug.data.contains(&f.essay_id));
        }
    }

    #[test]
    fn subset_must_come_from_train() {
        let (train, test) = generate_fixture(
            &FixtureConfig {
                train_size: 50,
                test_size: 20,
                ..FixtureConfig::default()
            },
            1,
        )
        .unwrap();
        assert!(build_augmented(&train, &test, &SimTeacherParams::noiseless(0), origin(0.1)).is_err());
    }
}
