//! Essay records, scored datasets and everything that produces them.

mod fixture;
mod io;
mod sample;
mod subgroup;
mod summary;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use fixture::{generate_fixture, FixtureConfig, GroupOffset, Proportions};
pub use io::{load_csv, load_csv_split, write_csv, ColumnMap};
pub use sample::{sample_subset, round_half_away, Subset};
pub use subgroup::{Axis, SubgroupKey};
pub use summary::{summarize, summarize_split, GradeRow, SplitSummary, Summary};

/// A holistic score point on the 1..=6 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ScoreLabel(u8);

impl ScoreLabel {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 6;
    pub const COUNT: usize = 6;

    pub fn new(value: i64) -> Result<Self> {
        if (Self::MIN as i64..=Self::MAX as i64).contains(&value) {
            Ok(ScoreLabel(value as u8))
        } else {
            Err(Error::ScoreRange(value, Self::MIN, Self::MAX))
        }
    }

    /// Round and clip a real-valued score onto the scale.
    pub fn clip_round(x: f64) -> Self {
        let r = x.round().clamp(Self::MIN as f64, Self::MAX as f64);
        ScoreLabel(r as u8)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based class index.
    pub fn index(self) -> usize {
        (self.0 - Self::MIN) as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < Self::COUNT, "class index {i} out of range");
        ScoreLabel(i as u8 + Self::MIN)
    }

    pub fn all() -> impl Iterator<Item = ScoreLabel> {
        (Self::MIN..=Self::MAX).map(ScoreLabel)
    }
}

impl TryFrom<u8> for ScoreLabel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        ScoreLabel::new(v as i64)
    }
}

impl From<ScoreLabel> for u8 {
    fn from(s: ScoreLabel) -> u8 {
        s.0
    }
}

impl fmt::Display for ScoreLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Race {
    WC,
    HL,
    BA,
    AP,
    TW,
    NT,
    Unknown,
}

impl Race {
    pub const ALL: [Race; 7] = [
        Race::WC,
        Race::HL,
        Race::BA,
        Race::AP,
        Race::TW,
        Race::NT,
        Race::Unknown,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Race::WC => "WC",
            Race::HL => "HL",
            Race::BA => "BA",
            Race::AP => "AP",
            Race::TW => "TW",
            Race::NT => "NT",
            Race::Unknown => "Unknown",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Race::WC => "White/Caucasian",
            Race::HL => "Hispanic/Latino",
            Race::BA => "Black/African American",
            Race::AP => "Asian/Pacific Islander",
            Race::TW => "Two or more races/Other",
            Race::NT => "American Indian/Alaskan Native",
            Race::Unknown => "Unknown",
        }
    }

    /// Lenient parse accepting both the short codes and the long labels
    /// used in the source corpus. Anything unrecognised is `Unknown`.
    pub fn parse_lenient(s: &str) -> Race {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "wc" | "white" | "white/caucasian" | "caucasian" => Race::WC,
            "hl" | "hispanic/latino" | "hispanic" | "latino" => Race::HL,
            "ba" | "black/african american" | "black" | "african american" => Race::BA,
            "ap" | "asian/pacific islander" | "asian" => Race::AP,
            "tw" | "two or more races/other" | "two or more" | "two or more races" | "other" => {
                Race::TW
            }
            "nt" | "american indian/alaskan native" | "american indian" | "alaskan native" => {
                Race::NT
            }
            _ => Race::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Unknown];

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
            Gender::Unknown => "Unknown",
        }
    }

    pub fn parse_lenient(s: &str) -> Gender {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Gender::Male,
            "f" | "female" => Gender::Female,
            _ => Gender::Unknown,
        }
    }
}

/// Yes / No / Unknown flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TriState {
    Yes,
    No,
    Unknown,
}

impl TriState {
    pub const ALL: [TriState; 3] = [TriState::Yes, TriState::No, TriState::Unknown];

    pub fn label(self) -> &'static str {
        match self {
            TriState::Yes => "Yes",
            TriState::No => "No",
            TriState::Unknown => "Unknown",
        }
    }

    /// Accepts canonical `Yes`/`No` plus the descriptive phrases the source
    /// corpus uses ("Not identified as having disability", "Economically
    /// disadvantaged", ...).
    pub fn parse_lenient(s: &str) -> TriState {
        let t = s.trim().to_ascii_lowercase();
        if t.is_empty() || t == "unknown" || t == "na" || t == "n/a" {
            return TriState::Unknown;
        }
        if t == "no" || t == "n" || t == "false" || t == "0" || t.starts_with("not ") {
            return TriState::No;
        }
        if t == "yes"
            || t == "y"
            || t == "true"
            || t == "1"
            || t.starts_with("identified")
            || t.starts_with("economically disadvantaged")
        {
            return TriState::Yes;
        }
        TriState::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demographics {
    pub race: Race,
    pub gender: Gender,
    pub ell: TriState,
    pub disability: TriState,
    pub econ_disadvantage: TriState,
}

impl Default for Demographics {
    fn default() -> Self {
        Demographics {
            race: Race::Unknown,
            gender: Gender::Unknown,
            ell: TriState::Unknown,
            disability: TriState::Unknown,
            econ_disadvantage: TriState::Unknown,
        }
    }
}

/// Grade levels present in the corpus; anything else is `Unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GradeLevel {
    G6,
    G8,
    G9,
    G10,
    G11,
    G12,
    Unknown,
}

impl GradeLevel {
    pub const ALL: [GradeLevel; 7] = [
        GradeLevel::G6,
        GradeLevel::G8,
        GradeLevel::G9,
        GradeLevel::G10,
        GradeLevel::G11,
        GradeLevel::G12,
        GradeLevel::Unknown,
    ];

    pub fn label(self) -> &'static str {
        match self {
            GradeLevel::G6 => "6",
            GradeLevel::G8 => "8",
            GradeLevel::G9 => "9",
            GradeLevel::G10 => "10",
            GradeLevel::G11 => "11",
            GradeLevel::G12 => "12",
            GradeLevel::Unknown => "Unknown",
        }
    }

    pub fn parse_lenient(s: &str) -> GradeLevel {
        let t = s.trim();
        // tolerate "8.0" style floats from spreadsheet exports
        let n = t.parse::<f64>().ok().filter(|v| v.fract() == 0.0).map(|v| v as i64);
        match n {
            Some(6) => GradeLevel::G6,
            Some(8) => GradeLevel::G8,
            Some(9) => GradeLevel::G9,
            Some(10) => GradeLevel::G10,
            Some(11) => GradeLevel::G11,
            Some(12) => GradeLevel::G12,
            _ => GradeLevel::Unknown,
        }
    }
}

/// Whitespace token count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssayRecord {
    pub essay_id: String,
    pub text: String,
    pub word_count: usize,
    pub grade_level: GradeLevel,
    pub prompt_name: String,
    pub gold_score: ScoreLabel,
    pub demographics: Demographics,
}

impl EssayRecord {
    pub fn new(
        essay_id: impl Into<String>,
        text: impl Into<String>,
        grade_level: GradeLevel,
        prompt_name: impl Into<String>,
        gold_score: ScoreLabel,
        demographics: Demographics,
    ) -> Self {
        let text = text.into();
        EssayRecord {
            essay_id: essay_id.into(),
            word_count: word_count(&text),
            text,
            grade_level,
            prompt_name: prompt_name.into(),
            gold_score,
            demographics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Human,
    Synthetic(String),
}

impl Provenance {
    pub fn is_human(&self) -> bool {
        matches!(self, Provenance::Human)
    }

    pub fn teacher_tag(&self) -> Option<&str> {
        match self {
            Provenance::Human => None,
            Provenance::Synthetic(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Test,
    Other,
}

impl FromStr for SplitTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(SplitTag::Train),
            "test" | "testing" => Ok(SplitTag::Test),
            "other" | "" => Ok(SplitTag::Other),
            other => Err(Error::InvalidInput(format!("unknown split tag `{other}`"))),
        }
    }
}

/// One essay plus the label a dataset assigns it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub essay: Arc<EssayRecord>,
    pub label: ScoreLabel,
    pub provenance: Provenance,
}

impl LabeledRecord {
    pub fn human(essay: Arc<EssayRecord>) -> Self {
        LabeledRecord {
            label: essay.gold_score,
            essay,
            provenance: Provenance::Human,
        }
    }

    pub fn id(&self) -> &str {
        &self.essay.essay_id
    }
}

/// Ordered essay collection with per-record label provenance.
///
/// Essays are reference counted so that the many augmented datasets built
/// during a grid share one copy of the essay text.
#[derive(Debug, Clone)]
pub struct ScoredDataset {
    records: Vec<LabeledRecord>,
    split: SplitTag,
    index: HashMap<String, usize>,
}

impl PartialEq for ScoredDataset {
    fn eq(&self, other: &Self) -> bool {
        self.split == other.split && self.records == other.records
    }
}

impl ScoredDataset {
    pub fn new(records: Vec<LabeledRecord>, split: SplitTag) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.essay.essay_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.essay.essay_id.clone()));
            }
        }
        Ok(ScoredDataset {
            records,
            split,
            index,
        })
    }

    /// Dataset with every record labelled by its gold score.
    pub fn from_gold(essays: Vec<EssayRecord>, split: SplitTag) -> Result<Self> {
        let records = essays
            .into_iter()
            .map(|e| LabeledRecord::human(Arc::new(e)))
            .collect();
        Self::new(records, split)
    }

    pub fn empty(split: SplitTag) -> Self {
        ScoredDataset {
            records: Vec::new(),
            split,
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn records(&self) -> &[LabeledRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledRecord> {
        self.records.iter()
    }

    pub fn get(&self, essay_id: &str) -> Option<&LabeledRecord> {
        self.index.get(essay_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, essay_id: &str) -> bool {
        self.index.contains_key(essay_id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.essay.essay_id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<ScoreLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn gold_labels(&self) -> Vec<ScoreLabel> {
        self.records.iter().map(|r| r.essay.gold_score).collect()
    }

    /// (human, synthetic) record counts.
    pub fn provenance_counts(&self) -> (usize, usize) {
        let human = self.records.iter().filter(|r| r.provenance.is_human()).count();
        (human, self.records.len() - human)
    }

    /// Keep the records matching `keep`, preserving order.
    pub fn filter(&self, keep: impl Fn(&LabeledRecord) -> bool) -> ScoredDataset {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        ScoredDataset::new(records, self.split).expect("subset of a valid dataset")
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    pub fn into_records(self) -> Vec<LabeledRecord> {
        self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_label_bounds() {
        assert!(ScoreLabel::new(0).is_err());
        assert!(ScoreLabel::new(7).is_err());
        assert_eq!(ScoreLabel::new(6).unwrap().get(), 6);
        assert_eq!(ScoreLabel::clip_round(-3.2).get(), 1);
        assert_eq!(ScoreLabel::clip_round(2.5).get(), 3);
        assert_eq!(ScoreLabel::clip_round(9.0).get(), 6);
        assert_eq!(ScoreLabel::from_index(0).get(), 1);
    }

    #[test]
    fn lenient_demographic_parsing() {
        assert_eq!(Race::parse_lenient("Hispanic/Latino"), Race::HL);
        assert_eq!(Race::parse_lenient("NT"), Race::NT);
        assert_eq!(Race::parse_lenient(""), Race::Unknown);
        assert_eq!(Gender::parse_lenient("F"), Gender::Female);
        assert_eq!(
            TriState::parse_lenient("Not identified as having disability"),
            TriState::No
        );
        assert_eq!(
            TriState::parse_lenient("Identified as having disability"),
            TriState::Yes
        );
        assert_eq!(
            TriState::parse_lenient("Economically disadvantaged"),
            TriState::Yes
        );
        assert_eq!(TriState::parse_lenient("Yes"), TriState::Yes);
        assert_eq!(GradeLevel::parse_lenient("8.0"), GradeLevel::G8);
        assert_eq!(GradeLevel::parse_lenient("7"), GradeLevel::Unknown);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = EssayRecord::new(
            "a",
            "x y",
            GradeLevel::G8,
            "p",
            ScoreLabel::new(3).unwrap(),
            Demographics::default(),
        );
        let err = ScoredDataset::from_gold(vec![e.clone(), e], SplitTag::Train).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "a"));
    }
}
