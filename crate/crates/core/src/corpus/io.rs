//! CSV ingestion and persistence.
//!
//! Row numbers in errors count data rows from 1 (the header is row 0).

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    Demographics, EssayRecord, Gender, GradeLevel, LabeledRecord, Provenance, Race, ScoreLabel,
    ScoredDataset, SplitTag, TriState,
};
use crate::{Error, Result};

/// Header names for each logical column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub essay_id: String,
    pub text: String,
    pub score: String,
    pub grade_level: String,
    pub prompt_name: String,
    pub race: String,
    pub gender: String,
    pub ell: String,
    pub disability: String,
    pub econ: String,
    pub split: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            essay_id: "essay_id".into(),
            text: "full_text".into(),
            score: "holistic_essay_score".into(),
            grade_level: "grade_level".into(),
            prompt_name: "prompt_name".into(),
            race: "race_ethnicity".into(),
            gender: "gender".into(),
            ell: "ell_status_label".into(),
            disability: "student_disability_status".into(),
            econ: "economically_disadvantaged".into(),
            split: "split".into(),
        }
    }
}

const LABEL_COL: &str = "label";
const PROVENANCE_COL: &str = "provenance";
const TEACHER_COL: &str = "teacher_tag";

impl ColumnMap {
    /// Apply a `key=header` override, e.g. `text=essay_text`.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("column mapping `{assignment}` is not key=header")))?;
        let value = value.trim().to_string();
        let slot = match key.trim() {
            "essay_id" | "id" => &mut self.essay_id,
            "text" | "full_text" => &mut self.text,
            "score" => &mut self.score,
            "grade_level" | "grade" => &mut self.grade_level,
            "prompt_name" | "prompt" => &mut self.prompt_name,
            "race" => &mut self.race,
            "gender" => &mut self.gender,
            "ell" => &mut self.ell,
            "disability" => &mut self.disability,
            "econ" => &mut self.econ,
            "split" => &mut self.split,
            other => return Err(Error::Config(format!("unknown column key `{other}`"))),
        };
        *slot = value;
        Ok(())
    }
}

struct Columns {
    id: usize,
    text: usize,
    score: usize,
    grade: Option<usize>,
    prompt: Option<usize>,
    race: Option<usize>,
    gender: Option<usize>,
    ell: Option<usize>,
    disability: Option<usize>,
    econ: Option<usize>,
    split: Option<usize>,
    label: Option<usize>,
    provenance: Option<usize>,
    teacher: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self> {
        let lookup: HashMap<&str, usize> =
            headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let find = |name: &str| lookup.get(name).copied();
        let require = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
        Ok(Columns {
            id: require(&map.essay_id)?,
            text: require(&map.text)?,
            score: require(&map.score)?,
            grade: find(&map.grade_level),
            prompt: find(&map.prompt_name),
            race: find(&map.race),
            gender: find(&map.gender),
            ell: find(&map.ell),
            disability: find(&map.disability),
            econ: find(&map.econ),
            split: find(&map.split),
            label: find(LABEL_COL),
            provenance: find(PROVENANCE_COL),
            teacher: find(TEACHER_COL),
        })
    }
}

fn parse_score(raw: &str, row: usize, column: &str) -> Result<ScoreLabel> {
    let t = raw.trim();
    let value = t
        .parse::<i64>()
        .ok()
        .or_else(|| t.parse::<f64>().ok().filter(|v| v.fract() == 0.0).map(|v| v as i64))
        .ok_or_else(|| Error::Row {
            row,
            message: format!("column `{column}`: `{t}` is not an integer score"),
        })?;
    ScoreLabel::new(value).map_err(|e| Error::Row {
        row,
        message: format!("column `{column}`: {e}"),
    })
}

struct ParsedRow {
    record: LabeledRecord,
    split: Option<SplitTag>,
}

fn parse_row(rec: &csv::StringRecord, cols: &Columns, map: &ColumnMap, row: usize) -> Result<ParsedRow> {
    let field = |i: Option<usize>| i.and_then(|i| rec.get(i)).unwrap_or("");
    let id = field(Some(cols.id)).trim().to_string();
    if id.is_empty() {
        return Err(Error::Row {
            row,
            message: "empty essay id".into(),
        });
    }
    let gold = parse_score(field(Some(cols.score)), row, &map.score)?;
    let demographics = Demographics {
        race: Race::parse_lenient(field(cols.race)),
        gender: Gender::parse_lenient(field(cols.gender)),
        ell: TriState::parse_lenient(field(cols.ell)),
        disability: TriState::parse_lenient(field(cols.disability)),
        econ_disadvantage: TriState::parse_lenient(field(cols.econ)),
    };
    let essay = EssayRecord::new(
        id,
        field(Some(cols.text)),
        GradeLevel::parse_lenient(field(cols.grade)),
        field(cols.prompt),
        gold,
        demographics,
    );
    let label = match cols.label.map(|i| rec.get(i).unwrap_or("").trim()) {
        Some(raw) if !raw.is_empty() => parse_score(raw, row, LABEL_COL)?,
        _ => gold,
    };
    let provenance = match cols.provenance.map(|i| rec.get(i).unwrap_or("").trim()) {
        Some("Synthetic") | Some("synthetic") => Provenance::Synthetic(field(cols.teacher).to_string()),
        Some("") | Some("Human") | Some("human") | None => Provenance::Human,
        Some(other) => {
            return Err(Error::Row {
                row,
                message: format!("unknown provenance `{other}`"),
            })
        }
    };
    let split = match cols.split {
        Some(i) => Some(rec.get(i).unwrap_or("").parse::<SplitTag>().map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?),
        None => None,
    };
    Ok(ParsedRow {
        record: LabeledRecord {
            essay: Arc::new(essay),
            label,
            provenance,
        },
        split,
    })
}

fn read_rows<R: Read>(reader: R, map: &ColumnMap) -> Result<Vec<ParsedRow>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::resolve(&headers, map)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        rows.push(parse_row(&rec, &cols, map, row)?);
    }
    Ok(rows)
}

/// Load one dataset. The split tag comes from the split column when every
/// row agrees on it, otherwise it is `Other`.
pub fn load_csv(path: impl AsRef<Path>, map: &ColumnMap) -> Result<ScoredDataset> {
    let rows = read_rows(File::open(path)?, map)?;
    let first = rows.first().and_then(|r| r.split);
    let split = match first {
        Some(tag) if rows.iter().all(|r| r.split == Some(tag)) => tag,
        _ => SplitTag::Other,
    };
    ScoredDataset::new(rows.into_iter().map(|r| r.record).collect(), split)
}

/// Load a single file holding both splits, partitioned on the split column.
pub fn load_csv_split(path: impl AsRef<Path>, map: &ColumnMap) -> Result<(ScoredDataset, ScoredDataset)> {
    let rows = read_rows(File::open(path)?, map)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, r) in rows.into_iter().enumerate() {
        match r.split {
            None => return Err(Error::MissingColumn(map.split.clone())),
            Some(SplitTag::Train) => train.push(r.record),
            Some(SplitTag::Test) => test.push(r.record),
            Some(SplitTag::Other) => {
                return Err(Error::Row {
                    row: i + 1,
                    message: "split must be train or test".into(),
                })
            }
        }
    }
    // essay ids must be unique across the whole file
    let mut seen = std::collections::HashSet::new();
    for r in train.iter().chain(&test) {
        if !seen.insert(r.essay.essay_id.as_str()) {
            return Err(Error::DuplicateId(r.essay.essay_id.clone()));
        }
    }
    Ok((
        ScoredDataset::new(train, SplitTag::Train)?,
        ScoredDataset::new(test, SplitTag::Test)?,
    ))
}

fn split_label(s: SplitTag) -> &'static str {
    match s {
        SplitTag::Train => "train",
        SplitTag::Test => "test",
        SplitTag::Other => "other",
    }
}

/// Write a dataset with the default source headers plus `label`,
/// `provenance`, `teacher_tag` and `split`.
pub fn write_csv<W: Write>(dataset: &ScoredDataset, out: W) -> Result<()> {
    let map = ColumnMap::default();
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record([
        map.essay_id.as_str(),
        &map.text,
        &map.score,
        &map.grade_level,
        &map.prompt_name,
        &map.race,
        &map.gender,
        &map.ell,
        &map.disability,
        &map.econ,
        LABEL_COL,
        PROVENANCE_COL,
        TEACHER_COL,
        &map.split,
    ])?;
    for r in dataset.iter() {
        let e = &r.essay;
        let d = &e.demographics;
        let gold = e.gold_score.to_string();
        let label = r.label.to_string();
        let (prov, tag) = match &r.provenance {
            Provenance::Human => ("Human", ""),
            Provenance::Synthetic(t) => ("Synthetic", t.as_str()),
        };
        w.write_record([
            e.essay_id.as_str(),
            &e.text,
            &gold,
            e.grade_level.label(),
            &e.prompt_name,
            d.race.code(),
            d.gender.label(),
            d.ell.label(),
            d.disability.label(),
            d.econ_disadvantage.label(),
            &label,
            prov,
            tag,
            split_label(dataset.split()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "essay_id,full_text,holistic_essay_score,grade_level,prompt_name,race_ethnicity,gender,ell_status_label,student_disability_status,economically_disadvantaged\n";

    #[test]
    fn header_only_is_empty() {
        let f = write_tmp(HEADER);
        let ds = load_csv(f.path(), &ColumnMap::default()).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn out_of_range_score_names_row() {
        let f = write_tmp(&format!("{HEADER}a,hello world,3,8,p,WC,M,No,No,No\nb,bye,7,8,p,WC,M,No,No,No\n"));
        match load_csv(f.path(), &ColumnMap::default()) {
            Err(Error::Row { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("outside"), "{message}");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let f = write_tmp("essay_id,full_text\na,b\n");
        match load_csv(f.path(), &ColumnMap::default()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "holistic_essay_score"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let f = write_tmp(&format!("{HEADER}a,x,3,8,p,WC,M,No,No,No\na,y,4,8,p,WC,M,No,No,No\n"));
        assert!(matches!(
            load_csv(f.path(), &ColumnMap::default()),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn unmapped_demographics_are_unknown_and_remap_works() {
        let f = write_tmp("ID,essay,score\nq1,\"one, two three\",5\n");
        let mut map = ColumnMap::default();
        map.set("essay_id=ID").unwrap();
        map.set("text=essay").unwrap();
        map.set("score=score").unwrap();
        let ds = load_csv(f.path(), &map).unwrap();
        let r = &ds.records()[0];
        assert_eq!(r.essay.word_count, 3);
        assert_eq!(r.essay.demographics, Demographics::default());
        assert_eq!(r.essay.grade_level, GradeLevel::Unknown);
        assert_eq!(r.provenance, Provenance::Human);
        assert_eq!(r.label.get(), 5);
        assert!(map.set("bogus=x").is_err());
    }

    #[test]
    fn split_file_partitions() {
        let f = write_tmp(&format!(
            "{}a,x,3,8,p,WC,M,No,No,No,train\nb,y,4,8,p,WC,M,No,No,No,test\nc,z,2,6,p,HL,F,Yes,No,No,train\n",
            HEADER.trim_end().to_string() + ",split\n"
        ));
        let (train, test) = load_csv_split(f.path(), &ColumnMap::default()).unwrap();
        assert_eq!(train.ids(), vec!["a", "c"]);
        assert_eq!(test.ids(), vec!["b"]);
        assert_eq!(train.split(), SplitTag::Train);
    }
}
