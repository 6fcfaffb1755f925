//! Dataset files, the synthetic generator, hold-out splits and
//! cross-validation of the nuclear-norm radius.
//!
//! File formats:
//! - responses: CSV with header `learner_id,question_id,grade`, grades in `1..=P`
//! - tags: CSV with header `question_id,tag`, one row per association
//! - quantizer: JSON `{"num_labels": P, "interior_boundaries": [...]}`
//! - matrices: CSV with header `question_id,<learner ids…>`, one row per question

mod cv;
mod protocol;
mod split;
mod synth;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::analytics::TagMatrix;
use crate::error::{Error, Result};
use crate::quantized_model::{ObservedResponses, Quantizer, Response};

pub use cv::{cross_validate_lambda, default_lambda_grid, CvMetric, CvOptions, CvReport};
pub use protocol::{
    run_holdout_protocol, LambdaChoice, ProtocolOptions, ProtocolReport, TrialOutcome,
};
pub use split::{fold_assignment, holdout_split};
pub use synth::{synthesize, SynthParams, SyntheticTruth};

pub const RESPONSES_HEADER: [&str; 3] = ["learner_id", "question_id", "grade"];
pub const TAGS_HEADER: [&str; 2] = ["question_id", "tag"];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub responses: ObservedResponses,
    pub quantizer: Quantizer,
    pub tags: Option<TagMatrix>,
    /// External id of learner `j` (column `j`).
    pub learner_ids: Vec<String>,
    /// External id of question `i` (row `i`).
    pub question_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        responses: ObservedResponses,
        quantizer: Quantizer,
        learner_ids: Vec<String>,
        question_ids: Vec<String>,
    ) -> Result<Self> {
        responses.check_labels(&quantizer)?;
        if learner_ids.len() != responses.num_learners()
            || question_ids.len() != responses.num_questions()
        {
            return Err(Error::InvalidObservations(format!(
                "{} learner ids and {} question ids for a {}x{} response matrix",
                learner_ids.len(),
                question_ids.len(),
                responses.num_questions(),
                responses.num_learners()
            )));
        }
        check_unique(&learner_ids, "learner")?;
        check_unique(&question_ids, "question")?;
        Ok(Dataset {
            responses,
            quantizer,
            tags: None,
            learner_ids,
            question_ids,
        })
    }

    pub fn with_tags(mut self, tags: TagMatrix) -> Result<Self> {
        if tags.num_questions() != self.question_ids.len() {
            return Err(Error::InvalidTags(format!(
                "tag matrix has {} rows for {} questions",
                tags.num_questions(),
                self.question_ids.len()
            )));
        }
        self.tags = Some(tags);
        Ok(self)
    }
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidObservations(format!(
                "duplicate {what} id `{id}`"
            )));
        }
    }
    Ok(())
}

/// Integer ids sort numerically, anything else lexicographically.
fn sort_ids(ids: &mut [String]) {
    if ids.iter().all(|s| s.parse::<i64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<i64>().unwrap());
    } else {
        ids.sort();
    }
}

fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect()
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                found.join(",")
            ),
        });
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads a responses CSV. Learner and question indices follow the sorted
/// order of their ids.
pub fn load_responses(path: impl AsRef<Path>, quantizer: &Quantizer) -> Result<Dataset> {
    let path = path.as_ref();
    read_responses(open(path)?, path, quantizer)
}

/// As [`load_responses`], from any reader; `path` only labels errors.
pub fn read_responses<R: Read>(reader: R, path: &Path, quantizer: &Quantizer) -> Result<Dataset> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &headers, &RESPONSES_HEADER)?;

    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 fields, found {}",
                record.len()
            )));
        }
        let (learner, question) = (record[0].to_string(), record[1].to_string());
        if learner.is_empty() || question.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        let grade: i64 = record[2]
            .parse()
            .map_err(|_| parse_err(format!("grade `{}` is not an integer", &record[2])))?;
        if grade < 1 || grade as u64 > quantizer.num_labels() as u64 {
            return Err(Error::GradeOutOfRange {
                path: path.to_path_buf(),
                line,
                grade,
                num_labels: quantizer.num_labels(),
            });
        }
        if !seen.insert((learner.clone(), question.clone())) {
            return Err(Error::DuplicateEntry {
                path: path.to_path_buf(),
                line,
                learner,
                question,
            });
        }
        raw.push((learner, question, grade as usize));
    }

    let mut learner_ids: Vec<String> = raw
        .iter()
        .map(|r| r.0.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    let mut question_ids: Vec<String> = raw
        .iter()
        .map(|r| r.1.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    sort_ids(&mut learner_ids);
    sort_ids(&mut question_ids);
    let entries = {
        let learners = index_of(&learner_ids);
        let questions = index_of(&question_ids);
        raw.iter()
            .map(|(l, q, g)| Response::new(questions[q.as_str()], learners[l.as_str()], *g))
            .collect()
    };
    let responses = ObservedResponses::new(question_ids.len(), learner_ids.len(), entries)?;
    Dataset::new(responses, quantizer.clone(), learner_ids, question_ids)
}

pub fn write_responses(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    write_responses_to(create(path)?, dataset).map_err(|e| csv_error(path, e))
}

pub fn write_responses_to<W: Write>(
    writer: W,
    dataset: &Dataset,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESPONSES_HEADER)?;
    for r in dataset.responses.entries() {
        w.write_record([
            dataset.learner_ids[r.learner].as_str(),
            dataset.question_ids[r.question].as_str(),
            &r.label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a tags CSV against the dataset's question ids. Tag columns follow
/// first appearance in the file.
pub fn load_tags(path: impl AsRef<Path>, question_ids: &[String]) -> Result<TagMatrix> {
    let path = path.as_ref();
    read_tags(open(path)?, path, question_ids)
}

pub fn read_tags<R: Read>(reader: R, path: &Path, question_ids: &[String]) -> Result<TagMatrix> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &headers, &TAGS_HEADER)?;
    let questions = index_of(question_ids);

    let mut tag_names: Vec<String> = Vec::new();
    let mut tag_index: HashMap<String, usize> = HashMap::new();
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 || record[1].is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "expected `question_id,tag`".into(),
            });
        }
        let Some(&i) = questions.get(&record[0]) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("unknown question id `{}`", &record[0]),
            });
        };
        let next = tag_names.len();
        let m = *tag_index.entry(record[1].to_string()).or_insert_with(|| {
            tag_names.push(record[1].to_string());
            next
        });
        pairs.push((i, m));
    }
    let mut matrix = DMatrix::zeros(question_ids.len(), tag_names.len());
    for (i, m) in pairs {
        matrix[(i, m)] = 1u8;
    }
    TagMatrix::new(matrix, tag_names)
}

pub fn load_quantizer(path: impl AsRef<Path>) -> Result<Quantizer> {
    let path = path.as_ref();
    serde_json::from_reader(open(path)?).map_err(|e| {
        if e.is_io() {
            Error::io(path, e.into())
        } else {
            Error::Parse {
                path: path.to_path_buf(),
                line: e.line() as u64,
                message: e.to_string(),
            }
        }
    })
}

pub fn write_quantizer(path: impl AsRef<Path>, quantizer: &Quantizer) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, quantizer).map_err(|e| Error::io(path, e.into()))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// A matrix with question ids on its rows and learner ids on its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub question_ids: Vec<String>,
    pub learner_ids: Vec<String>,
    pub values: DMatrix<f64>,
}

pub fn write_matrix(path: impl AsRef<Path>, m: &LabeledMatrix) -> Result<()> {
    let path = path.as_ref();
    write_matrix_to(create(path)?, m, "question_id").map_err(|e| csv_error(path, e))
}

/// `corner` names the row-id column in the header.
pub fn write_matrix_to<W: Write>(
    writer: W,
    m: &LabeledMatrix,
    corner: &str,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![corner.to_string()];
    header.extend(m.learner_ids.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in m.question_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(m.values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<LabeledMatrix> {
    let path = path.as_ref();
    let mut rdr = csv_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header".into(),
        });
    }
    let learner_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut question_ids = Vec::new();
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != learner_ids.len() + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!(
                    "expected {} fields, found {}",
                    learner_ids.len() + 1,
                    record.len()
                ),
            });
        }
        question_ids.push(record[0].to_string());
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{field}` is not a number"),
            })?;
            data.push(v);
        }
    }
    let values = DMatrix::from_row_slice(question_ids.len(), learner_ids.len(), &data);
    Ok(LabeledMatrix {
        question_ids,
        learner_ids,
        values,
    })
}
