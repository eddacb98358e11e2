//! Prediction files for evaluation.
//!
//! QA predictions are a JSON object mapping record id to answer string.
//! QG predictions are either two aligned text files (one candidate or
//! reference per line) or JSONL records `{"id","candidate","reference"}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum PredictionError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: schema error at {at}: {message}")]
    Schema { path: String, at: String, message: String },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{candidates} candidates but {references} references")]
    Misaligned { candidates: usize, references: usize },
}

fn read(path: &Path) -> Result<String, PredictionError> {
    fs::read_to_string(path).map_err(|source| PredictionError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_qa_predictions(path: &Path) -> Result<BTreeMap<String, String>, PredictionError> {
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| PredictionError::Schema {
        path: path.display().to_string(),
        at: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QgPrediction {
    pub id: String,
    pub candidate: String,
    pub reference: String,
}

fn lines(text: &str) -> Vec<String> {
    text.lines().map(str::to_owned).collect()
}

/// Reads aligned candidate and reference files.
pub fn read_qg_aligned(candidates: &Path, references: &Path) -> Result<(Vec<String>, Vec<String>), PredictionError> {
    let c = lines(&read(candidates)?);
    let r = lines(&read(references)?);
    if c.len() != r.len() {
        return Err(PredictionError::Misaligned {
            candidates: c.len(),
            references: r.len(),
        });
    }
    Ok((c, r))
}

pub fn read_qg_jsonl(path: &Path) -> Result<(Vec<String>, Vec<String>), PredictionError> {
    let records: Vec<QgPrediction> = jsonl::read_jsonl_file(path)?;
    Ok(records.into_iter().map(|p| (p.candidate, p.reference)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn misaligned_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.txt");
        let r = dir.path().join("r.txt");
        fs::write(&c, "a\nb\n").unwrap();
        fs::write(&r, "a\n").unwrap();
        assert!(matches!(
            read_qg_aligned(&c, &r),
            Err(PredictionError::Misaligned { candidates: 2, references: 1 })
        ));
    }

    #[test]
    fn qa_predictions_must_be_strings() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.json");
        fs::write(&p, r#"{"q1":"Ali","q2":3}"#).unwrap();
        match read_qa_predictions(&p) {
            Err(PredictionError::Schema { at, .. }) => assert_eq!(at, "q2"),
            other => panic!("{other:?}"),
        }
    }
}
