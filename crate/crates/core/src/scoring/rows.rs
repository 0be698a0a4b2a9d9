//! Score CSV: header `clip_path,score,decision,error`.
//!
//! A successfully scored clip has an empty `error`; a clip that could not be
//! read or featurized has empty `score`/`decision` and the error message.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Decision;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub clip_path: String,
    pub score: Option<f64>,
    pub decision: Option<Decision>,
    pub error: Option<String>,
}

impl ScoreRow {
    pub fn scored(clip_path: impl Into<String>, score: f64, decision: Decision) -> Self {
        ScoreRow {
            clip_path: clip_path.into(),
            score: Some(score),
            decision: Some(decision),
            error: None,
        }
    }

    pub fn failed(clip_path: impl Into<String>, error: impl Into<String>) -> Self {
        ScoreRow {
            clip_path: clip_path.into(),
            score: None,
            decision: None,
            error: Some(error.into()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

pub fn write_score_rows(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["clip_path", "score", "decision", "error"])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Manifest(format!("score csv buffer: {e}")))?;
    write_atomic(path.as_ref(), &bytes)
}

pub fn read_score_rows(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
