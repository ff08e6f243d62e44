use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{combine, dataset_accuracy, score_command, MetricsError};
use crate::bash_ast::parse;
use crate::dataset_io::{read_jsonl, DatasetError, ReadMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub cmd: String,
    #[serde(default = "full_confidence")]
    pub confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(default)]
    pub nl: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    #[serde(default)]
    pub nl: String,
    pub cmd: String,
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("reference {line}: {message}")]
    Reference { line: usize, message: String },
    #[error("{predictions} predictions but {references} references")]
    LengthMismatch { predictions: usize, references: usize },
    #[error("record {index}: {source}")]
    Metric { index: usize, source: MetricsError },
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, DatasetError> {
    Ok(read_jsonl(path, ReadMode::Strict)?.records)
}

pub fn read_references(path: &Path) -> Result<Vec<ReferenceRecord>, DatasetError> {
    Ok(read_jsonl(path, ReadMode::Strict)?.records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub pairs: usize,
    /// Percentage in [-100, 100].
    pub accuracy: f64,
    pub finals: Vec<f64>,
}

/// Score predictions against references, joined by record index.
pub fn score_files(predictions: &[PredictionRecord], references: &[ReferenceRecord]) -> Result<ScoreReport, FileError> {
    if predictions.len() != references.len() {
        return Err(FileError::LengthMismatch {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    let mut finals = Vec::with_capacity(references.len());
    for (index, (pred, reference)) in predictions.iter().zip(references).enumerate() {
        let reference = parse(&reference.cmd).map_err(|e| FileError::Reference {
            line: index + 1,
            message: format!("does not parse: {e}"),
        })?;
        let scored: Vec<(f64, f64)> = pred
            .candidates
            .iter()
            .map(|c| (score_command(&c.cmd, &reference), c.confidence))
            .collect();
        finals.push(combine(&scored).map_err(|source| FileError::Metric { index, source })?);
    }
    let accuracy = dataset_accuracy(&finals).map_err(|source| FileError::Metric { index: 0, source })?;
    Ok(ScoreReport {
        pairs: finals.len(),
        accuracy,
        finals,
    })
}
