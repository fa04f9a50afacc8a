//! CSV tables of per-sample Gaussian predictions, columns `id,mu,sigma`.
//! Used both for model outputs and for synthetic ground truth.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum PredictionsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: duplicate id {id:?}")]
    DuplicateId { path: PathBuf, id: String },
}

pub fn predictions_bytes(rows: &[PredictionRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("prediction rows serialize");
    }
    w.into_inner().expect("in-memory writer")
}

pub fn write_predictions(rows: &[PredictionRow], path: &Path) -> Result<(), PredictionsError> {
    fsutil::write_atomic(path, &predictions_bytes(rows)).map_err(|source| PredictionsError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, PredictionsError> {
    let csv_err = |source| PredictionsError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let rows: Vec<PredictionRow> = reader.deserialize().collect::<Result<_, _>>().map_err(csv_err)?;
    let mut seen = std::collections::HashSet::new();
    for r in &rows {
        if !seen.insert(r.id.as_str()) {
            return Err(PredictionsError::DuplicateId {
                path: path.to_owned(),
                id: r.id.clone(),
            });
        }
    }
    Ok(rows)
}
