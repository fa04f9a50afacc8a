//! JSON Lines manifests of [`SampleRecord`]s.
//!
//! One object per line with keys `id`, `image_path`, `birth_date`,
//! `photo_date`, `death_date` (fractional years) and `dataset_tag`
//! (`faces`, `whole` or `legacy`). The remaining lifespan is derived and
//! must not appear in the file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use lifespan_core::{DatasetError, DatasetTag, SampleRecord};
use serde::{Deserialize, Serialize};

use crate::fsutil;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {source}")]
    Invalid {
        path: PathBuf,
        line: usize,
        #[source]
        source: DatasetError,
    },
    #[error("{path}:{line}: duplicate id {id:?}")]
    DuplicateId { path: PathBuf, line: usize, id: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    id: String,
    image_path: String,
    birth_date: f64,
    photo_date: f64,
    death_date: f64,
    dataset_tag: DatasetTag,
}

impl From<&SampleRecord> for ManifestLine {
    fn from(r: &SampleRecord) -> Self {
        Self {
            id: r.id().to_owned(),
            image_path: r.image_path().to_owned(),
            birth_date: r.birth_date(),
            photo_date: r.photo_date(),
            death_date: r.death_date(),
            dataset_tag: r.dataset_tag(),
        }
    }
}

/// Parses JSON Lines, skipping blank lines. Returns `(line_number, value)`.
pub(crate) fn parse_json_lines<T: serde::de::DeserializeOwned>(
    path: &Path,
    text: &str,
) -> Result<Vec<(usize, T)>, ManifestError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| ManifestError::Malformed {
                    path: path.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub(crate) fn read_text(path: &Path) -> Result<String, ManifestError> {
    fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn parse_manifest(path: &Path, text: &str) -> Result<Vec<SampleRecord>, ManifestError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, m) in parse_json_lines::<ManifestLine>(path, text)? {
        if !seen.insert(m.id.clone()) {
            return Err(ManifestError::DuplicateId {
                path: path.to_owned(),
                line,
                id: m.id,
            });
        }
        let record = SampleRecord::new(
            m.id,
            m.image_path,
            m.birth_date,
            m.photo_date,
            m.death_date,
            m.dataset_tag,
        )
        .map_err(|source| ManifestError::Invalid {
            path: path.to_owned(),
            line,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SampleRecord>, ManifestError> {
    parse_manifest(path, &read_text(path)?)
}

pub fn manifest_bytes(records: &[SampleRecord]) -> Vec<u8> {
    fsutil::to_json_lines(records.iter().map(ManifestLine::from)).expect("manifest lines serialize")
}

pub fn write_manifest(records: &[SampleRecord], path: &Path) -> std::io::Result<()> {
    fsutil::write_atomic(path, &manifest_bytes(records))
}
