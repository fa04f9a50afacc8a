//! Life-table CSV loading.
//!
//! Files carry a header row with at least the columns `Age` and `qx`
//! (matched case-insensitively; other columns are ignored). An age written
//! as `110+` is read as 110. Tables that stop before age 110 are padded with
//! `qx = 1` beyond their last age, and `qx[110]` is always 1.
//!
//! A directory is read as a set of annual tables: every `*.csv` file in it,
//! sorted by file name, is loaded and the tables are averaged age by age.

use std::fs;
use std::path::{Path, PathBuf};

use lifespan_core::actuarial::average_tables;
use lifespan_core::{LifeTable, LifeTableError};

#[derive(Debug, thiserror::Error)]
pub enum LifeTableFileError {
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
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path}:{line}: cannot parse {field:?}")]
    BadValue { path: PathBuf, line: u64, field: String },
    #[error("{path}: {source}")]
    Table {
        path: PathBuf,
        #[source]
        source: LifeTableError,
    },
    #[error("{0}: no .csv files in directory")]
    EmptyDirectory(PathBuf),
}

fn parse_age(field: &str) -> Option<usize> {
    field.trim().trim_end_matches('+').trim().parse().ok()
}

pub fn parse_life_table(path: &Path, text: &str, label: &str) -> Result<LifeTable, LifeTableFileError> {
    let csv_err = |source| LifeTableFileError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(LifeTableFileError::MissingColumn {
                path: path.to_owned(),
                column: name,
            })
    };
    let (age_col, qx_col) = (column("Age")?, column("qx")?);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |field: &str| LifeTableFileError::BadValue {
            path: path.to_owned(),
            line,
            field: field.to_owned(),
        };
        let age_field = record.get(age_col).unwrap_or("");
        let qx_field = record.get(qx_col).unwrap_or("");
        let age = parse_age(age_field).ok_or_else(|| bad(age_field))?;
        let qx: f64 = qx_field.parse().map_err(|_| bad(qx_field))?;
        rows.push((age, qx));
    }
    LifeTable::from_rows(&rows, label).map_err(|source| LifeTableFileError::Table {
        path: path.to_owned(),
        source,
    })
}

fn load_file(path: &Path) -> Result<LifeTable, LifeTableFileError> {
    let text = fs::read_to_string(path).map_err(|source| LifeTableFileError::Io {
        path: path.to_owned(),
        source,
    })?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_life_table(path, &text, &label)
}

/// Loads one CSV file, or averages every `*.csv` in a directory.
pub fn load_life_table(path: &Path) -> Result<LifeTable, LifeTableFileError> {
    let io = |source| LifeTableFileError::Io {
        path: path.to_owned(),
        source,
    };
    if !path.is_dir() {
        return load_file(path);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    files.sort();
    if files.is_empty() {
        return Err(LifeTableFileError::EmptyDirectory(path.to_owned()));
    }
    let tables = files.iter().map(|f| load_file(f)).collect::<Result<Vec<_>, _>>()?;
    let first = tables[0].label().to_owned();
    let last = tables[tables.len() - 1].label().to_owned();
    let label = if tables.len() == 1 {
        first
    } else {
        format!("average of {} tables ({first}..{last})", tables.len())
    };
    average_tables(&tables, label).map_err(|source| LifeTableFileError::Table {
        path: path.to_owned(),
        source,
    })
}
