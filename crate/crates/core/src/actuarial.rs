//! Period life tables and the chronological-age baseline.
//!
//! A [`LifeTable`] holds one-year death probabilities `q[x]` for integer ages
//! `0..=110`. Age 110 is a hard cutoff: `q[110]` is always 1, whatever the
//! source says, so nobody survives past 111.
//!
//! Expected remaining lifespan uses the complete expectation with mid-year
//! deaths:
//!
//! ```text
//! e(x) = Σ_{k>=1} Π_{j=0}^{k-1} (1 - q[floor(x) + j])  +  0.5
//! ```

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::SampleRecord;
use crate::math;

pub const MAX_AGE: usize = 110;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LifeTableError {
    #[error("life table has no rows")]
    Empty,
    #[error("duplicate age {0}")]
    DuplicateAge(usize),
    #[error("missing age {0}")]
    MissingAge(usize),
    #[error("qx at age {age} is {qx}, outside [0, 1]")]
    QxOutOfRange { age: usize, qx: f64 },
    #[error("tables cover different age ranges (0..={0} vs 0..={1})")]
    MismatchedRanges(usize, usize),
    #[error("age must be finite and non-negative, got {0}")]
    NegativeAge(f64),
    #[error("no records")]
    NoRecords,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LifeTable {
    qx: Vec<f64>,
    label: String,
    source_max_age: usize,
}

impl LifeTable {
    /// Builds a table from `qx` for ages `0, 1, ..`. Ages past the last given
    /// one are padded with `q = 1`; entries past 110 are dropped.
    pub fn new(qx: Vec<f64>, label: impl Into<String>) -> Result<Self, LifeTableError> {
        if qx.is_empty() {
            return Err(LifeTableError::Empty);
        }
        for (age, &q) in qx.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(LifeTableError::QxOutOfRange { age, qx: q });
            }
        }
        let source_max_age = (qx.len() - 1).min(MAX_AGE);
        let mut full = qx;
        full.truncate(MAX_AGE + 1);
        full.resize(MAX_AGE + 1, 1.0);
        full[MAX_AGE] = 1.0;
        Ok(Self {
            qx: full,
            label: label.into(),
            source_max_age,
        })
    }

    /// Builds a table from unordered `(age, qx)` rows. Ages must start at 0
    /// with no gaps or duplicates; rows above 110 are ignored.
    pub fn from_rows(rows: &[(usize, f64)], label: impl Into<String>) -> Result<Self, LifeTableError> {
        let kept: Vec<(usize, f64)> = rows.iter().copied().filter(|&(a, _)| a <= MAX_AGE).collect();
        if kept.is_empty() {
            return Err(LifeTableError::Empty);
        }
        let top = kept.iter().map(|&(a, _)| a).max().unwrap_or(0);
        let mut qx: Vec<Option<f64>> = vec![None; top + 1];
        for &(age, q) in &kept {
            if qx[age].replace(q).is_some() {
                return Err(LifeTableError::DuplicateAge(age));
            }
        }
        let qx = qx
            .into_iter()
            .enumerate()
            .map(|(age, q)| q.ok_or(LifeTableError::MissingAge(age)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(qx, label)
    }

    /// Death probabilities for ages `0..=110`.
    pub fn qx(&self) -> &[f64] {
        &self.qx
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Highest age present in the source data before padding.
    pub fn source_max_age(&self) -> usize {
        self.source_max_age
    }
}

/// Elementwise arithmetic mean of `q[x]`, e.g. over annual tables.
pub fn average_tables(tables: &[LifeTable], label: impl Into<String>) -> Result<LifeTable, LifeTableError> {
    let first = tables.first().ok_or(LifeTableError::Empty)?;
    for t in tables {
        if t.source_max_age != first.source_max_age {
            return Err(LifeTableError::MismatchedRanges(first.source_max_age, t.source_max_age));
        }
    }
    // Incremental mean: exact when all tables agree.
    let mut qx = first.qx.clone();
    for (k, t) in tables.iter().enumerate().skip(1) {
        for (m, &q) in qx.iter_mut().zip(&t.qx) {
            *m += (q - *m) / (k + 1) as f64;
        }
    }
    let mut out = LifeTable::new(qx, label)?;
    out.source_max_age = first.source_max_age;
    Ok(out)
}

/// Complete expectation of remaining life at `age` (fractional years are
/// floored for table lookup).
pub fn expected_remaining_lifespan(table: &LifeTable, age: f64) -> Result<f64, LifeTableError> {
    if !(age.is_finite() && age >= 0.0) {
        return Err(LifeTableError::NegativeAge(age));
    }
    let start = math::floor(age);
    if start >= MAX_AGE as f64 {
        return Ok(0.5);
    }
    let mut survival = 1.0;
    let mut curtate = 0.0;
    for &q in &table.qx[start as usize..] {
        survival *= 1.0 - q;
        curtate += survival;
    }
    Ok(curtate + 0.5)
}

/// Mean absolute error of the life-table expectation against true remaining lifespan.
pub fn baseline_mae(records: &[SampleRecord], table: &LifeTable) -> Result<f64, LifeTableError> {
    if records.is_empty() {
        return Err(LifeTableError::NoRecords);
    }
    let mut total = 0.0;
    for r in records {
        let predicted = expected_remaining_lifespan(table, r.age_at_photo())?;
        total += (predicted - r.remaining_lifespan()).abs();
    }
    Ok(total / records.len() as f64)
}
