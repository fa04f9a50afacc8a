//! Sample records, embeddings, deterministic splits and target normalization.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: &'static str },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("empty record list")]
    Empty,
    #[error("split fraction {0} is not in (0, 1)")]
    BadFraction(f64),
    #[error("need at least two targets to fit normalization, got {0}")]
    TooFewTargets(usize),
    #[error("targets are constant or non-finite; cannot normalize")]
    DegenerateTargets,
    #[error("embedding dim must be positive")]
    ZeroDim,
    #[error("embedding payload has {values} values, expected {rows} x {dim}")]
    ShapeMismatch { rows: usize, dim: usize, values: usize },
    #[error("unknown sample id {0:?}")]
    UnknownId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DatasetTag {
    Faces,
    Whole,
    Legacy,
}

/// One person/image. Dates are fractional calendar years.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    id: String,
    image_path: String,
    birth_date: f64,
    photo_date: f64,
    death_date: f64,
    dataset_tag: DatasetTag,
}

impl SampleRecord {
    pub fn new(
        id: impl Into<String>,
        image_path: impl Into<String>,
        birth_date: f64,
        photo_date: f64,
        death_date: f64,
        dataset_tag: DatasetTag,
    ) -> Result<Self, DatasetError> {
        let id = id.into();
        let invalid = |reason| DatasetError::InvalidRecord {
            id: id.clone(),
            reason,
        };
        if id.is_empty() {
            return Err(invalid("empty id"));
        }
        if !(birth_date.is_finite() && photo_date.is_finite() && death_date.is_finite()) {
            return Err(invalid("non-finite date"));
        }
        if birth_date >= photo_date {
            return Err(invalid("birth_date must precede photo_date"));
        }
        if photo_date > death_date {
            return Err(invalid("death_date precedes photo_date"));
        }
        Ok(Self {
            id,
            image_path: image_path.into(),
            birth_date,
            photo_date,
            death_date,
            dataset_tag,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn image_path(&self) -> &str {
        &self.image_path
    }

    pub fn birth_date(&self) -> f64 {
        self.birth_date
    }

    pub fn photo_date(&self) -> f64 {
        self.photo_date
    }

    pub fn death_date(&self) -> f64 {
        self.death_date
    }

    pub fn dataset_tag(&self) -> DatasetTag {
        self.dataset_tag
    }

    /// Years between the photo and death.
    pub fn remaining_lifespan(&self) -> f64 {
        self.death_date - self.photo_date
    }

    /// Age in fractional years when the photo was taken.
    pub fn age_at_photo(&self) -> f64 {
        self.photo_date - self.birth_date
    }
}

/// Rejects duplicate ids, returning the first duplicate found.
pub fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<(), DatasetError> {
    let mut seen = BTreeMap::new();
    for id in ids {
        if seen.insert(id, ()).is_some() {
            return Err(DatasetError::DuplicateId(id.into()));
        }
    }
    Ok(())
}

/// Row-major `N x dim` matrix of f32 embeddings keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self, DatasetError> {
        if dim == 0 {
            return Err(DatasetError::ZeroDim);
        }
        if data.len() != ids.len() * dim {
            return Err(DatasetError::ShapeMismatch {
                rows: ids.len(),
                dim,
                values: data.len(),
            });
        }
        let mut index = BTreeMap::new();
        for (row, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), row).is_some() {
                return Err(DatasetError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            ids,
            dim,
            data,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.row_index(id).map(|r| self.row(r))
    }

    /// Row indices for `ids`, failing on the first unknown id.
    pub fn rows_for<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>, DatasetError> {
        ids.iter()
            .map(|id| {
                self.row_index(id.as_ref())
                    .ok_or_else(|| DatasetError::UnknownId(id.as_ref().into()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetSplit {
    pub seed: u64,
    pub fraction: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Number of items landing in the first part: `floor(fraction * n + 0.5)`.
pub fn train_count(n: usize, fraction: f64) -> usize {
    let count = math::floor(fraction * n as f64 + 0.5) as usize;
    count.min(n)
}

/// Deterministic partition of `ids` into `(first, second)`.
///
/// Ids are sorted first so the result depends only on the id set, then
/// shuffled with [`SplitMix64`] seeded by `seed`. The first part takes
/// `round_half_up(fraction * n)` ids.
pub fn partition_ids(
    ids: &[String],
    seed: u64,
    fraction: f64,
) -> Result<(Vec<String>, Vec<String>), DatasetError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::BadFraction(fraction));
    }
    if ids.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut order: Vec<String> = ids.to_vec();
    order.sort_unstable();
    SplitMix64::new(seed).shuffle(&mut order);
    let cut = train_count(order.len(), fraction);
    let second = order.split_off(cut);
    Ok((order, second))
}

pub fn split_dataset(
    records: &[SampleRecord],
    seed: u64,
    fraction: f64,
) -> Result<DatasetSplit, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    check_unique_ids(records.iter().map(SampleRecord::id))?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let (train_ids, test_ids) = partition_ids(&ids, seed, fraction)?;
    Ok(DatasetSplit {
        seed,
        fraction,
        train_ids,
        test_ids,
    })
}

/// Z-scoring parameters for the regression target, fitted on training data.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizationStats {
    pub target_mean: f64,
    pub target_std: f64,
}

impl NormalizationStats {
    pub const IDENTITY: Self = Self {
        target_mean: 0.0,
        target_std: 1.0,
    };

    pub fn normalize(&self, years: f64) -> f64 {
        (years - self.target_mean) / self.target_std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }
}

/// Mean and population standard deviation (divide by N) of the targets.
pub fn fit_normalization(train_targets: &[f64]) -> Result<NormalizationStats, DatasetError> {
    let n = train_targets.len();
    if n < 2 {
        return Err(DatasetError::TooFewTargets(n));
    }
    let mean = train_targets.iter().sum::<f64>() / n as f64;
    let var = train_targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    let std = math::sqrt(var);
    if !(std.is_finite() && std > 0.0 && mean.is_finite()) {
        return Err(DatasetError::DegenerateTargets);
    }
    Ok(NormalizationStats {
        target_mean: mean,
        target_std: std,
    })
}

/// Remaining-lifespan targets for `ids`, looked up in `records`.
pub fn targets_for<S: AsRef<str>>(
    records: &[SampleRecord],
    ids: &[S],
) -> Result<Vec<f64>, DatasetError> {
    let by_id: BTreeMap<&str, &SampleRecord> = records.iter().map(|r| (r.id(), r)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_ref())
                .map(|r| r.remaining_lifespan())
                .ok_or_else(|| DatasetError::UnknownId(id.as_ref().into()))
        })
        .collect()
}
