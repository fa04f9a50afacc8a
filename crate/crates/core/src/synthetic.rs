//! Heteroskedastic regression data with known ground truth.
//!
//! Each sample `i` draws its embedding `x_i ~ N(0, I)` and its noise from the
//! counter-based stream `SplitMix64::stream(seed, i)`, so any sample can be
//! regenerated independently. The target is
//! `y_i = mu(x_i) + sigma(x_i) * eps_i`, redrawn while negative so it is a
//! valid remaining lifespan.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{DatasetTag, EmbeddingStore, SampleRecord};
use crate::math;
use crate::rng::SplitMix64;

/// Photo date shared by all synthetic records; death date is this plus the target.
pub const PHOTO_DATE: f64 = 2000.0;
pub const BIRTH_DATE: f64 = 1950.0;

const PARAM_STREAM: u64 = u64::MAX;
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MuFamily {
    /// `z = w · x` for a random unit vector `w`.
    Linear,
    /// `z = Σ_k a_k tanh(v_k · x / sqrt(d))` with fixed random `a`, `v`,
    /// rescaled to unit variance over the input distribution.
    ShallowRandomNet { hidden: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SigmaFamily {
    Constant { c: f64 },
    /// `sigma = a * max(mu, 0) + b`
    AffineInMu { a: f64, b: f64 },
    /// `sigma = levels[min(floor(max(mu, 0) / width), levels.len() - 1)]`
    BucketStep { width: f64, levels: Vec<f64> },
}

impl SigmaFamily {
    pub fn sigma(&self, mu: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::AffineInMu { a, b } => a * mu.max(0.0) + b,
            Self::BucketStep { width, levels } => {
                let idx = math::floor(mu.max(0.0) / width) as usize;
                levels[idx.min(levels.len() - 1)]
            }
        }
    }

    fn validate(&self) -> Result<(), SyntheticError> {
        let ok = match self {
            Self::Constant { c } => c.is_finite() && *c > 0.0,
            Self::AffineInMu { a, b } => a.is_finite() && *a >= 0.0 && b.is_finite() && *b > 0.0,
            Self::BucketStep { width, levels } => {
                width.is_finite()
                    && *width > 0.0
                    && !levels.is_empty()
                    && levels.iter().all(|l| l.is_finite() && *l > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SyntheticError::InvalidConfig("sigma family must be strictly positive"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub input_dim: usize,
    pub mu_family: MuFamily,
    pub sigma_family: SigmaFamily,
    pub seed: u64,
    /// `mu = target_offset + target_scale * z` with `z` of unit variance.
    pub target_offset: f64,
    pub target_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            input_dim: 64,
            mu_family: MuFamily::Linear,
            sigma_family: SigmaFamily::AffineInMu { a: 0.05, b: 0.5 },
            seed: 1,
            target_offset: 30.0,
            target_scale: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyntheticError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub id: String,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub store: EmbeddingStore,
    pub records: Vec<SampleRecord>,
    pub truth: Vec<GroundTruth>,
}

enum MeanMap {
    Linear(Vec<f64>),
    Net {
        v: Vec<f64>,
        a: Vec<f64>,
        hidden: usize,
    },
}

impl MeanMap {
    fn build(config: &SyntheticConfig) -> Result<Self, SyntheticError> {
        let d = config.input_dim;
        let mut rng = SplitMix64::stream(config.seed, PARAM_STREAM);
        match config.mu_family {
            MuFamily::Linear => {
                let mut w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                let norm = math::sqrt(math::dot(&w, &w));
                w.iter_mut().for_each(|v| *v /= norm);
                Ok(Self::Linear(w))
            }
            MuFamily::ShallowRandomNet { hidden } => {
                if hidden == 0 {
                    return Err(SyntheticError::InvalidConfig("hidden must be positive"));
                }
                let v: Vec<f64> = (0..hidden * d).map(|_| rng.normal()).collect();
                let mut a: Vec<f64> = (0..hidden).map(|_| rng.normal()).collect();
                // Rescale to unit variance, estimated on a fixed reference sample.
                let map = Self::Net { v: v.clone(), a: a.clone(), hidden };
                let mut probe = SplitMix64::stream(config.seed, PARAM_STREAM - 1);
                let m = 4096;
                let zs: Vec<f64> = (0..m)
                    .map(|_| {
                        let x: Vec<f64> = (0..d).map(|_| probe.normal()).collect();
                        map.eval(&x)
                    })
                    .collect();
                let mean = zs.iter().sum::<f64>() / m as f64;
                let var = zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / m as f64;
                let s = math::sqrt(var);
                a.iter_mut().for_each(|ak| *ak /= s);
                Ok(Self::Net { v, a, hidden })
            }
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear(w) => math::dot(w, x),
            Self::Net { v, a, hidden } => {
                let d = x.len();
                let scale = 1.0 / math::sqrt(d as f64);
                (0..*hidden)
                    .map(|k| a[k] * math::tanh(scale * math::dot(&v[k * d..(k + 1) * d], x)))
                    .sum()
            }
        }
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticDataset, SyntheticError> {
    if config.n_samples == 0 || config.input_dim == 0 {
        return Err(SyntheticError::InvalidConfig("n_samples and input_dim must be positive"));
    }
    if !(config.target_offset.is_finite() && config.target_scale.is_finite()) {
        return Err(SyntheticError::InvalidConfig("target offset/scale must be finite"));
    }
    config.sigma_family.validate()?;
    let map = MeanMap::build(config)?;
    let d = config.input_dim;
    let width = id_width(config.n_samples - 1);

    let mut ids = Vec::with_capacity(config.n_samples);
    let mut data = Vec::with_capacity(config.n_samples * d);
    let mut records = Vec::with_capacity(config.n_samples);
    let mut truth = Vec::with_capacity(config.n_samples);
    let mut x = alloc::vec![0.0f64; d];
    for i in 0..config.n_samples {
        let mut rng = SplitMix64::stream(config.seed, i as u64);
        for xi in x.iter_mut() {
            let v = rng.normal() as f32;
            data.push(v);
            *xi = v as f64;
        }
        let mu = config.target_offset + config.target_scale * map.eval(&x);
        let sigma = config.sigma_family.sigma(mu);
        let mut y = mu + sigma * rng.normal();
        let mut redraws = 0;
        while y < 0.0 && redraws < MAX_REDRAWS {
            y = mu + sigma * rng.normal();
            redraws += 1;
        }
        let y = y.max(0.0);
        let id = format!("syn{i:0width$}");
        records.push(
            SampleRecord::new(id.clone(), "", BIRTH_DATE, PHOTO_DATE, PHOTO_DATE + y, DatasetTag::Faces)
                .expect("synthetic dates are ordered"),
        );
        truth.push(GroundTruth {
            id: id.clone(),
            mu,
            sigma,
        });
        ids.push(id);
    }
    let store = EmbeddingStore::new(ids, d, data).expect("synthetic store is well-formed");
    Ok(SyntheticDataset {
        store,
        records,
        truth,
    })
}

/// Zero-padded id width: at least 6 digits, more for larger datasets.
fn id_width(max_index: usize) -> usize {
    let mut n = max_index;
    let mut w = 1;
    while n >= 10 {
        n /= 10;
        w += 1;
    }
    w.max(6)
}
