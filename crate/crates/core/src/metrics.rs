//! Accuracy and calibration metrics for Gaussian regression predictions.
//!
//! Calibration compares true absolute errors `e_i = |y_i - mu_i|` with the
//! predicted expected absolute errors `ê_i = sqrt(2/pi) * sigma_i`:
//!
//! - pointwise: `(1/N) Σ |e_i - ê_i|`
//! - bucketed:  `(1/N) Σ_b n_b |mean_b(e) - mean_b(ê)|`
//! - one-bucket: `|mean(e) - mean(ê)|`
//!
//! For any bucketing, `ece_one <= ece_bucketed <= ece_pointwise`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::NormalizationStats;
use crate::head::{gnll_term, Prediction, SQRT_2_OVER_PI};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("{predictions} predictions but {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("sigma must be positive and finite, got {0}")]
    NonPositiveSigma(f64),
    #[error("bucket count must be at least 1")]
    ZeroBuckets,
    #[error("bucket upper edge must be positive and finite, got {0}")]
    BadBucketMax(f64),
    #[error("all bucketing values are identical; cannot form {0} buckets")]
    DegenerateEdges(usize),
}

/// Which per-sample quantity decides bucket membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BucketingMode {
    #[default]
    ByTrueTarget,
    ByPredictedMu,
}

/// `count` equal-width buckets over `[0, max)`. Values at or above `max` go
/// to the last bucket, values below zero to the first. With `max = None` the
/// largest bucketing value is used as the upper edge.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketSpec {
    pub count: usize,
    pub max: Option<f64>,
}

impl Default for BucketSpec {
    fn default() -> Self {
        Self {
            count: 10,
            max: Some(60.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketStats {
    /// 1-based bucket index.
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// Mean true absolute error in the bucket (0 when empty).
    pub e: f64,
    /// Mean predicted absolute error in the bucket (0 when empty).
    pub e_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub n: usize,
    pub mae: f64,
    /// Mean GNLL in normalized target units; absent without normalization stats.
    pub mean_gnll: Option<f64>,
    pub ece_bucketed: f64,
    pub ece_one: f64,
    pub ece_pointwise: f64,
    pub bucketing_mode: BucketingMode,
    pub bucket_spec: BucketSpec,
    pub buckets: Vec<BucketStats>,
}

fn check_lengths(predictions: usize, targets: usize) -> Result<(), MetricsError> {
    if predictions != targets {
        return Err(MetricsError::LengthMismatch {
            predictions,
            targets,
        });
    }
    if predictions == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn expected_abs_error(sigma: f64) -> Result<f64, MetricsError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(MetricsError::NonPositiveSigma(sigma));
    }
    Ok(SQRT_2_OVER_PI * sigma)
}

pub fn mae(predictions: &[Prediction], targets: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predictions.len(), targets.len())?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p.mu).abs())
        .sum();
    Ok(total / targets.len() as f64)
}

/// Mean per-sample GNLL after mapping targets and predictions to normalized units.
pub fn mean_gnll(
    predictions: &[Prediction],
    targets: &[f64],
    stats: &NormalizationStats,
) -> Result<f64, MetricsError> {
    check_lengths(predictions.len(), targets.len())?;
    let mut total = 0.0;
    for (p, &y) in predictions.iter().zip(targets) {
        if !(p.sigma.is_finite() && p.sigma > 0.0) {
            return Err(MetricsError::NonPositiveSigma(p.sigma));
        }
        let r = (y - p.mu) / stats.target_std;
        let s = p.sigma / stats.target_std;
        total += gnll_term(r, math::ln(s * s));
    }
    Ok(total / targets.len() as f64)
}

/// True absolute errors `|y - mu|`.
pub fn abs_errors(predictions: &[Prediction], targets: &[f64]) -> Vec<f64> {
    predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p.mu).abs())
        .collect()
}

/// Predicted expected absolute errors.
pub fn predicted_errors(predictions: &[Prediction]) -> Vec<f64> {
    predictions.iter().map(|p| p.expected_abs_error).collect()
}

pub fn ece_one_from_errors(errors: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predicted.len(), errors.len())?;
    let n = errors.len() as f64;
    let mean_e = errors.iter().sum::<f64>() / n;
    let mean_hat = predicted.iter().sum::<f64>() / n;
    Ok((mean_e - mean_hat).abs())
}

pub fn ece_pointwise_from_errors(errors: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predicted.len(), errors.len())?;
    let total: f64 = errors
        .iter()
        .zip(predicted)
        .map(|(e, h)| (e - h).abs())
        .sum();
    Ok(total / errors.len() as f64)
}

/// Bucket edges `(width, count)` for `values` under `spec`.
fn resolve_width(values: &[f64], spec: &BucketSpec) -> Result<f64, MetricsError> {
    if spec.count == 0 {
        return Err(MetricsError::ZeroBuckets);
    }
    let max = match spec.max {
        Some(m) => {
            if !(m.is_finite() && m > 0.0) {
                return Err(MetricsError::BadBucketMax(m));
            }
            m
        }
        None => {
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            if spec.count > 1 && (hi == lo || hi.is_nan() || hi <= 0.0) {
                return Err(MetricsError::DegenerateEdges(spec.count));
            }
            if !(hi.is_finite() && hi > 0.0) {
                // Single bucket over non-positive values: any width works.
                1.0
            } else {
                hi
            }
        }
    };
    Ok(max / spec.count as f64)
}

/// 0-based bucket of `value`.
pub fn bucket_of(value: f64, width: f64, count: usize) -> usize {
    if value.is_nan() || value <= 0.0 {
        return 0;
    }
    let raw = math::floor(value / width);
    if raw >= count as f64 {
        count - 1
    } else {
        raw as usize
    }
}

/// Bucketed ECE from explicit bucketing values and errors.
pub fn ece_bucketed_from_errors(
    values: &[f64],
    errors: &[f64],
    predicted: &[f64],
    spec: &BucketSpec,
) -> Result<(f64, Vec<BucketStats>), MetricsError> {
    check_lengths(predicted.len(), errors.len())?;
    check_lengths(values.len(), errors.len())?;
    let width = resolve_width(values, spec)?;
    let count = spec.count;
    let mut n_b = vec![0usize; count];
    let mut sum_e = vec![0.0f64; count];
    let mut sum_hat = vec![0.0f64; count];
    for i in 0..values.len() {
        let b = bucket_of(values[i], width, count);
        n_b[b] += 1;
        sum_e[b] += errors[i];
        sum_hat[b] += predicted[i];
    }
    let n = values.len() as f64;
    let mut ece = 0.0;
    let mut buckets = Vec::with_capacity(count);
    for b in 0..count {
        let (e, e_hat) = if n_b[b] == 0 {
            (0.0, 0.0)
        } else {
            let k = n_b[b] as f64;
            (sum_e[b] / k, sum_hat[b] / k)
        };
        ece += (n_b[b] as f64 / n) * (e - e_hat).abs();
        buckets.push(BucketStats {
            index: b + 1,
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            n: n_b[b],
            e,
            e_hat,
        });
    }
    Ok((ece, buckets))
}

fn bucketing_values(predictions: &[Prediction], targets: &[f64], mode: BucketingMode) -> Vec<f64> {
    match mode {
        BucketingMode::ByTrueTarget => targets.to_vec(),
        BucketingMode::ByPredictedMu => predictions.iter().map(|p| p.mu).collect(),
    }
}

pub fn ece_bucketed(
    predictions: &[Prediction],
    targets: &[f64],
    spec: &BucketSpec,
    mode: BucketingMode,
) -> Result<(f64, Vec<BucketStats>), MetricsError> {
    check_lengths(predictions.len(), targets.len())?;
    ece_bucketed_from_errors(
        &bucketing_values(predictions, targets, mode),
        &abs_errors(predictions, targets),
        &predicted_errors(predictions),
        spec,
    )
}

pub fn ece_one(predictions: &[Prediction], targets: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predictions.len(), targets.len())?;
    ece_one_from_errors(&abs_errors(predictions, targets), &predicted_errors(predictions))
}

pub fn ece_pointwise(predictions: &[Prediction], targets: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predictions.len(), targets.len())?;
    ece_pointwise_from_errors(&abs_errors(predictions, targets), &predicted_errors(predictions))
}

pub fn full_report(
    predictions: &[Prediction],
    targets: &[f64],
    spec: &BucketSpec,
    mode: BucketingMode,
    stats: Option<&NormalizationStats>,
) -> Result<EvalReport, MetricsError> {
    check_lengths(predictions.len(), targets.len())?;
    let errors = abs_errors(predictions, targets);
    let predicted = predicted_errors(predictions);
    let (ece_b, buckets) = ece_bucketed_from_errors(
        &bucketing_values(predictions, targets, mode),
        &errors,
        &predicted,
        spec,
    )?;
    Ok(EvalReport {
        n: targets.len(),
        mae: mae(predictions, targets)?,
        mean_gnll: stats
            .map(|s| mean_gnll(predictions, targets, s))
            .transpose()?,
        ece_bucketed: ece_b,
        ece_one: ece_one_from_errors(&errors, &predicted)?,
        ece_pointwise: ece_pointwise_from_errors(&errors, &predicted)?,
        bucketing_mode: mode,
        bucket_spec: *spec,
        buckets,
    })
}
