//! Deterministic mini-batch training of the mean–variance head.
//!
//! Batches are formed by reshuffling the training subset every epoch with
//! `SplitMix64::stream(seed, epoch)`; the last partial batch is kept. Samples
//! within a batch are reduced in batch order, so a run is a pure function of
//! its inputs and seed.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{partition_ids, DatasetSplit, EmbeddingStore, NormalizationStats, SampleRecord};
use crate::head::{HeadError, LossMode, MveHeadParams, DEFAULT_HIDDEN_DIM};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::SplitMix64;

/// Stream offset separating the phase-2 holdout shuffle from the batch shuffles.
const HOLDOUT_STREAM: u64 = 0x0068_6f6c_646f_7574;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Schedule {
    /// `epochs_phase1` epochs of L1 on the whole training split.
    L1Only,
    /// `epochs_phase2` epochs of GNLL on the whole training split.
    GnllOnly,
    /// L1 on one part of the training split, then GNLL on the held-out rest.
    TwoPhase,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub schedule: Schedule,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub holdout_fraction_phase2: f64,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::GnllOnly,
            epochs_phase1: 20,
            epochs_phase2: 40,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            seed: 1,
            holdout_fraction_phase2: 0.5,
            hidden_dim: DEFAULT_HIDDEN_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("no target for sample id {0:?}")]
    MissingTarget(String),
    #[error("training split is empty")]
    EmptyTrainSet,
    #[error("phase-2 holdout subset is empty")]
    EmptyPhase2,
    #[error("training diverged in epoch {epoch}; last finite parameters kept")]
    Diverged {
        epoch: usize,
        last_good: Box<MveHeadParams>,
        report: TrainReport,
    },
    #[error(transparent)]
    Head(#[from] HeadError),
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg| Err(TrainError::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction_phase2) {
            return bad("holdout_fraction_phase2 must be in [0, 1)");
        }
        match self.schedule {
            Schedule::L1Only if self.epochs_phase1 == 0 => bad("l1_only needs epochs_phase1 > 0"),
            Schedule::GnllOnly if self.epochs_phase2 == 0 => bad("gnll_only needs epochs_phase2 > 0"),
            Schedule::TwoPhase if self.epochs_phase1 == 0 || self.epochs_phase2 == 0 => {
                bad("two_phase needs both epoch counts > 0")
            }
            Schedule::TwoPhase if self.holdout_fraction_phase2 == 0.0 => {
                bad("two_phase needs holdout_fraction_phase2 > 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: u8,
    pub loss_mode: LossMode,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    /// FNV-1a digest of the parameter bits after this epoch.
    pub param_digest: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

/// FNV-1a over the little-endian bytes of every parameter.
pub fn param_digest(params: &MveHeadParams) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in params.values() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Rows and normalized targets of one subset.
struct Subset<'a> {
    inputs: Vec<&'a [f32]>,
    targets: Vec<f64>,
}

impl<'a> Subset<'a> {
    fn build(
        store: &'a EmbeddingStore,
        targets: &BTreeMap<&str, f64>,
        ids: &[String],
        stats: &NormalizationStats,
    ) -> Result<Self, TrainError> {
        let mut inputs = Vec::with_capacity(ids.len());
        let mut ys = Vec::with_capacity(ids.len());
        for id in ids {
            let row = store
                .get(id)
                .ok_or_else(|| HeadError::UnknownId(id.clone()))?;
            let y = targets
                .get(id.as_str())
                .ok_or_else(|| TrainError::MissingTarget(id.clone()))?;
            inputs.push(row);
            ys.push(stats.normalize(*y));
        }
        Ok(Self {
            inputs,
            targets: ys,
        })
    }
}

/// Loss of `params` on `(inputs, targets)`, or `None` if it is not finite.
fn finite_loss(
    params: &MveHeadParams,
    subset: &Subset<'_>,
    mode: LossMode,
) -> Result<Option<f64>, HeadError> {
    match params.loss(&subset.inputs, &subset.targets, mode) {
        Ok(l) if l.is_finite() => Ok(Some(l)),
        Ok(_) | Err(HeadError::NonFiniteForward) => Ok(None),
        Err(e) => Err(e),
    }
}

struct Phase<'s, 'a> {
    index: u8,
    mode: LossMode,
    epochs: usize,
    data: &'s Subset<'a>,
}

/// Trains a fresh head on `split.train_ids` and reports per-epoch losses.
///
/// Normalized targets come from `records` through `stats`. The test loss in
/// each epoch uses the same loss mode as the running phase.
pub fn train(
    store: &EmbeddingStore,
    records: &[SampleRecord],
    split: &DatasetSplit,
    stats: &NormalizationStats,
    config: &TrainConfig,
) -> Result<(MveHeadParams, TrainReport), TrainError> {
    config.validate()?;
    if split.train_ids.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let targets: BTreeMap<&str, f64> = records
        .iter()
        .map(|r| (r.id(), r.remaining_lifespan()))
        .collect();

    let test = Subset::build(store, &targets, &split.test_ids, stats)?;
    let full = Subset::build(store, &targets, &split.train_ids, stats)?;
    let (phase1, phase2);
    let phases: Vec<Phase<'_, '_>> = match config.schedule {
        Schedule::L1Only => alloc::vec![Phase { index: 1, mode: LossMode::L1, epochs: config.epochs_phase1, data: &full }],
        Schedule::GnllOnly => alloc::vec![Phase { index: 2, mode: LossMode::Gnll, epochs: config.epochs_phase2, data: &full }],
        Schedule::TwoPhase => {
            let (first, held_out) = partition_ids(
                &split.train_ids,
                config.seed ^ HOLDOUT_STREAM,
                1.0 - config.holdout_fraction_phase2,
            )
            .map_err(|_| TrainError::EmptyTrainSet)?;
            if held_out.is_empty() {
                return Err(TrainError::EmptyPhase2);
            }
            if first.is_empty() {
                return Err(TrainError::InvalidConfig("phase-1 subset is empty"));
            }
            phase1 = Subset::build(store, &targets, &first, stats)?;
            phase2 = Subset::build(store, &targets, &held_out, stats)?;
            alloc::vec![
                Phase { index: 1, mode: LossMode::L1, epochs: config.epochs_phase1, data: &phase1 },
                Phase { index: 2, mode: LossMode::Gnll, epochs: config.epochs_phase2, data: &phase2 },
            ]
        }
    };

    let mut params = MveHeadParams::init(store.dim(), config.hidden_dim, config.seed)?;
    let mut report = TrainReport::default();
    let mut epoch = 0usize;
    for phase in &phases {
        let mut opt = Optimizer::new(config.optimizer, config.learning_rate, params.len());
        for _ in 0..phase.epochs {
            let last_good = params.clone();
            let diverged = |report: &TrainReport| TrainError::Diverged {
                epoch,
                last_good: Box::new(last_good.clone()),
                report: report.clone(),
            };
            if !run_epoch(&mut params, &mut opt, phase, config, epoch)? {
                return Err(diverged(&report));
            }
            let Some(train_loss) = finite_loss(&params, phase.data, phase.mode)? else {
                return Err(diverged(&report));
            };
            let test_loss = if test.inputs.is_empty() {
                None
            } else {
                match finite_loss(&params, &test, phase.mode)? {
                    Some(l) => Some(l),
                    None => return Err(diverged(&report)),
                }
            };
            report.epochs.push(EpochRecord {
                epoch,
                phase: phase.index,
                loss_mode: phase.mode,
                train_loss,
                test_loss,
                param_digest: param_digest(&params),
            });
            epoch += 1;
        }
    }
    Ok((params, report))
}

/// One pass over shuffled mini-batches. Returns `false` on a non-finite loss
/// or parameter.
fn run_epoch(
    params: &mut MveHeadParams,
    opt: &mut Optimizer,
    phase: &Phase<'_, '_>,
    config: &TrainConfig,
    epoch: usize,
) -> Result<bool, HeadError> {
    let data = phase.data;
    let mut order: Vec<usize> = (0..data.inputs.len()).collect();
    SplitMix64::stream(config.seed, epoch as u64).shuffle(&mut order);
    let mut inputs = Vec::with_capacity(config.batch_size);
    let mut targets = Vec::with_capacity(config.batch_size);
    for batch in order.chunks(config.batch_size) {
        inputs.clear();
        targets.clear();
        for &i in batch {
            inputs.push(data.inputs[i]);
            targets.push(data.targets[i]);
        }
        let (loss, grad) = match params.loss_and_gradients(&inputs, &targets, phase.mode) {
            Ok(v) => v,
            Err(HeadError::NonFiniteForward) => return Ok(false),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || !grad.is_finite() {
            return Ok(false);
        }
        opt.step(params.values_mut(), grad.values());
        if !params.is_finite() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Mean absolute error in years and mean GNLL in normalized units on `ids`.
///
/// `targets` are in years, aligned with `ids`.
pub fn evaluate_during_training<S: AsRef<str>>(
    params: &MveHeadParams,
    store: &EmbeddingStore,
    ids: &[S],
    targets: &[f64],
    stats: &NormalizationStats,
) -> Result<(f64, f64), HeadError> {
    if ids.is_empty() {
        return Err(HeadError::EmptyBatch);
    }
    if ids.len() != targets.len() {
        return Err(HeadError::BatchMismatch {
            inputs: ids.len(),
            targets: targets.len(),
        });
    }
    let inputs = ids
        .iter()
        .map(|id| {
            store
                .get(id.as_ref())
                .ok_or_else(|| HeadError::UnknownId(id.as_ref().into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let normalized: Vec<f64> = targets.iter().map(|&y| stats.normalize(y)).collect();
    let gnll = params.loss(&inputs, &normalized, LossMode::Gnll)?;
    let preds = params.predict_batch(store, ids, stats)?;
    let l1 = preds
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p.mu).abs())
        .sum::<f64>()
        / targets.len() as f64;
    Ok((l1, gnll))
}
