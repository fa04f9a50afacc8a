//! Core numerics for uncertainty-aware remaining-lifespan regression.
//!
//! Everything in this crate is pure computation over in-memory data: no file
//! or network IO, no global state, and no dependence on `std`. The companion
//! `lifespan` crate provides the file formats, HTTP clients and CLI.
//!
//! Modules:
//! - [`dataset`]: sample records, embedding store, deterministic splitting and
//!   target normalization.
//! - [`head`]: the shared-trunk mean–variance MLP with analytic gradients.
//! - [`trainer`]: deterministic mini-batch training (L1, GNLL, two-phase).
//! - [`metrics`]: MAE, GNLL, expected absolute error and the ECE family.
//! - [`actuarial`]: period life tables and expected remaining lifespan.
//! - [`curation`]: pure decision logic for dataset curation.
//! - [`synthetic`]: heteroskedastic datasets with known ground truth.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod actuarial;
pub mod curation;
pub mod dataset;
pub mod head;
mod math;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use actuarial::{baseline_mae, expected_remaining_lifespan, LifeTable, LifeTableError};
pub use dataset::{
    fit_normalization, split_dataset, DatasetError, DatasetSplit, DatasetTag, EmbeddingStore,
    NormalizationStats, SampleRecord,
};
pub use head::{HeadError, LossMode, MveHeadParams, Prediction};
pub use metrics::{BucketSpec, BucketStats, BucketingMode, EvalReport, MetricsError};
pub use rng::SplitMix64;
pub use trainer::{train, TrainConfig, TrainError, TrainReport};
