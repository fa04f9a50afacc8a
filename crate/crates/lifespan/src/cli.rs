//! The `lifespan` command line.
//!
//! Values are resolved with the precedence flags > config file > built-in
//! defaults. The config file is JSON; every key is optional:
//!
//! ```json
//! {
//!   "seed": 1,
//!   "split_fraction": 0.8,
//!   "buckets": 10,
//!   "bucket_max": 60,
//!   "bucket_mode": "true",
//!   "parallelism": 8,
//!   "train": { "schedule": "two_phase", "epochs_phase1": 20, "epochs_phase2": 40 },
//!   "synthetic": { "n_samples": 20000, "input_dim": 64 },
//!   "curation": { "min_width": 200, "min_height": 200 },
//!   "vlm": { "endpoint": "https://...", "model": "..." },
//!   "wikidata": { "base_url": "https://www.wikidata.org" }
//! }
//! ```
//!
//! A seed given by flag or at the top level of the file replaces the seed
//! inside the `train` and `synthetic` sections.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lifespan_core::curation::CurationCriteria;
use lifespan_core::dataset::{fit_normalization, split_dataset, targets_for};
use lifespan_core::metrics::full_report;
use lifespan_core::synthetic::{generate, SyntheticConfig};
use lifespan_core::trainer::Schedule;
use lifespan_core::{
    baseline_mae, BucketSpec, BucketingMode, DatasetSplit, EmbeddingStore, EvalReport,
    NormalizationStats, Prediction, SampleRecord, TrainConfig, TrainError,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curation::transport::{HttpTransport, RecordedTransport, ReqwestTransport};
use crate::curation::{
    curate, load_raw_manifest, CurationClients, CurationOptions, VlmClient, VlmConfig,
    WikidataClient, WikidataConfig,
};
use crate::predictions::{read_predictions, write_predictions, PredictionRow};
use crate::report::{write_report, EvaluationSummary};
use crate::{checkpoint, emb1, fsutil, life_table, manifest};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const CHECKPOINT_FILE: &str = "head.mve1";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const EVAL_FILE: &str = "eval_report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const BASELINE_FILE: &str = "baseline.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.emb1";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const SYNTH_CONFIG_FILE: &str = "synth_config.json";

const DEFAULT_SEED: u64 = 1;
const DEFAULT_FRACTION: f64 = 0.8;

#[derive(Debug, Parser)]
#[command(name = "lifespan", version, about = "Remaining-lifespan regression with calibrated uncertainty")]
pub struct Cli {
    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a raw manifest by image, photograph and death-date criteria.
    Curate(CurateArgs),
    /// Deterministic train/test split of a manifest.
    Split(SplitArgs),
    /// Train the mean-variance head on embeddings.
    Train(TrainArgs),
    /// Compute MAE, GNLL and calibration errors and write them as JSON.
    Evaluate(EvaluateArgs),
    /// Write the per-bucket report as JSON, CSV and an SVG bar chart.
    Report(ReportArgs),
    /// Life-table baseline MAE.
    Baseline(BaselineArgs),
    /// Generate a synthetic dataset with known mean and noise level.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Raw manifest (JSON Lines) with image paths and Wikidata ids.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory relative image paths resolve against (default: the manifest's directory).
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    /// Replay HTTP responses from a fixture file instead of the network.
    #[arg(long, value_name = "FILE")]
    pub fixtures: Option<PathBuf>,
    /// Local image checks only; no network calls.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Restrict the split to records that have an embedding.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of records in the training part.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleArg {
    L1Only,
    GnllOnly,
    TwoPhase,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::L1Only => Schedule::L1Only,
            ScheduleArg::GnllOnly => Schedule::GnllOnly,
            ScheduleArg::TwoPhase => Schedule::TwoPhase,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Use this split instead of computing one from the seed.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long)]
    pub epochs_phase1: Option<usize>,
    #[arg(long)]
    pub epochs_phase2: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketModeArg {
    /// Bucket by true remaining lifespan.
    True,
    /// Bucket by predicted remaining lifespan.
    Pred,
}

impl From<BucketModeArg> for BucketingMode {
    fn from(m: BucketModeArg) -> Self {
        match m {
            BucketModeArg::True => BucketingMode::ByTrueTarget,
            BucketModeArg::Pred => BucketingMode::ByPredictedMu,
        }
    }
}

/// Upper edge of the last bucket: years, or `auto` for the largest value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BucketMax {
    Years(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl BucketMax {
    fn as_option(self) -> Option<f64> {
        match self {
            Self::Years(y) => Some(y),
            Self::Auto(_) => None,
        }
    }
}

fn parse_bucket_max(s: &str) -> Result<BucketMax, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(BucketMax::Auto(AutoTag::Auto));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(BucketMax::Years(v)),
        _ => Err(format!("expected a positive number of years or `auto`, got {s:?}")),
    }
}

#[derive(Debug, Args, Default)]
pub struct BucketArgs {
    /// Number of equal-width buckets [default: 10].
    #[arg(long)]
    pub buckets: Option<usize>,
    /// Upper edge in years, or `auto` [default: 60].
    #[arg(long, value_parser = parse_bucket_max)]
    pub bucket_max: Option<BucketMax>,
    /// Quantity that decides bucket membership [default: true].
    #[arg(long, value_enum)]
    pub bucket_mode: Option<BucketModeArg>,
}

#[derive(Debug, Args, Default)]
pub struct EvalInputArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint written by `train`; needs `--embeddings`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Precomputed predictions CSV (`id,mu,sigma`) instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    pub predictions: Option<PathBuf>,
    /// Evaluate only the test ids of this split.
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: EvalInputArgs,
    #[command(flatten)]
    pub buckets: BucketArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Render from an `evaluate` output instead of recomputing.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["manifest", "checkpoint", "predictions"])]
    pub eval: Option<PathBuf>,
    #[command(flatten)]
    pub input: EvalInputArgs,
    #[command(flatten)]
    pub buckets: BucketArgs,
    /// Chart title.
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// A life-table CSV, or a directory of annual tables to average.
    #[arg(long)]
    pub life_table: PathBuf,
    /// Evaluate only the test ids of this split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Contents of `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub split_fraction: Option<f64>,
    pub buckets: Option<usize>,
    pub bucket_max: Option<BucketMax>,
    pub bucket_mode: Option<BucketModeArg>,
    pub parallelism: Option<usize>,
    pub train: Option<TrainConfig>,
    pub synthetic: Option<SyntheticConfig>,
    pub curation: Option<CurationCriteria>,
    pub vlm: Option<VlmConfig>,
    pub wikidata: Option<WikidataConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        require_input(path)?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn seed(&self, flag: Option<u64>, section: Option<u64>) -> u64 {
        flag.or(self.seed).or(section).unwrap_or(DEFAULT_SEED)
    }

    fn fraction(&self, flag: Option<f64>) -> f64 {
        flag.or(self.split_fraction).unwrap_or(DEFAULT_FRACTION)
    }

    fn bucket_spec(&self, args: &BucketArgs) -> Result<(BucketSpec, BucketingMode)> {
        let default = BucketSpec::default();
        let count = args.buckets.or(self.buckets).unwrap_or(default.count);
        ensure!(count > 0, "--buckets must be at least 1");
        let max = match args.bucket_max.or(self.bucket_max) {
            Some(m) => m.as_option(),
            None => default.max,
        };
        let mode = args
            .bucket_mode
            .or(self.bucket_mode)
            .map(BucketingMode::from)
            .unwrap_or_default();
        Ok((BucketSpec { count, max }, mode))
    }
}

fn require_input(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("input path does not exist: {}", path.display());
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fsutil::write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    require_input(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_records(path: &Path) -> Result<Vec<SampleRecord>> {
    require_input(path)?;
    Ok(manifest::load_manifest(path)?)
}

fn load_store(path: &Path) -> Result<EmbeddingStore> {
    require_input(path)?;
    emb1::read_embeddings(path).with_context(|| format!("reading embeddings {}", path.display()))
}

/// Hex SHA-256 of a split's canonical JSON.
pub fn split_digest(split: &DatasetSplit) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(split).expect("split serializes")))
}

fn with_embeddings(records: Vec<SampleRecord>, store: &EmbeddingStore) -> Vec<SampleRecord> {
    let total = records.len();
    let kept: Vec<_> = records.into_iter().filter(|r| store.get(r.id()).is_some()).collect();
    if kept.len() < total {
        log::warn!("{} manifest records have no embedding and are left out", total - kept.len());
    }
    kept
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Curate(a) => cmd_curate(&file, a),
        Command::Split(a) => cmd_split(&file, a),
        Command::Train(a) => cmd_train(&file, a),
        Command::Evaluate(a) => cmd_evaluate(&file, a),
        Command::Report(a) => cmd_report(&file, a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Synth(a) => cmd_synth(&file, a),
    }
}

fn cmd_curate(file: &FileConfig, a: CurateArgs) -> Result<()> {
    require_input(&a.manifest)?;
    let raw = load_raw_manifest(&a.manifest)?;
    let criteria = file.curation.clone().unwrap_or_default();
    ensure!(criteria.min_width > 0 && criteria.min_height > 0, "minimum image dimensions must be positive");
    let image_root = match a.image_root {
        Some(r) => r,
        None => a.manifest.parent().map(Path::to_owned).unwrap_or_default(),
    };
    let options = CurationOptions {
        image_root,
        parallelism: a.parallelism.or(file.parallelism).unwrap_or(8),
        dry_run: a.dry_run,
    };
    let vlm_config = file.vlm.clone().unwrap_or_default();
    let wd_config = file.wikidata.clone().unwrap_or_default();
    let mut recorded = None;
    let clients = if a.dry_run {
        CurationClients::default()
    } else {
        let (vlm_t, wd_t): (Arc<dyn HttpTransport>, Arc<dyn HttpTransport>) = match &a.fixtures {
            Some(path) => {
                require_input(path)?;
                let t = Arc::new(RecordedTransport::load(path)?);
                recorded = Some(t.clone());
                (t.clone(), t)
            }
            None => (
                Arc::new(ReqwestTransport::new(Duration::from_secs(vlm_config.timeout_secs))?),
                Arc::new(ReqwestTransport::new(Duration::from_secs(wd_config.timeout_secs))?),
            ),
        };
        CurationClients {
            vlm: Some(VlmClient::new(vlm_config, vlm_t)),
            wikidata: Some(WikidataClient::new(wd_config, wd_t)),
        }
    };
    let outcome = curate(&raw, &criteria, &clients, &options)?;
    if let Some(t) = recorded {
        if t.unmatched() > 0 {
            log::warn!("{} requests had no recorded response", t.unmatched());
        }
    }
    manifest::write_manifest(&outcome.accepted, &a.out.join(MANIFEST_FILE))?;
    fsutil::write_atomic(&a.out.join(DECISIONS_FILE), &fsutil::to_json_lines(&outcome.decisions)?)?;
    println!(
        "curated {} records: {} accepted, {} rejected{}",
        outcome.decisions.len(),
        outcome.accepted_count(),
        outcome.rejected_count(),
        if a.dry_run { " (dry run, local checks only)" } else { "" }
    );
    Ok(())
}

fn cmd_split(file: &FileConfig, a: SplitArgs) -> Result<()> {
    let mut records = load_records(&a.manifest)?;
    if let Some(e) = &a.embeddings {
        records = with_embeddings(records, &load_store(e)?);
    }
    let split = split_dataset(&records, file.seed(a.seed, None), file.fraction(a.fraction))?;
    write_json(&a.out.join(SPLIT_FILE), &split)?;
    println!(
        "split {} records: train {}, test {}, sha256 {}",
        records.len(),
        split.train_ids.len(),
        split.test_ids.len(),
        split_digest(&split)
    );
    Ok(())
}

fn resolve_train_config(file: &FileConfig, a: &TrainArgs) -> TrainConfig {
    let mut c = file.train.clone().unwrap_or_default();
    let section_seed = file.train.as_ref().map(|t| t.seed);
    c.seed = file.seed(a.seed, section_seed);
    if let Some(s) = a.schedule {
        c.schedule = s.into();
    }
    if let Some(v) = a.epochs_phase1 {
        c.epochs_phase1 = v;
    }
    if let Some(v) = a.epochs_phase2 {
        c.epochs_phase2 = v;
    }
    if let Some(v) = a.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = a.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = a.hidden_dim {
        c.hidden_dim = v;
    }
    c
}

fn cmd_train(file: &FileConfig, a: TrainArgs) -> Result<()> {
    let store = load_store(&a.embeddings)?;
    let records = with_embeddings(load_records(&a.manifest)?, &store);
    let config = resolve_train_config(file, &a);
    let split: DatasetSplit = match &a.split {
        Some(p) => read_json(p)?,
        None => split_dataset(&records, config.seed, file.fraction(a.fraction))?,
    };
    let stats = fit_normalization(&targets_for(&records, &split.train_ids)?)?;
    let log_path = a.out.join(TRAIN_LOG_FILE);
    let (params, report) = match lifespan_core::train(&store, &records, &split, &stats, &config) {
        Ok(r) => r,
        Err(TrainError::Diverged { epoch, report, .. }) => {
            fsutil::write_atomic(&log_path, &fsutil::to_json_lines(&report.epochs)?)?;
            bail!("training diverged in epoch {epoch}; log written to {}", log_path.display());
        }
        Err(e) => return Err(e.into()),
    };
    let ckpt = a.out.join(CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &params, &checkpoint::CheckpointMeta::new(&params, stats, Some(&config)))?;
    fsutil::write_atomic(&log_path, &fsutil::to_json_lines(&report.epochs)?)?;
    write_json(&a.out.join(SPLIT_FILE), &split)?;
    for e in &report.epochs {
        log::info!(
            "epoch {} phase {} {:?}: train {:.5} test {}",
            e.epoch,
            e.phase,
            e.loss_mode,
            e.train_loss,
            e.test_loss.map_or("-".into(), |t| format!("{t:.5}"))
        );
    }
    let last = report.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} samples: final train loss {:.5}, test loss {}; checkpoint {}",
        report.epochs.len(),
        split.train_ids.len(),
        last.train_loss,
        last.test_loss.map_or("-".into(), |t| format!("{t:.5}")),
        ckpt.display()
    );
    Ok(())
}

/// Predictions, targets and (when known) normalization stats for the
/// evaluated ids, in evaluation order.
struct Evaluated {
    ids: Vec<String>,
    predictions: Vec<Prediction>,
    targets: Vec<f64>,
    stats: Option<NormalizationStats>,
}

fn evaluate_inputs(input: &EvalInputArgs) -> Result<Evaluated> {
    let Some(manifest_path) = &input.manifest else {
        bail!("--manifest is required");
    };
    let records = load_records(manifest_path)?;
    let split_ids = match &input.split {
        Some(p) => Some(read_json::<DatasetSplit>(p)?.test_ids),
        None => None,
    };
    let (ids, predictions, stats) = match (&input.checkpoint, &input.predictions) {
        (Some(ckpt), None) => {
            let Some(emb) = &input.embeddings else {
                bail!("--checkpoint needs --embeddings");
            };
            require_input(ckpt)?;
            let store = load_store(emb)?;
            let (params, meta) = checkpoint::load(ckpt)?;
            ensure!(
                store.dim() == meta.input_dim,
                "checkpoint/embedding dim mismatch: checkpoint expects {} but {} has {}",
                meta.input_dim,
                emb.display(),
                store.dim()
            );
            let ids = split_ids.unwrap_or_else(|| {
                with_embeddings(records.clone(), &store)
                    .iter()
                    .map(|r| r.id().to_owned())
                    .collect()
            });
            let preds = params.predict_batch(&store, &ids, &meta.normalization)?;
            (ids, preds, Some(meta.normalization))
        }
        (None, Some(path)) => {
            require_input(path)?;
            let rows = read_predictions(path)?;
            let by_id: std::collections::HashMap<&str, &PredictionRow> =
                rows.iter().map(|r| (r.id.as_str(), r)).collect();
            let ids = split_ids.unwrap_or_else(|| records.iter().map(|r| r.id().to_owned()).collect());
            let mut preds = Vec::with_capacity(ids.len());
            for id in &ids {
                let row = by_id
                    .get(id.as_str())
                    .with_context(|| format!("no prediction for id {id:?} in {}", path.display()))?;
                ensure!(
                    row.sigma.is_finite() && row.sigma > 0.0,
                    "prediction for {id:?} has non-positive sigma {}",
                    row.sigma
                );
                preds.push(Prediction::from_mu_sigma(row.mu, row.sigma));
            }
            (ids, preds, None)
        }
        _ => bail!("give either --checkpoint with --embeddings, or --predictions"),
    };
    let targets = targets_for(&records, &ids)?;
    Ok(Evaluated {
        ids,
        predictions,
        targets,
        stats,
    })
}

fn summarize(ev: &Evaluated, spec: &BucketSpec, mode: BucketingMode) -> Result<EvaluationSummary> {
    let report = |m| full_report(&ev.predictions, &ev.targets, spec, m, ev.stats.as_ref());
    Ok(EvaluationSummary {
        selected: mode,
        by_true_target: report(BucketingMode::ByTrueTarget)?,
        by_predicted_mu: report(BucketingMode::ByPredictedMu)?,
    })
}

fn print_report(r: &EvalReport) {
    println!(
        "n {}  MAE {:.4}  ECE {:.4}  ECE1 {:.4}  ECEp {:.4}  GNLL {}",
        r.n,
        r.mae,
        r.ece_bucketed,
        r.ece_one,
        r.ece_pointwise,
        r.mean_gnll.map_or("-".into(), |g| format!("{g:.4}"))
    );
}

fn cmd_evaluate(file: &FileConfig, a: EvaluateArgs) -> Result<()> {
    let (spec, mode) = file.bucket_spec(&a.buckets)?;
    let ev = evaluate_inputs(&a.input)?;
    let summary = summarize(&ev, &spec, mode)?;
    write_json(&a.out.join(EVAL_FILE), &summary)?;
    let rows: Vec<PredictionRow> = ev
        .ids
        .iter()
        .zip(&ev.predictions)
        .map(|(id, p)| PredictionRow {
            id: id.clone(),
            mu: p.mu,
            sigma: p.sigma,
        })
        .collect();
    write_predictions(&rows, &a.out.join(PREDICTIONS_FILE))?;
    print_report(summary.selected_report());
    Ok(())
}

fn cmd_report(file: &FileConfig, a: ReportArgs) -> Result<()> {
    let (spec, mode) = file.bucket_spec(&a.buckets)?;
    let report = match &a.eval {
        Some(path) => {
            let mut summary: EvaluationSummary = read_json(path)?;
            if let Some(m) = a.buckets.bucket_mode.or(file.bucket_mode) {
                summary.selected = m.into();
            }
            summary.selected_report().clone()
        }
        None => {
            let ev = evaluate_inputs(&a.input)?;
            full_report(&ev.predictions, &ev.targets, &spec, mode, ev.stats.as_ref())?
        }
    };
    let title = a.title.unwrap_or_else(|| "Observed vs predicted absolute error".into());
    let paths = write_report(&a.out, &report, &title)?;
    print_report(&report);
    println!("wrote {} and {}", paths.json.display(), paths.svg.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct BaselineResult<'a> {
    mae: f64,
    n: usize,
    life_table: &'a str,
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let records = load_records(&a.manifest)?;
    require_input(&a.life_table)?;
    let table = life_table::load_life_table(&a.life_table)?;
    let records = match &a.split {
        Some(p) => {
            let test: HashSet<String> = read_json::<DatasetSplit>(p)?.test_ids.into_iter().collect();
            records.into_iter().filter(|r| test.contains(r.id())).collect()
        }
        None => records,
    };
    let mae = baseline_mae(&records, &table)?;
    if let Some(out) = &a.out {
        write_json(
            &out.join(BASELINE_FILE),
            &BaselineResult {
                mae,
                n: records.len(),
                life_table: table.label(),
            },
        )?;
    }
    println!("baseline MAE {mae:.4} years over {} records ({})", records.len(), table.label());
    Ok(())
}

fn cmd_synth(file: &FileConfig, a: SynthArgs) -> Result<()> {
    let mut config = file.synthetic.clone().unwrap_or_default();
    let section_seed = file.synthetic.as_ref().map(|s| s.seed);
    config.seed = file.seed(a.seed, section_seed);
    if let Some(n) = a.n {
        config.n_samples = n;
    }
    if let Some(d) = a.dim {
        config.input_dim = d;
    }
    let data = generate(&config)?;
    emb1::write_embeddings(&data.store, &a.out.join(EMBEDDINGS_FILE))?;
    manifest::write_manifest(&data.records, &a.out.join(MANIFEST_FILE))?;
    let truth: Vec<PredictionRow> = data
        .truth
        .iter()
        .map(|t| PredictionRow {
            id: t.id.clone(),
            mu: t.mu,
            sigma: t.sigma,
        })
        .collect();
    write_predictions(&truth, &a.out.join(GROUND_TRUTH_FILE))?;
    write_json(&a.out.join(SYNTH_CONFIG_FILE), &config)?;
    println!(
        "generated {} samples of dimension {} in {}",
        config.n_samples,
        config.input_dim,
        a.out.display()
    );
    Ok(())
}
