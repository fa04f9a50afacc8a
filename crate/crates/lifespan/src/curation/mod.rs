//! Dataset curation: local image checks, photograph verification through a
//! vision-language model, and precise death dates from Wikidata.
//!
//! Each raw record is decided independently. Local checks run first and a
//! record that fails them is not sent to any remote service. Decisions come
//! back in input order whatever the completion order of the workers.

pub mod image_check;
pub mod transport;
pub mod vlm;
pub mod wikidata;

use std::path::{Path, PathBuf};

use lifespan_core::curation::{CurationCriteria, CurationDecision, PhotoVerdict, RejectReason};
use lifespan_core::{DatasetTag, SampleRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::{parse_json_lines, read_text, ManifestError};

pub use image_check::{check_image_local, ImageCheck};
pub use transport::{HttpTransport, OfflineTransport, RecordedTransport, ReqwestTransport};
pub use vlm::{VlmClient, VlmConfig};
pub use wikidata::{WikidataClient, WikidataConfig};

/// An uncurated manifest line. `death_date` is the coarse date from the
/// source listing; the curated manifest uses the Wikidata date instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub image_path: String,
    pub birth_date: f64,
    pub photo_date: f64,
    #[serde(default)]
    pub death_date: Option<f64>,
    pub dataset_tag: DatasetTag,
    #[serde(default)]
    pub wikidata_id: Option<String>,
}

pub fn parse_raw_manifest(path: &Path, text: &str) -> Result<Vec<RawRecord>, ManifestError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (line, r) in parse_json_lines::<RawRecord>(path, text)? {
        if !seen.insert(r.id.clone()) {
            return Err(ManifestError::DuplicateId {
                path: path.to_owned(),
                line,
                id: r.id,
            });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_raw_manifest(path: &Path) -> Result<Vec<RawRecord>, ManifestError> {
    parse_raw_manifest(path, &read_text(path)?)
}

/// Remote services used by [`curate`]. `None` skips the corresponding
/// check entirely (dry runs); both are normally present.
#[derive(Default)]
pub struct CurationClients {
    pub vlm: Option<VlmClient>,
    pub wikidata: Option<WikidataClient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationOptions {
    /// Directory that relative image paths are resolved against.
    pub image_root: PathBuf,
    /// Records processed concurrently.
    pub parallelism: usize,
    /// Local checks only; no client is consulted and coarse death dates are kept.
    pub dry_run: bool,
}

impl Default for CurationOptions {
    fn default() -> Self {
        Self {
            image_root: PathBuf::from("."),
            parallelism: 8,
            dry_run: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurationOutcome {
    pub accepted: Vec<SampleRecord>,
    pub decisions: Vec<CurationDecision>,
}

impl CurationOutcome {
    pub fn accepted_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.accepted()).count()
    }

    pub fn rejected_count(&self) -> usize {
        self.decisions.len() - self.accepted_count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn curate_one(
    raw: &RawRecord,
    criteria: &CurationCriteria,
    clients: &CurationClients,
    options: &CurationOptions,
) -> (CurationDecision, Option<SampleRecord>) {
    let mut decision = CurationDecision::new(raw.id.clone());
    let image = match std::fs::read(options.image_root.join(&raw.image_path)) {
        Ok(bytes) => bytes,
        Err(e) => {
            log::info!("{}: image unavailable: {e}", raw.id);
            decision.reject(RejectReason::ImageUnavailable);
            return (decision, None);
        }
    };
    let local = check_image_local(&image, criteria);
    for r in &local.reasons {
        decision.reject(*r);
    }
    if !decision.accepted() {
        return (decision, None);
    }

    let mut death_date = raw.death_date;
    if !options.dry_run {
        if criteria.require_photograph {
            if let Some(vlm) = &clients.vlm {
                let c = vlm.classify(&image);
                decision.set_vlm_raw_response(c.raw_response);
                match c.verdict {
                    PhotoVerdict::Photograph => {}
                    PhotoVerdict::NotPhotograph => decision.reject(RejectReason::NotPhotograph),
                    PhotoVerdict::Unknown => {
                        log::info!("{}: photograph check inconclusive", raw.id);
                        decision.reject(RejectReason::PhotoUnverified);
                    }
                }
            }
        }
        if let Some(wd) = &clients.wikidata {
            death_date = match raw.wikidata_id.as_deref() {
                Some(q) => match wd.death_date(q, criteria.min_date_precision) {
                    Ok(d) => Some(d),
                    Err(e) => {
                        log::info!("{}: no precise death date: {e}", raw.id);
                        None
                    }
                },
                None => None,
            };
        }
    }
    let Some(death_date) = death_date else {
        decision.reject(RejectReason::NoPreciseDeathDate);
        return (decision, None);
    };
    if !decision.accepted() {
        return (decision, None);
    }
    match SampleRecord::new(
        raw.id.clone(),
        raw.image_path.clone(),
        raw.birth_date,
        raw.photo_date,
        death_date,
        raw.dataset_tag,
    ) {
        Ok(record) => (decision, Some(record)),
        Err(e) => {
            log::info!("{}: {e}", raw.id);
            decision.reject(RejectReason::InvalidRecord);
            (decision, None)
        }
    }
}

/// Decides every record. One decision per input, in input order; the
/// accepted records carry the precise death date.
pub fn curate(
    records: &[RawRecord],
    criteria: &CurationCriteria,
    clients: &CurationClients,
    options: &CurationOptions,
) -> Result<CurationOutcome, CurationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()?;
    let results: Vec<_> = pool.install(|| {
        records
            .par_iter()
            .map(|r| curate_one(r, criteria, clients, options))
            .collect()
    });
    let mut accepted = Vec::new();
    let mut decisions = Vec::with_capacity(results.len());
    for (d, r) in results {
        debug_assert_eq!(d.accepted(), r.is_some());
        accepted.extend(r);
        decisions.push(d);
    }
    Ok(CurationOutcome { accepted, decisions })
}
