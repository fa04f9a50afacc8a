//! Recorded-response curation fixtures shared by the integration tests.
#![allow(dead_code)]

use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use image::{ImageFormat, Rgb, RgbImage};
use lifespan::curation::transport::{FixtureEntry, HttpRequest, RecordedOutcome, RecordedTransport};
use lifespan::curation::wikidata::entity_json;
use lifespan::curation::{
    CurationClients, RawRecord, VlmClient, VlmConfig, WikidataClient, WikidataConfig,
};
use lifespan::core::curation::{fractional_year, RejectReason};
use lifespan::core::DatasetTag;
use serde_json::json;

pub const VLM_ENDPOINT: &str = "http://vlm.invalid/v1/chat/completions";
pub const WIKIDATA_BASE: &str = "http://wikidata.invalid";

pub fn vlm_config() -> VlmConfig {
    VlmConfig {
        endpoint: VLM_ENDPOINT.into(),
        ..VlmConfig::default()
    }
}

pub fn wikidata_config() -> WikidataConfig {
    WikidataConfig {
        base_url: WIKIDATA_BASE.into(),
        ..WikidataConfig::default()
    }
}

pub fn clients(transport: Arc<RecordedTransport>) -> CurationClients {
    CurationClients {
        vlm: Some(VlmClient::new(vlm_config(), transport.clone()).with_api_key(None)),
        wikidata: Some(WikidataClient::new(wikidata_config(), transport)),
    }
}

pub fn png(width: u32, height: u32, gray: bool, seed: u32) -> Vec<u8> {
    let img = RgbImage::from_fn(width, height, |x, y| {
        let v = ((x * 7 + y * 3 + seed * 31) % 200) as u8 + 20;
        if gray {
            Rgb([v, v, v])
        } else {
            Rgb([v, (y * 5 + seed) as u8, 255 - v])
        }
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).unwrap();
    out.into_inner()
}

fn chat(answer: &str) -> RecordedOutcome {
    RecordedOutcome::ok(json!({"choices": [{"message": {"role": "assistant", "content": answer}}]}).to_string())
}

pub struct Fixture {
    pub raw: Vec<RawRecord>,
    pub entries: Vec<FixtureEntry>,
    /// Expected rejection reasons per record, in input order.
    pub expected: Vec<Vec<RejectReason>>,
    /// Expected number of HTTP requests for a full run.
    pub expected_calls: usize,
    /// Precise death dates of the records expected to be accepted.
    pub accepted_death_dates: Vec<(String, f64)>,
}

impl Fixture {
    pub fn transport(&self) -> Arc<RecordedTransport> {
        Arc::new(RecordedTransport::from_entries(self.entries.clone()).unwrap())
    }

    pub fn accepted_ids(&self) -> Vec<&str> {
        self.raw
            .iter()
            .zip(&self.expected)
            .filter(|(_, e)| e.is_empty())
            .map(|(r, _)| r.id.as_str())
            .collect()
    }
}

/// Writes `n` images into `dir` and records matching service responses.
///
/// Record `i` exercises outcome `i % 10`: too small, grayscale, painting,
/// VLM timeouts, year-only death date, missing file, corrupt file, unknown
/// entity, accepted, accepted after one unparseable answer. Every tenth
/// accepted-looking record from index 40 on has a death date before its
/// photo date.
pub fn build(dir: &Path, n: usize) -> Fixture {
    let vlm = VlmClient::new(vlm_config(), Arc::new(RecordedTransport::new())).with_api_key(None);
    let wd = WikidataClient::new(wikidata_config(), Arc::new(RecordedTransport::new()));
    let mut fx = Fixture {
        raw: Vec::new(),
        entries: Vec::new(),
        expected: Vec::new(),
        expected_calls: 0,
        accepted_death_dates: Vec::new(),
    };
    for i in 0..n {
        let kind = i % 10;
        let id = format!("s{i:03}");
        let image_path = format!("img/{id}.png");
        let entity = format!("Q{}", 1000 + i);
        let photo_date = 1950.0 + (i % 20) as f64;
        let death_year = if kind == 8 && i >= 40 { 1940 } else { 1980 + (i % 7) as i64 };
        let bytes = match kind {
            0 => png(150, 300, false, i as u32),
            1 => png(300, 300, true, i as u32),
            6 => b"\x89PNG\r\n\x1a\ntruncated".to_vec(),
            _ => png(220 + (i % 5) as u32 * 10, 240, false, i as u32),
        };
        if kind != 5 {
            let path = dir.join(&image_path);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(path, &bytes).unwrap();
        }
        let vlm_outcomes = match kind {
            2 => vec![chat("No. This is a painting of a man.")],
            3 => vec![RecordedOutcome::Timeout, RecordedOutcome::Timeout],
            9 => vec![chat("I am not sure"), chat("Yes")],
            _ => vec![chat("yes")],
        };
        let day_claim = format!("+{death_year}-06-30T00:00:00Z");
        let wd_outcome = match kind {
            4 => RecordedOutcome::ok(entity_json(&entity, &[("+1981-00-00T00:00:00Z", 9, "normal")])),
            7 => RecordedOutcome::Response {
                status: 404,
                body: String::new(),
            },
            _ => RecordedOutcome::ok(entity_json(&entity, &[(&day_claim, 11, "normal")])),
        };
        let local_ok = matches!(kind, 2 | 3 | 4 | 7 | 8 | 9);
        if local_ok {
            fx.entries.push(RecordedTransport::entry_for(&vlm.build_request(&bytes), vlm_outcomes));
            fx.entries.push(RecordedTransport::entry_for(
                &HttpRequest::get(wd.entity_url(&entity)),
                vec![wd_outcome],
            ));
            fx.expected_calls += match kind {
                3 | 9 => 2,
                _ => 1,
            } + 1;
        }
        let expected = match kind {
            0 => vec![RejectReason::TooSmall],
            1 => vec![RejectReason::Grayscale],
            2 => vec![RejectReason::NotPhotograph],
            3 => vec![RejectReason::PhotoUnverified],
            4 | 7 => vec![RejectReason::NoPreciseDeathDate],
            5 | 6 => vec![RejectReason::ImageUnavailable],
            8 if i >= 40 => vec![RejectReason::InvalidRecord],
            _ => vec![],
        };
        if expected.is_empty() {
            fx.accepted_death_dates.push((id.clone(), fractional_year(death_year, 6, 30)));
        }
        fx.expected.push(expected);
        fx.raw.push(RawRecord {
            id,
            image_path,
            birth_date: 1900.0 + i as f64 * 0.5,
            photo_date,
            death_date: Some(1985.0),
            dataset_tag: DatasetTag::Legacy,
            wikidata_id: Some(entity),
        });
    }
    fx
}
