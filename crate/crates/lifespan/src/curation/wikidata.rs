//! Precise death dates from the Wikidata entity API (`P570`, date of death).

use std::sync::Arc;

use lifespan_core::curation::{DateError, WikidataTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::transport::{HttpRequest, HttpTransport, TransportError};

pub const DATE_OF_DEATH: &str = "P570";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WikidataConfig {
    pub base_url: String,
    pub max_attempts: u32,
    pub timeout_secs: u64,
}

impl Default for WikidataConfig {
    fn default() -> Self {
        Self {
            base_url: "https://www.wikidata.org".into(),
            max_attempts: 2,
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WikidataError {
    #[error("invalid entity id {0:?}")]
    BadEntityId(String),
    #[error("entity {0} not found")]
    MissingEntity(String),
    #[error("entity {0} has no usable date-of-death claim")]
    MissingClaim(String),
    #[error("unreadable entity JSON")]
    BadJson,
    #[error("HTTP status {0}")]
    Status(u16),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Date(#[from] DateError),
}

pub struct WikidataClient {
    config: WikidataConfig,
    transport: Arc<dyn HttpTransport>,
}

fn valid_entity_id(id: &str) -> bool {
    id.len() > 1 && id.starts_with('Q') && id[1..].bytes().all(|b| b.is_ascii_digit())
}

impl WikidataClient {
    pub fn new(config: WikidataConfig, transport: Arc<dyn HttpTransport>) -> Self {
        Self { config, transport }
    }

    pub fn entity_url(&self, entity: &str) -> String {
        format!(
            "{}/wiki/Special:EntityData/{entity}.json",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn fetch_entity(&self, entity: &str) -> Result<Vec<u8>, WikidataError> {
        let request = HttpRequest::get(self.entity_url(entity));
        let mut last = WikidataError::MissingEntity(entity.into());
        for _ in 0..self.config.max_attempts.max(1) {
            match self.transport.send(&request) {
                Ok(r) if r.is_success() => return Ok(r.body),
                Ok(r) if r.status == 404 => return Err(WikidataError::MissingEntity(entity.into())),
                Ok(r) => last = WikidataError::Status(r.status),
                Err(e) => last = e.into(),
            }
        }
        Err(last)
    }

    /// Highest-precision non-deprecated date of death, as a fractional year.
    pub fn death_date(&self, entity: &str, min_precision: u8) -> Result<f64, WikidataError> {
        if !valid_entity_id(entity) {
            return Err(WikidataError::BadEntityId(entity.into()));
        }
        let body = self.fetch_entity(entity)?;
        let time = best_death_claim(&body, entity)?;
        Ok(time.to_fractional_year(min_precision)?)
    }
}

/// Picks the highest-precision date-of-death value; ties prefer the
/// `preferred` rank, then document order.
pub fn best_death_claim(body: &[u8], entity: &str) -> Result<WikidataTime, WikidataError> {
    let v: Value = serde_json::from_slice(body).map_err(|_| WikidataError::BadJson)?;
    let entities = v["entities"].as_object().ok_or(WikidataError::BadJson)?;
    // Redirected ids come back under the target id.
    let ent = entities
        .get(entity)
        .or_else(|| entities.values().next())
        .ok_or_else(|| WikidataError::MissingEntity(entity.into()))?;
    if ent.get("missing").is_some() {
        return Err(WikidataError::MissingEntity(entity.into()));
    }
    let claims = ent["claims"][DATE_OF_DEATH].as_array();
    let mut best: Option<(u8, bool, WikidataTime)> = None;
    for claim in claims.into_iter().flatten() {
        let rank = claim["rank"].as_str().unwrap_or("normal");
        if rank == "deprecated" || claim["mainsnak"]["snaktype"].as_str() != Some("value") {
            continue;
        }
        let value = &claim["mainsnak"]["datavalue"]["value"];
        let (Some(time), Some(precision)) = (value["time"].as_str(), value["precision"].as_u64()) else {
            continue;
        };
        let Ok(precision) = u8::try_from(precision) else { continue };
        let Ok(parsed) = WikidataTime::parse(time, precision) else { continue };
        let preferred = rank == "preferred";
        let better = match &best {
            None => true,
            Some((p, pref, _)) => precision > *p || (precision == *p && preferred && !pref),
        };
        if better {
            best = Some((precision, preferred, parsed));
        }
    }
    best.map(|(_, _, t)| t)
        .ok_or_else(|| WikidataError::MissingClaim(entity.into()))
}

/// Builds a minimal entity document with the given `(time, precision, rank)`
/// death claims, in the shape returned by `Special:EntityData`.
pub fn entity_json(entity: &str, claims: &[(&str, u8, &str)]) -> String {
    let claims: Vec<Value> = claims
        .iter()
        .map(|(time, precision, rank)| {
            serde_json::json!({
                "rank": rank,
                "mainsnak": {
                    "snaktype": "value",
                    "property": DATE_OF_DEATH,
                    "datavalue": {
                        "type": "time",
                        "value": {"time": time, "precision": precision, "calendarmodel": "http://www.wikidata.org/entity/Q1985727"},
                    },
                },
            })
        })
        .collect();
    serde_json::json!({"entities": {entity: {"id": entity, "claims": {DATE_OF_DEATH: claims}}}}).to_string()
}
