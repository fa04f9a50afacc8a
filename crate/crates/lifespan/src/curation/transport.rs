//! Minimal blocking HTTP abstraction so the curation clients can run against
//! a live endpoint, recorded fixtures, or nothing at all.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: "GET".into(),
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: Vec<u8>) -> Self {
        Self {
            method: "POST".into(),
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(body),
        }
    }

    /// Lookup key for recorded responses. Headers are excluded so that
    /// credentials never end up in fixtures.
    pub fn fixture_key(&self) -> String {
        format!("{} {} {}", self.method, self.url, body_digest(self.body.as_deref()))
    }
}

/// Hex SHA-256 of a request body, or empty for bodiless requests.
pub fn body_digest(body: Option<&[u8]>) -> String {
    body.map(|b| hex::encode(Sha256::digest(b))).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
    #[error("offline transport refused {0}")]
    Offline(String),
    #[error("no recorded response for {0}")]
    NoFixture(String),
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Live transport backed by a blocking reqwest client.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("lifespan/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let method = reqwest::Method::from_bytes(request.method.as_bytes())
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let mut builder = self.client.request(method, &request.url);
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let body = response
            .bytes()
            .map_err(|e| TransportError::Network(e.to_string()))?
            .to_vec();
        Ok(HttpResponse { status, body })
    }
}

/// Refuses every request. Counts attempts so tests can assert none were made.
#[derive(Debug, Default)]
pub struct OfflineTransport {
    attempts: AtomicUsize,
}

impl OfflineTransport {
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl HttpTransport for OfflineTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Offline(request.url.clone()))
    }
}

/// One recorded outcome: either a response or a transport failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RecordedOutcome {
    Response { status: u16, body: String },
    Timeout,
    NetworkError { message: String },
}

impl RecordedOutcome {
    pub fn ok(body: impl Into<String>) -> Self {
        Self::Response {
            status: 200,
            body: body.into(),
        }
    }

    fn to_result(&self) -> Result<HttpResponse, TransportError> {
        match self {
            Self::Response { status, body } => Ok(HttpResponse {
                status: *status,
                body: body.clone().into_bytes(),
            }),
            Self::Timeout => Err(TransportError::Timeout),
            Self::NetworkError { message } => Err(TransportError::Network(message.clone())),
        }
    }
}

/// A fixture entry. Successive calls with the same key replay `outcomes` in
/// order; the last outcome repeats once the list is exhausted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub method: String,
    pub url: String,
    #[serde(default)]
    pub body_sha256: String,
    pub outcomes: Vec<RecordedOutcome>,
}

impl FixtureEntry {
    fn key(&self) -> String {
        format!("{} {} {}", self.method, self.url, self.body_sha256)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: std::path::PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("fixture entry for {0} has no outcomes")]
    NoOutcomes(String),
}

/// Replays recorded responses keyed by method, URL and body digest.
/// Unmatched requests fail with [`TransportError::NoFixture`]; nothing is
/// ever sent over the network.
#[derive(Debug, Default)]
pub struct RecordedTransport {
    entries: HashMap<String, Vec<RecordedOutcome>>,
    cursors: Mutex<HashMap<String, usize>>,
    calls: AtomicUsize,
    unmatched: AtomicUsize,
}

impl RecordedTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<FixtureEntry>) -> Result<Self, FixtureError> {
        let mut t = Self::new();
        for e in entries {
            if e.outcomes.is_empty() {
                return Err(FixtureError::NoOutcomes(e.key()));
            }
            t.entries.insert(e.key(), e.outcomes);
        }
        Ok(t)
    }

    /// Reads a JSON array of [`FixtureEntry`].
    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.to_owned(),
            source,
        })?;
        let entries = serde_json::from_str(&text).map_err(|source| FixtureError::Json {
            path: path.to_owned(),
            source,
        })?;
        Self::from_entries(entries)
    }

    pub fn record(&mut self, request: &HttpRequest, outcomes: Vec<RecordedOutcome>) {
        assert!(!outcomes.is_empty(), "a fixture needs at least one outcome");
        self.entries.insert(request.fixture_key(), outcomes);
    }

    pub fn entry_for(request: &HttpRequest, outcomes: Vec<RecordedOutcome>) -> FixtureEntry {
        FixtureEntry {
            method: request.method.clone(),
            url: request.url.clone(),
            body_sha256: body_digest(request.body.as_deref()),
            outcomes,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn unmatched(&self) -> usize {
        self.unmatched.load(Ordering::SeqCst)
    }
}

impl HttpTransport for RecordedTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = request.fixture_key();
        let Some(outcomes) = self.entries.get(&key) else {
            self.unmatched.fetch_add(1, Ordering::SeqCst);
            return Err(TransportError::NoFixture(key));
        };
        let idx = {
            let mut cursors = self.cursors.lock().expect("cursor lock");
            let c = cursors.entry(key).or_insert(0);
            let idx = (*c).min(outcomes.len() - 1);
            *c += 1;
            idx
        };
        outcomes[idx].to_result()
    }
}
