//! Photograph classification through a chat-completions style endpoint.
//!
//! Request body:
//!
//! ```json
//! {"model": "...", "temperature": 0, "max_tokens": 5,
//!  "messages": [{"role": "user", "content": [
//!    {"type": "text", "text": "<prompt>"},
//!    {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}]}]}
//! ```
//!
//! The answer is read from `choices[0].message.content`, or from a top-level
//! `text` field for providers that return plain completions. The API key, if
//! any, comes from the environment variable named in the config and is sent
//! as a bearer token.

use std::sync::Arc;

use base64::Engine as _;
use lifespan_core::curation::{parse_photo_answer, PhotoVerdict};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::transport::{HttpRequest, HttpTransport};

pub const DEFAULT_PROMPT: &str = include_str!("../../prompts/photo_v1.txt");
pub const DEFAULT_API_KEY_ENV: &str = "LIFESPAN_VLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VlmConfig {
    pub endpoint: String,
    pub model: String,
    pub prompt: String,
    pub prompt_version: String,
    /// Total attempts per image, covering both transport failures and
    /// unparseable answers.
    pub max_attempts: u32,
    pub timeout_secs: u64,
    pub api_key_env: String,
}

impl Default for VlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            prompt: DEFAULT_PROMPT.trim().into(),
            prompt_version: "photo_v1".into(),
            max_attempts: 2,
            timeout_secs: 30,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub verdict: PhotoVerdict,
    /// Text of the last answer received, if any.
    pub raw_response: Option<String>,
    pub attempts: u32,
}

pub struct VlmClient {
    config: VlmConfig,
    api_key: Option<String>,
    transport: Arc<dyn HttpTransport>,
}

impl VlmClient {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: VlmConfig, transport: Arc<dyn HttpTransport>) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self {
            config,
            api_key,
            transport,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn config(&self) -> &VlmConfig {
        &self.config
    }

    pub fn build_request(&self, image: &[u8]) -> HttpRequest {
        let mime = image::guess_format(image)
            .map(|f| f.to_mime_type())
            .unwrap_or("application/octet-stream");
        let data = base64::engine::general_purpose::STANDARD.encode(image);
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "max_tokens": 5,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": self.config.prompt},
                    {"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{data}")}},
                ],
            }],
        });
        let mut req = HttpRequest::post_json(&self.config.endpoint, serde_json::to_vec(&body).expect("json"));
        if let Some(key) = &self.api_key {
            req.headers.push(("Authorization".into(), format!("Bearer {key}")));
        }
        req
    }

    pub fn classify(&self, image: &[u8]) -> Classification {
        let request = self.build_request(image);
        let mut raw_response = None;
        let attempts = self.config.max_attempts.max(1);
        for attempt in 1..=attempts {
            match self.transport.send(&request) {
                Ok(resp) if resp.is_success() => {
                    if let Some(text) = answer_text(&resp.body) {
                        let verdict = parse_photo_answer(&text);
                        raw_response = Some(text);
                        if verdict != PhotoVerdict::Unknown {
                            return Classification {
                                verdict,
                                raw_response,
                                attempts: attempt,
                            };
                        }
                    } else {
                        log::warn!("unreadable VLM response body");
                    }
                }
                Ok(resp) => log::warn!("VLM endpoint returned status {}", resp.status),
                Err(e) => log::warn!("VLM request failed: {e}"),
            }
        }
        Classification {
            verdict: PhotoVerdict::Unknown,
            raw_response,
            attempts,
        }
    }
}

/// Extracts the model's answer from a response body.
pub fn answer_text(body: &[u8]) -> Option<String> {
    let v: Value = serde_json::from_slice(body).ok()?;
    let content = &v["choices"][0]["message"]["content"];
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(" "),
        _ => v["text"].as_str().or_else(|| v["choices"][0]["text"].as_str())?.to_owned(),
    };
    Some(text)
}
