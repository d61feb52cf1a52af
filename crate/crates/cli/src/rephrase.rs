//! HTTP rephrase client.
//!
//! One POST per rephrasing. The request body is JSON
//! `{"model": ..., "prompt": ..., "attempt": n}`; the response body is plain
//! text, of which the first non-empty line is kept.

use std::time::Duration;

use metasql_core::diversify::{DiversifyError, Rephraser};
use serde_json::json;

use crate::config::RephraseConfig;

pub const ENDPOINT_VAR: &str = "METASQL_REPHRASE_ENDPOINT";
pub const API_KEY_VAR: &str = "METASQL_REPHRASE_API_KEY";
pub const MODEL_VAR: &str = "METASQL_REPHRASE_MODEL";

const DEFAULT_PREAMBLE: &str =
    "Rewrite the instruction below with different wording and the same meaning. Reply with the rewritten instruction on one line.";

pub struct HttpRephraser {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    preamble: String,
    api_key: Option<String>,
}

impl HttpRephraser {
    /// `None` when no endpoint is configured.
    pub fn from_settings(settings: &RephraseConfig) -> Option<Self> {
        let endpoint = settings.endpoint.clone()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(settings.timeout_ms)))
            .build()
            .into();
        Some(HttpRephraser {
            agent,
            endpoint,
            model: settings.model.clone().unwrap_or_default(),
            preamble: settings.preamble.clone().unwrap_or_else(|| DEFAULT_PREAMBLE.into()),
            api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Rephraser for HttpRephraser {
    fn rephrase(&self, instruction: &str, attempt: u32) -> Result<String, DiversifyError> {
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let body = json!({
            "model": self.model,
            "prompt": format!("{}\n\n{}", self.preamble, instruction),
            "attempt": attempt,
        });
        let mut response = request.send_json(&body).map_err(|e| match e {
            ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::Io(_)
            | ureq::Error::Timeout(_) => DiversifyError::Unreachable(e.to_string()),
            other => DiversifyError::Request(other.to_string()),
        })?;
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| DiversifyError::Request(e.to_string()))
    }
}
