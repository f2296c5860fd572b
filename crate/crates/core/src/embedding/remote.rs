//! Reference HTTP adapter for OpenAI-style `/embeddings` endpoints.
//!
//! Request:  `POST <endpoint>` with `{"model": "...", "input": ["...", ...]}`
//! and `Authorization: Bearer <key>` when a key is configured.
//! Response: `{"data": [{"index": 0, "embedding": [..]}, ...]}`; entries are
//! reordered by `index`.

use std::time::Duration;

use serde::Deserialize;

use super::{EmbeddingProvider, ProviderError, ProviderIdentity};
use crate::error::{Error, Result};

pub const ENV_ENDPOINT: &str = "LANGFAM_EMBED_ENDPOINT";
pub const ENV_API_KEY: &str = "LANGFAM_API_KEY";
pub const ENV_MODEL: &str = "LANGFAM_EMBED_MODEL";
pub const ENV_DIM: &str = "LANGFAM_EMBED_DIM";
pub const ENV_TIMEOUT: &str = "LANGFAM_EMBED_TIMEOUT_SECS";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub dim: usize,
    pub timeout: Duration,
}

impl RemoteConfig {
    /// Reads the `LANGFAM_EMBED_*` / `LANGFAM_API_KEY` variables.
    pub fn from_env() -> Result<Self> {
        Self::from_env_with(None, None, None)
    }

    /// Like [`RemoteConfig::from_env`], with explicit values taking
    /// precedence over the environment.
    pub fn from_env_with(endpoint: Option<String>, model: Option<String>, dim: Option<usize>) -> Result<Self> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let endpoint = endpoint
            .or_else(|| var(ENV_ENDPOINT))
            .ok_or_else(|| Error::InvalidArgument(format!("{ENV_ENDPOINT} is not set")))?;
        let model = model
            .or_else(|| var(ENV_MODEL))
            .ok_or_else(|| Error::InvalidArgument(format!("{ENV_MODEL} is not set")))?;
        let dim = match dim {
            Some(d) => d,
            None => var(ENV_DIM)
                .ok_or_else(|| Error::InvalidArgument(format!("{ENV_DIM} is not set")))?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{ENV_DIM} must be a positive integer")))?,
        };
        let timeout = match var(ENV_TIMEOUT) {
            Some(s) => Duration::from_secs(
                s.parse().map_err(|_| Error::InvalidArgument(format!("{ENV_TIMEOUT} must be seconds")))?,
            ),
            None => Duration::from_secs(60),
        };
        Ok(RemoteConfig { endpoint, api_key: var(ENV_API_KEY), model, dim, timeout })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

pub struct RemoteEmbedder {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::InvalidArgument("remote embedding dimension must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::ProviderUnavailable(e.to_string()))?;
        Ok(RemoteEmbedder { config, client })
    }
}

fn parse_response(body: &str, expected: usize) -> std::result::Result<Vec<Vec<f64>>, ProviderError> {
    let mut parsed: EmbeddingResponse =
        serde_json::from_str(body).map_err(|e| ProviderError::fatal(format!("bad response body: {e}")))?;
    parsed.data.sort_by_key(|d| d.index);
    if parsed.data.len() != expected || parsed.data.iter().enumerate().any(|(i, d)| d.index != i) {
        return Err(ProviderError::fatal(format!(
            "response covers {} of {expected} inputs",
            parsed.data.len()
        )));
    }
    Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
}

impl EmbeddingProvider for RemoteEmbedder {
    fn identity(&self) -> ProviderIdentity {
        ProviderIdentity { name: "remote".into(), model: self.config.model.clone(), dim: self.config.dim }
    }

    fn embed_batch(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ProviderError> {
        let mut req = self
            .client
            .post(&self.config.endpoint)
            .json(&serde_json::json!({ "model": self.config.model, "input": texts }));
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError::transient(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| ProviderError::transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderError::transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(ProviderError::fatal(format!("HTTP {status}: {body}")));
        }
        parse_response(&body, texts.len())
    }
}
