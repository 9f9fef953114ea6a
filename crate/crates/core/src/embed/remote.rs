//! Client side of the `/embed` HTTP protocol.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider};

/// Texts per `/embed` request accepted by the server.
pub const MAX_TEXTS_PER_REQUEST: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f32>>,
    pub model_id: String,
    pub chunked: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerInfo {
    pub model_id: String,
    pub dimension: usize,
    pub max_tokens: usize,
    #[serde(default)]
    pub revision: String,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Attempts made while the server answers 503 (model loading).
    pub max_retries: u32,
    pub retry_backoff: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(120),
            max_retries: 5,
            retry_backoff: Duration::from_millis(500),
        }
    }
}

pub struct RemoteProvider {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    info: ServerInfo,
    id: String,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("endpoint", &self.cfg.endpoint)
            .field("info", &self.info)
            .finish()
    }
}

impl RemoteProvider {
    /// Queries `/info` and validates the declared dimension.
    pub fn connect(cfg: RemoteConfig) -> Result<Self, EmbedError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        let url = format!("{}/info", cfg.endpoint.trim_end_matches('/'));
        let text = request(&cfg, || agent.get(&url).call())?;
        let info: ServerInfo =
            serde_json::from_str(&text).map_err(|e| EmbedError::Protocol(format!("/info: {e}")))?;
        if info.dimension == 0 || info.max_tokens == 0 {
            return Err(EmbedError::Protocol(
                "/info declares a zero dimension or budget".into(),
            ));
        }
        let id = if info.revision.is_empty() {
            format!("remote:{}", info.model_id)
        } else {
            format!("remote:{}@{}", info.model_id, info.revision)
        };
        Ok(Self {
            cfg,
            agent,
            info,
            id,
        })
    }

    pub fn info(&self) -> &ServerInfo {
        &self.info
    }

    pub fn endpoint(&self) -> &str {
        &self.cfg.endpoint
    }

    fn post_embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let url = format!("{}/embed", self.cfg.endpoint.trim_end_matches('/'));
        let body = serde_json::json!({ "texts": texts });
        let text = request(&self.cfg, || self.agent.post(&url).send_json(&body))?;
        let resp: EmbedResponse = serde_json::from_str(&text)
            .map_err(|e| EmbedError::Protocol(format!("/embed: {e}")))?;
        if resp.embeddings.len() != texts.len() || resp.chunked.len() != texts.len() {
            return Err(EmbedError::Protocol(format!(
                "/embed returned {} embeddings and {} chunk flags for {} texts",
                resp.embeddings.len(),
                resp.chunked.len(),
                texts.len()
            )));
        }
        if resp.model_id != self.info.model_id {
            return Err(EmbedError::Protocol(format!(
                "model changed from {} to {}",
                self.info.model_id, resp.model_id
            )));
        }
        for v in &resp.embeddings {
            super::check_vector(v, self.info.dimension)?;
        }
        Ok(resp.embeddings)
    }
}

fn request<F>(cfg: &RemoteConfig, send: F) -> Result<String, EmbedError>
where
    F: Fn() -> Result<ureq::http::Response<ureq::Body>, ureq::Error>,
{
    let mut attempt = 0;
    loop {
        let mut resp = send().map_err(|e| EmbedError::Http(format!("{}: {e}", cfg.endpoint)))?;
        let status = resp.status().as_u16();
        if status == 200 {
            return resp
                .body_mut()
                .read_to_string()
                .map_err(|e| EmbedError::Http(e.to_string()));
        }
        if status != 503 || attempt >= cfg.max_retries {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(EmbedError::Http(format!(
                "{} answered {status}: {}",
                cfg.endpoint,
                detail.chars().take(200).collect::<String>()
            )));
        }
        attempt += 1;
        std::thread::sleep(cfg.retry_backoff);
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.info.dimension
    }

    fn token_budget(&self) -> usize {
        self.info.max_tokens
    }

    fn embed_chunk(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        Ok(self.post_embed(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for group in texts.chunks(MAX_TEXTS_PER_REQUEST) {
            out.extend(self.post_embed(group)?);
        }
        Ok(out)
    }
}
