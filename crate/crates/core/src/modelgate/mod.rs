//! The only path from the harness to language models and embedders.
//!
//! Backends implement [`CompletionBackend`] and [`Embedder`]:
//!
//! - [`HttpBackend`] / [`HttpEmbedder`] talk to chat-completion style endpoints.
//! - [`RecordingBackend`] / [`RecordingEmbedder`] wrap a live backend and capture every answer
//!   into a [`ReplayStore`].
//! - [`ReplayBackend`] / [`ReplayEmbedder`] answer only from a store; a miss is an error.
//! - [`HashingEmbedder`] is a local, dependency-free embedder for offline runs.

mod embed;
mod http;
mod replay;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use async_trait::async_trait;
use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::hashing::json_hash;
use crate::prompts::RenderedPrompt;

pub use embed::{CheckedEmbedder, HashingEmbedder};
pub use http::{HttpBackend, HttpEmbedder};
pub use replay::{
    RecordingBackend, RecordingEmbedder, ReplayBackend, ReplayEmbedder, ReplayEntry, ReplayStore,
};

#[derive(Debug, thiserror::Error)]
pub enum GateError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model {model_id}: credential variable {env} is not set")]
    MissingCredential { model_id: String, env: String },
    #[error("{endpoint}: transport error after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("{endpoint}: no answer within {timeout_s} s after {attempts} attempt(s)")]
    Timeout {
        endpoint: String,
        timeout_s: f64,
        attempts: u32,
    },
    #[error("{endpoint}: protocol error (status {status:?}): {body_excerpt}")]
    Protocol {
        endpoint: String,
        status: Option<u16>,
        body_excerpt: String,
    },
    #[error("replay store has no entry for fingerprint {0}")]
    ReplayMiss(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedder {embedder_id} returned dimension {got}, expected {expected}")]
    DimensionMismatch {
        embedder_id: String,
        expected: usize,
        got: usize,
    },
    #[error("replay store: {0}")]
    Store(String),
}

impl GateError {
    /// Whether repeating the same call could plausibly succeed.
    pub fn retriable(&self) -> bool {
        match self {
            GateError::Transport { .. } | GateError::Timeout { .. } => true,
            GateError::Protocol { status: Some(s), .. } => *s == 429 || *s >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_s: default_timeout(),
            max_retries: default_retries(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), GateError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GateError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(GateError::Config("max_tokens must be positive".into()));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(GateError::Config(format!("timeout_s must be > 0, got {}", self.timeout_s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpointConfig {
    pub model_id: String,
    pub base_url: Url,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub params: ModelParams,
    /// Documentation only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter_count_b: Option<f64>,
    /// Model name sent on the wire; defaults to `model_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_model: Option<String>,
}

impl ModelEndpointConfig {
    /// A config for a model that is only ever answered from a replay store.
    pub fn offline(model_id: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            base_url: Url::parse("http://127.0.0.1/").expect("static url"),
            auth_env: None,
            params: ModelParams::default(),
            parameter_count_b: None,
            remote_model: None,
        }
    }

    pub fn wire_model(&self) -> &str {
        self.remote_model.as_deref().unwrap_or(&self.model_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub embedder_id: String,
    pub base_url: Url,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_model: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

/// Environment variable conventionally holding a model's credential.
pub fn default_auth_env(model_id: &str) -> String {
    let id: String = model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("LICENSEKIT_{id}_KEY")
}

pub(crate) fn read_credential(owner: &str, auth_env: Option<&str>) -> Result<Option<String>, GateError> {
    match auth_env {
        None => Ok(None),
        Some(env) => std::env::var(env).map(Some).map_err(|_| GateError::MissingCredential {
            model_id: owner.to_string(),
            env: env.to_string(),
        }),
    }
}

/// Models and embedders available to a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    #[serde(default)]
    pub models: Vec<ModelEndpointConfig>,
    #[serde(default)]
    pub embedders: Vec<EmbedderConfig>,
}

impl Registry {
    pub fn from_json(json: &str) -> Result<Self, GateError> {
        let registry: Registry = serde_json::from_str(json).map_err(|e| GateError::Config(e.to_string()))?;
        registry.validate()?;
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<Self, GateError> {
        let json = std::fs::read_to_string(path).map_err(|e| GateError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn validate(&self) -> Result<(), GateError> {
        let mut ids = HashSet::new();
        for m in &self.models {
            if m.model_id.is_empty() {
                return Err(GateError::Config("empty model_id".into()));
            }
            if !ids.insert(m.model_id.as_str()) {
                return Err(GateError::Config(format!("duplicate model_id {}", m.model_id)));
            }
            m.params.validate()?;
        }
        let mut ids = HashSet::new();
        for e in &self.embedders {
            if !ids.insert(e.embedder_id.as_str()) {
                return Err(GateError::Config(format!("duplicate embedder_id {}", e.embedder_id)));
            }
            if e.timeout_s.is_nan() || e.timeout_s <= 0.0 {
                return Err(GateError::Config(format!("embedder {}: timeout_s must be > 0", e.embedder_id)));
            }
        }
        Ok(())
    }

    pub fn model(&self, model_id: &str) -> Option<&ModelEndpointConfig> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    pub fn embedder(&self, embedder_id: &str) -> Option<&EmbedderConfig> {
        self.embedders.iter().find(|e| e.embedder_id == embedder_id)
    }
}

#[derive(Serialize)]
struct CompletionKey<'a> {
    model_id: &'a str,
    system: &'a str,
    user: &'a str,
    temperature: f64,
    max_tokens: u32,
}

/// Stable hash of everything that determines a completion.
pub fn request_fingerprint(model_id: &str, system_text: &str, user_text: &str, params: &ModelParams) -> String {
    json_hash(&CompletionKey {
        model_id,
        system: system_text,
        user: user_text,
        temperature: params.temperature,
        max_tokens: params.max_tokens,
    })
}

pub fn prompt_fingerprint(config: &ModelEndpointConfig, prompt: &RenderedPrompt) -> String {
    request_fingerprint(&config.model_id, &prompt.system_text, &prompt.user_text, &config.params)
}

#[derive(Serialize)]
struct EmbeddingKey<'a> {
    embedder_id: &'a str,
    text: &'a str,
}

pub fn embedding_fingerprint(embedder_id: &str, text: &str) -> String {
    json_hash(&EmbeddingKey { embedder_id, text })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub latency_s: f64,
    pub model_id: String,
    pub request_fingerprint: String,
}

#[async_trait]
pub trait CompletionBackend: Send + Sync {
    async fn complete(&self, config: &ModelEndpointConfig, prompt: &RenderedPrompt) -> Result<ModelResponse, GateError>;
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn embedder_id(&self) -> &str;

    async fn embed(&self, text: &str) -> Result<Vec<f64>, GateError>;
}

#[async_trait]
impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    async fn complete(&self, config: &ModelEndpointConfig, prompt: &RenderedPrompt) -> Result<ModelResponse, GateError> {
        (**self).complete(config, prompt).await
    }
}

#[async_trait]
impl<T: Embedder + ?Sized> Embedder for std::sync::Arc<T> {
    fn embedder_id(&self) -> &str {
        (**self).embedder_id()
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, GateError> {
        (**self).embed(text).await
    }
}

/// Completes every prompt with at most `limit` requests in flight.
///
/// Results are keyed by license id, so their order never depends on completion order.
pub async fn complete_many(
    backend: &dyn CompletionBackend,
    config: &ModelEndpointConfig,
    prompts: &[RenderedPrompt],
    limit: usize,
) -> Result<BTreeMap<String, ModelResponse>, GateError> {
    let limit = limit.max(1);
    stream::iter(prompts)
        .map(|p| async move { backend.complete(config, p).await.map(|r| (p.license_id.clone(), r)) })
        .buffer_unordered(limit)
        .try_collect()
        .await
}
