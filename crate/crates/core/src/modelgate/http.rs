//! Chat-completion and embedding clients over HTTP.

use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde_json::{json, Value};
use url::Url;

use super::{
    prompt_fingerprint, read_credential, CompletionBackend, Embedder, EmbedderConfig, GateError, ModelEndpointConfig,
    ModelResponse,
};
use crate::prompts::RenderedPrompt;

const BODY_EXCERPT_CHARS: usize = 300;

fn endpoint(base: &Url, path: &str) -> Result<Url, GateError> {
    let mut base = base.clone();
    if !base.path().ends_with('/') {
        let p = format!("{}/", base.path());
        base.set_path(&p);
    }
    base.join(path).map_err(|e| GateError::Config(format!("{base}: {e}")))
}

fn excerpt(body: &str) -> String {
    body.chars().take(BODY_EXCERPT_CHARS).collect()
}

struct Call<'a> {
    url: Url,
    body: Value,
    token: Option<String>,
    timeout: Duration,
    max_retries: u32,
    backoff: Duration,
    client: &'a reqwest::Client,
}

impl Call<'_> {
    /// Posts the body, retrying transport failures and timeouts with exponential backoff.
    /// Returns the parsed JSON and the latency of the attempt that succeeded.
    async fn send(self) -> Result<(Value, f64), GateError> {
        let endpoint = self.url.to_string();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let mut req = self.client.post(self.url.clone()).json(&self.body).timeout(self.timeout);
            if let Some(token) = &self.token {
                req = req.bearer_auth(token);
            }
            let started = Instant::now();
            let result = async {
                let resp = req.send().await?;
                let status = resp.status();
                let text = resp.text().await?;
                Ok::<_, reqwest::Error>((status, text))
            }
            .await;
            let latency = started.elapsed().as_secs_f64();
            let failure = match result {
                Ok((status, text)) if status.is_success() => {
                    let value: Value = serde_json::from_str(&text).map_err(|e| GateError::Protocol {
                        endpoint: endpoint.clone(),
                        status: Some(status.as_u16()),
                        body_excerpt: format!("invalid JSON ({e}): {}", excerpt(&text)),
                    })?;
                    return Ok((value, latency));
                }
                Ok((status, text)) => {
                    return Err(GateError::Protocol {
                        endpoint,
                        status: Some(status.as_u16()),
                        body_excerpt: excerpt(&text),
                    })
                }
                Err(e) => e,
            };
            tracing::warn!(%endpoint, attempt, error = %failure, "request failed");
            if attempt > self.max_retries {
                return Err(if failure.is_timeout() {
                    GateError::Timeout {
                        endpoint,
                        timeout_s: self.timeout.as_secs_f64(),
                        attempts: attempt,
                    }
                } else {
                    GateError::Transport {
                        endpoint,
                        attempts: attempt,
                        message: failure.to_string(),
                    }
                });
            }
            tokio::time::sleep(self.backoff * 2u32.saturating_pow(attempt - 1)).await;
        }
    }
}

fn completion_text(value: &Value) -> Option<&str> {
    let choice = value.get("choices")?.get(0)?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .or_else(|| choice.get("text").and_then(Value::as_str))
}

fn embedding_vector(value: &Value) -> Option<Vec<f64>> {
    let arr = value
        .get("embedding")
        .or_else(|| value.get("data")?.get(0)?.get("embedding"))?
        .as_array()?;
    arr.iter().map(Value::as_f64).collect()
}

/// Client for endpoints speaking the chat-completion wire shape.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::Client,
    backoff: Duration,
}

impl Default for HttpBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpBackend {
    pub fn new() -> Self {
        Self {
            client: reqwest::Client::new(),
            backoff: Duration::from_millis(500),
        }
    }

    /// Delay before the first retry; each later retry doubles it.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }
}

#[async_trait]
impl CompletionBackend for HttpBackend {
    async fn complete(&self, config: &ModelEndpointConfig, prompt: &RenderedPrompt) -> Result<ModelResponse, GateError> {
        config.params.validate()?;
        let token = read_credential(&config.model_id, config.auth_env.as_deref())?;
        let body = json!({
            "model": config.wire_model(),
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": config.params.temperature,
            "max_tokens": config.params.max_tokens,
        });
        let url = endpoint(&config.base_url, "chat/completions")?;
        let call = Call {
            url: url.clone(),
            body,
            token,
            timeout: Duration::from_secs_f64(config.params.timeout_s),
            max_retries: config.params.max_retries,
            backoff: self.backoff,
            client: &self.client,
        };
        let (value, latency_s) = call.send().await?;
        let text = completion_text(&value).ok_or_else(|| GateError::Protocol {
            endpoint: url.to_string(),
            status: Some(200),
            body_excerpt: excerpt(&format!("no completion text in {value}")),
        })?;
        Ok(ModelResponse {
            text: text.to_string(),
            latency_s,
            model_id: config.model_id.clone(),
            request_fingerprint: prompt_fingerprint(config, prompt),
        })
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    config: EmbedderConfig,
    client: reqwest::Client,
    backoff: Duration,
}

impl HttpEmbedder {
    pub fn new(config: EmbedderConfig) -> Self {
        Self {
            config,
            client: reqwest::Client::new(),
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn embedder_id(&self) -> &str {
        &self.config.embedder_id
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, GateError> {
        if text.is_empty() {
            return Err(GateError::EmptyText);
        }
        let token = read_credential(&self.config.embedder_id, self.config.auth_env.as_deref())?;
        let model = self.config.remote_model.as_deref().unwrap_or(&self.config.embedder_id);
        let url = endpoint(&self.config.base_url, "embeddings")?;
        let call = Call {
            url: url.clone(),
            body: json!({"model": model, "input": text}),
            token,
            timeout: Duration::from_secs_f64(self.config.timeout_s),
            max_retries: self.config.max_retries,
            backoff: self.backoff,
            client: &self.client,
        };
        let (value, _) = call.send().await?;
        embedding_vector(&value).ok_or_else(|| GateError::Protocol {
            endpoint: url.to_string(),
            status: Some(200),
            body_excerpt: excerpt(&format!("no embedding in {value}")),
        })
    }
}
