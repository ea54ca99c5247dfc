//! Record/replay store keyed by request fingerprint.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    embedding_fingerprint, prompt_fingerprint, CompletionBackend, Embedder, GateError, ModelEndpointConfig,
    ModelResponse,
};
use crate::prompts::RenderedPrompt;

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub fp: String,
    pub text: String,
    pub latency_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

/// Fingerprint-indexed answers. Serialized as JSON lines sorted by fingerprint, so a store
/// written, read and written again is byte-identical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayStore {
    entries: BTreeMap<String, ReplayEntry>,
}

impl ReplayStore {
    pub fn from_jsonl(text: &str) -> Result<Self, GateError> {
        let mut store = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry =
                serde_json::from_str(line).map_err(|e| GateError::Store(format!("line {}: {e}", i + 1)))?;
            if let Some(prev) = store.entries.get(&entry.fp) {
                if *prev != entry {
                    return Err(GateError::Store(format!(
                        "line {}: conflicting entries for fingerprint {}",
                        i + 1,
                        entry.fp
                    )));
                }
            }
            store.entries.insert(entry.fp.clone(), entry);
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, GateError> {
        let text = std::fs::read_to_string(path).map_err(|e| GateError::Store(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in self.entries.values() {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), GateError> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| GateError::Store(format!("{}: {e}", path.display())))
    }

    /// Inserts or replaces the entry for its fingerprint.
    pub fn insert(&mut self, entry: ReplayEntry) -> Option<ReplayEntry> {
        self.entries.insert(entry.fp.clone(), entry)
    }

    pub fn get(&self, fp: &str) -> Option<&ReplayEntry> {
        self.entries.get(fp)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: ReplayStore) {
        self.entries.extend(other.entries);
    }

    pub fn content_hash(&self) -> String {
        crate::hashing::sha256_hex(self.to_jsonl().as_bytes())
    }
}

/// Answers completions only from a store.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    store: Arc<ReplayStore>,
}

impl ReplayBackend {
    pub fn new(store: Arc<ReplayStore>) -> Self {
        Self { store }
    }
}

#[async_trait]
impl CompletionBackend for ReplayBackend {
    async fn complete(&self, config: &ModelEndpointConfig, prompt: &RenderedPrompt) -> Result<ModelResponse, GateError> {
        let fp = prompt_fingerprint(config, prompt);
        let entry = self.store.get(&fp).ok_or_else(|| GateError::ReplayMiss(fp.clone()))?;
        Ok(ModelResponse {
            text: entry.text.clone(),
            latency_s: entry.latency_s,
            model_id: config.model_id.clone(),
            request_fingerprint: fp,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReplayEmbedder {
    embedder_id: String,
    store: Arc<ReplayStore>,
}

impl ReplayEmbedder {
    pub fn new(embedder_id: &str, store: Arc<ReplayStore>) -> Self {
        Self {
            embedder_id: embedder_id.to_string(),
            store,
        }
    }
}

#[async_trait]
impl Embedder for ReplayEmbedder {
    fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, GateError> {
        if text.is_empty() {
            return Err(GateError::EmptyText);
        }
        let fp = embedding_fingerprint(&self.embedder_id, text);
        self.store
            .get(&fp)
            .and_then(|e| e.embedding.clone())
            .ok_or(GateError::ReplayMiss(fp))
    }
}

/// Forwards to a live backend and captures every successful answer.
pub struct RecordingBackend {
    inner: Arc<dyn CompletionBackend>,
    sink: Arc<Mutex<ReplayStore>>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn CompletionBackend>, sink: Arc<Mutex<ReplayStore>>) -> Self {
        Self { inner, sink }
    }

    pub fn sink(&self) -> Arc<Mutex<ReplayStore>> {
        Arc::clone(&self.sink)
    }
}

#[async_trait]
impl CompletionBackend for RecordingBackend {
    async fn complete(&self, config: &ModelEndpointConfig, prompt: &RenderedPrompt) -> Result<ModelResponse, GateError> {
        let response = self.inner.complete(config, prompt).await?;
        self.sink.lock().expect("replay sink poisoned").insert(ReplayEntry {
            fp: response.request_fingerprint.clone(),
            text: response.text.clone(),
            latency_s: response.latency_s,
            embedding: None,
        });
        Ok(response)
    }
}

pub struct RecordingEmbedder {
    inner: Arc<dyn Embedder>,
    sink: Arc<Mutex<ReplayStore>>,
}

impl RecordingEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, sink: Arc<Mutex<ReplayStore>>) -> Self {
        Self { inner, sink }
    }
}

#[async_trait]
impl Embedder for RecordingEmbedder {
    fn embedder_id(&self) -> &str {
        self.inner.embedder_id()
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, GateError> {
        let vector = self.inner.embed(text).await?;
        self.sink.lock().expect("replay sink poisoned").insert(ReplayEntry {
            fp: embedding_fingerprint(self.inner.embedder_id(), text),
            text: text.to_string(),
            latency_s: 0.0,
            embedding: Some(vector.clone()),
        });
        Ok(vector)
    }
}
