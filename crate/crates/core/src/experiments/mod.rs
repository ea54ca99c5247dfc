//! Manifest-driven experiment runs.
//!
//! A [`RunManifest`] names a corpus, a label-balanced fraction of it, `k` cross-validation
//! folds, the models to evaluate and one (system, user) prompt pair. Every random choice is
//! derived from the manifest seed, so a replayed run is byte-for-byte repeatable.
//!
//! Results directory layout under `<out>/<run_id>/`:
//!
//! ```text
//! MANIFEST.lock               provenance hashes (manifest, corpus, subset, folds, pack, ruleset)
//! summary.csv                 one row per (model, fold)
//! outcomes/<model>/<fold>.jsonl
//! rank_<metric>.md
//! PARTIAL                     present only when the run failed
//! ```

mod designs;
mod report;
mod run;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusError;
use crate::metrics::{DrMode, MetricsError, Ruleset};
use crate::modelgate::{
    CheckedEmbedder, CompletionBackend, Embedder, GateError, HashingEmbedder, HttpBackend, HttpEmbedder,
    ModelEndpointConfig, RecordingBackend, RecordingEmbedder, Registry, ReplayBackend, ReplayEmbedder, ReplayStore,
};
use crate::prompts::{load_template_pack, PromptError, TemplatePack};
use crate::stats::StatsError;

pub use designs::{run_data_size_ablation, run_prompt_grid, AblationRow, AblationTable, GridTable};
pub use report::{
    compare_report, rank_report, ComparisonReport, ComparisonResult, CompareOptions, RankReport,
};
pub use run::{persist_summary, prepare_split, read_outcomes, run_cv_eval, OutcomeLine, RunLock, RunResults, Split, SummaryRow};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{dir} already holds run with manifest hash {found}, refusing to overwrite with {expected}")]
    LockMismatch {
        dir: PathBuf,
        expected: String,
        found: String,
    },
    #[error("results cannot be combined: {0}")]
    Incompatible(String),
    #[error("malformed results in {path}: {message}")]
    Results { path: PathBuf, message: String },
    #[error("no evaluation endpoint registered for training size {0}")]
    MissingEndpoint(usize),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Live,
    Record,
    Replay,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Backend::Live),
            "record" => Ok(Backend::Record),
            "replay" => Ok(Backend::Replay),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

fn default_concurrency() -> usize {
    4
}

/// Everything that determines a run. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub corpus_path: PathBuf,
    pub fraction: f64,
    pub k: usize,
    pub seed: u64,
    pub model_ids: Vec<String>,
    pub system_id: String,
    pub user_id: String,
    /// Verdict rules; the bundled English rules when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ruleset_path: Option<PathBuf>,
    pub embedder_id: String,
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_path: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    /// Template pack; the bundled pack when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry_path: Option<PathBuf>,
    #[serde(default)]
    pub allow_shrink: bool,
    #[serde(default)]
    pub dr_mode: DrMode,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunManifest {
    pub fn from_json(json: &str) -> Result<Self, ExperimentError> {
        let manifest: RunManifest = serde_json::from_str(json).map_err(|e| ExperimentError::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let json = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut manifest = Self::from_json(&json)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf);
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Manifest(m));
        if self.run_id.is_empty()
            || !self
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.run_id.starts_with('.')
        {
            return bad(format!("run_id {:?} must be non-empty and use [A-Za-z0-9._-]", self.run_id));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return bad(format!("fraction must be in (0, 1], got {}", self.fraction));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.model_ids.is_empty() {
            return bad("model_ids is empty".into());
        }
        let mut seen = HashSet::new();
        for id in &self.model_ids {
            if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
                return bad(format!("model id {id:?} is not usable as a directory name"));
            }
            if !seen.insert(id) {
                return bad(format!("model id {id} listed twice"));
            }
        }
        if self.concurrency_limit == 0 {
            return bad("concurrency_limit must be positive".into());
        }
        if self.embedder_id.is_empty() {
            return bad("embedder_id is empty".into());
        }
        match self.backend {
            Backend::Replay if self.replay_path.is_none() => bad("replay backend requires replay_path".into()),
            Backend::Record if self.replay_path.is_none() => bad("record backend requires replay_path".into()),
            Backend::Live | Backend::Record if self.registry_path.is_none() => {
                bad("live and record backends require registry_path".into())
            }
            _ => Ok(()),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Hash of the manifest fields; the directory it was loaded from is not part of it.
    pub fn content_hash(&self) -> String {
        crate::hashing::json_hash(self)
    }

    pub fn load_pack(&self) -> Result<TemplatePack, ExperimentError> {
        Ok(match &self.pack_path {
            Some(p) => load_template_pack(&self.resolve(p))?,
            None => TemplatePack::builtin(),
        })
    }

    pub fn load_ruleset(&self) -> Result<Ruleset, ExperimentError> {
        Ok(match &self.ruleset_path {
            Some(p) => Ruleset::load(&self.resolve(p))?,
            None => Ruleset::english(),
        })
    }

    pub fn load_registry(&self) -> Result<Registry, ExperimentError> {
        Ok(match &self.registry_path {
            Some(p) => Registry::load(&self.resolve(p))?,
            None => Registry::default(),
        })
    }
}

/// Model access for a run: completion backend, embedder and endpoint configs.
pub struct Gateway {
    pub backend: Arc<dyn CompletionBackend>,
    pub embedder: Arc<dyn Embedder>,
    registry: Registry,
    require_registered: bool,
    recording: Option<(Arc<Mutex<ReplayStore>>, PathBuf)>,
    replay_hash: Option<String>,
}

impl Gateway {
    /// Wraps caller-supplied backends; unregistered models get default parameters.
    pub fn new(backend: Arc<dyn CompletionBackend>, embedder: Arc<dyn Embedder>, registry: Registry) -> Self {
        Self {
            backend,
            embedder,
            registry,
            require_registered: false,
            recording: None,
            replay_hash: None,
        }
    }

    pub fn from_manifest(manifest: &RunManifest) -> Result<Self, ExperimentError> {
        let registry = manifest.load_registry()?;
        let hashing = HashingEmbedder::from_id(&manifest.embedder_id);
        let live_embedder = |registry: &Registry| -> Result<Arc<dyn Embedder>, ExperimentError> {
            if let Some(h) = hashing.clone() {
                return Ok(Arc::new(h));
            }
            let config = registry.embedder(&manifest.embedder_id).ok_or_else(|| {
                ExperimentError::Manifest(format!("embedder {} is not in the registry", manifest.embedder_id))
            })?;
            Ok(Arc::new(HttpEmbedder::new(config.clone())))
        };
        let gateway = match manifest.backend {
            Backend::Live => Self {
                backend: Arc::new(HttpBackend::new()),
                embedder: Arc::new(CheckedEmbedder::new(live_embedder(&registry)?)),
                registry,
                require_registered: true,
                recording: None,
                replay_hash: None,
            },
            Backend::Record => {
                let path = manifest.resolve(manifest.replay_path.as_deref().expect("validated"));
                let existing = if path.exists() {
                    ReplayStore::load(&path)?
                } else {
                    ReplayStore::default()
                };
                let sink = Arc::new(Mutex::new(existing));
                let embedder: Arc<dyn Embedder> = match hashing {
                    Some(h) => Arc::new(h),
                    None => Arc::new(RecordingEmbedder::new(live_embedder(&registry)?, sink.clone())),
                };
                Self {
                    backend: Arc::new(RecordingBackend::new(Arc::new(HttpBackend::new()), sink.clone())),
                    embedder: Arc::new(CheckedEmbedder::new(embedder)),
                    registry,
                    require_registered: true,
                    recording: Some((sink, path)),
                    replay_hash: None,
                }
            }
            Backend::Replay => {
                let path = manifest.resolve(manifest.replay_path.as_deref().expect("validated"));
                let store = Arc::new(ReplayStore::load(&path)?);
                let embedder: Arc<dyn Embedder> = match hashing {
                    Some(h) => Arc::new(h),
                    None => Arc::new(ReplayEmbedder::new(&manifest.embedder_id, store.clone())),
                };
                Self {
                    replay_hash: Some(store.content_hash()),
                    backend: Arc::new(ReplayBackend::new(store)),
                    embedder: Arc::new(CheckedEmbedder::new(embedder)),
                    registry,
                    require_registered: false,
                    recording: None,
                }
            }
        };
        Ok(gateway)
    }

    pub fn config_for(&self, model_id: &str) -> Result<ModelEndpointConfig, ExperimentError> {
        match self.registry.model(model_id) {
            Some(c) => Ok(c.clone()),
            None if self.require_registered => Err(ExperimentError::Gate(GateError::Config(format!(
                "model {model_id} is not in the registry"
            )))),
            None => Ok(ModelEndpointConfig::offline(model_id)),
        }
    }

    pub fn replay_hash(&self) -> Option<&str> {
        self.replay_hash.as_deref()
    }

    /// Writes captured answers back to the replay file when recording.
    pub fn flush(&self) -> Result<(), ExperimentError> {
        if let Some((sink, path)) = &self.recording {
            sink.lock().expect("replay sink poisoned").save(path)?;
        }
        Ok(())
    }
}
