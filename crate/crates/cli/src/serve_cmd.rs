//! `licensekit serve`: the human review service.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Args;
use licensekit_core::corpus::{load_corpus, CorpusFormat};
use licensekit_core::metrics::Ruleset;
use licensekit_core::modelgate::{
    CompletionBackend, HttpBackend, ModelEndpointConfig, Registry, ReplayBackend, ReplayStore,
};
use licensekit_review::{AssistConfig, ReviewService, ReviewStore};

use crate::corpus_cmd::load_pack;

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Labeled corpus the reviewers work from.
    #[arg(long)]
    corpus: PathBuf,
    /// Models available for assistance.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    pack: Option<PathBuf>,
    /// Verdict rules; the bundled English rules when absent.
    #[arg(long)]
    ruleset: Option<PathBuf>,
    /// Directory for session logs.
    #[arg(long)]
    store: PathBuf,
    /// Answer assistance requests from this replay file instead of calling endpoints.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Model ids served from the replay file without a registry entry; repeatable.
    #[arg(long = "offline-model")]
    offline_models: Vec<String>,
    /// Environment variable holding a bearer token every request must present.
    #[arg(long)]
    token_env: Option<String>,
}

pub async fn run(args: ServeArgs) -> anyhow::Result<()> {
    let corpus = load_corpus(&args.corpus, CorpusFormat::from_path(&args.corpus))
        .with_context(|| format!("loading {}", args.corpus.display()))?;
    let registry = match &args.registry {
        Some(p) => Registry::load(p)?,
        None => Registry::default(),
    };
    let mut models: BTreeMap<String, ModelEndpointConfig> =
        registry.models.iter().map(|m| (m.model_id.clone(), m.clone())).collect();
    let backend: Arc<dyn CompletionBackend> = match &args.replay {
        Some(path) => {
            for id in &args.offline_models {
                models.entry(id.clone()).or_insert_with(|| ModelEndpointConfig::offline(id));
            }
            Arc::new(ReplayBackend::new(Arc::new(ReplayStore::load(path)?)))
        }
        None => {
            anyhow::ensure!(args.offline_models.is_empty(), "--offline-model needs --replay");
            Arc::new(HttpBackend::new())
        }
    };
    let ruleset = match &args.ruleset {
        Some(p) => Ruleset::load(p)?,
        None => Ruleset::english(),
    };
    let token = match &args.token_env {
        Some(var) => Some(std::env::var(var).with_context(|| format!("{var} is not set"))?),
        None => None,
    };
    let assist = AssistConfig {
        backend,
        models,
        pack: load_pack(args.pack.as_deref())?,
        ruleset,
    };
    let service = Arc::new(ReviewService::new(corpus, assist, ReviewStore::open(&args.store)?)?);
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
    eprintln!("review service listening on http://{}", listener.local_addr()?);
    licensekit_review::serve(listener, service, token).await?;
    Ok(())
}
