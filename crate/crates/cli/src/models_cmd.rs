//! `licensekit models ...`

use std::path::PathBuf;

use anyhow::Context;
use clap::Subcommand;
use licensekit_core::modelgate::{CompletionBackend, HttpBackend, Registry};
use licensekit_core::RenderedPrompt;
use serde_json::json;

use crate::print_json;

#[derive(Subcommand)]
pub enum ModelsCommand {
    /// List registered models and embedders.
    List {
        #[arg(long)]
        registry: PathBuf,
    },
    /// Send one short request to a registered model and report the latency.
    Probe {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        model: String,
    },
}

pub async fn run(cmd: ModelsCommand) -> anyhow::Result<()> {
    match cmd {
        ModelsCommand::List { registry } => {
            let registry = Registry::load(&registry)?;
            for m in &registry.models {
                println!(
                    "model\t{}\t{}\t{}",
                    m.model_id,
                    m.base_url,
                    m.auth_env.as_deref().unwrap_or("-")
                );
            }
            for e in &registry.embedders {
                println!("embedder\t{}\t{}", e.embedder_id, e.base_url);
            }
            Ok(())
        }
        ModelsCommand::Probe { registry, model } => {
            let registry = Registry::load(&registry)?;
            let config = registry
                .model(&model)
                .with_context(|| format!("model {model} is not in the registry"))?;
            let prompt = RenderedPrompt {
                system_id: "probe".into(),
                user_id: "probe".into(),
                license_id: "probe".into(),
                system_text: "You are a helpful assistant.".into(),
                user_text: "Reply with the single word OK.".into(),
            };
            let response = HttpBackend::new().complete(config, &prompt).await?;
            print_json(&json!({
                "model_id": response.model_id,
                "latency_s": response.latency_s,
                "text": response.text,
            }))
        }
    }
}
