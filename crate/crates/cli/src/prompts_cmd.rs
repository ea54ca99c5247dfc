//! `licensekit prompts ...`

use std::path::PathBuf;

use anyhow::Context;
use clap::Subcommand;
use licensekit_core::corpus::{load_corpus, CorpusFormat};
use licensekit_core::prompts::render;
use serde_json::json;

use crate::corpus_cmd::load_pack;
use crate::print_json;

#[derive(Subcommand)]
pub enum PromptsCommand {
    /// List the templates in a pack.
    List {
        /// Template pack; the bundled pack when absent.
        #[arg(long)]
        pack: Option<PathBuf>,
    },
    /// Render a system/user pair for one license.
    Render {
        #[arg(long)]
        pack: Option<PathBuf>,
        #[arg(long)]
        system: String,
        #[arg(long)]
        user: String,
        /// Corpus holding the license.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        license_id: String,
    },
}

pub fn run(cmd: PromptsCommand) -> anyhow::Result<()> {
    match cmd {
        PromptsCommand::List { pack } => {
            let pack = load_pack(pack.as_deref())?;
            for t in pack.templates() {
                let origin = serde_json::to_value(t.origin)?;
                println!("{}\t{}\t{}", t.id, t.kind, origin.as_str().unwrap_or_default());
            }
            Ok(())
        }
        PromptsCommand::Render {
            pack,
            system,
            user,
            corpus,
            license_id,
        } => {
            let pack = load_pack(pack.as_deref())?;
            let corpus = load_corpus(&corpus, CorpusFormat::from_path(&corpus))?;
            let record = corpus
                .get(&license_id)
                .with_context(|| format!("license {license_id} is not in the corpus"))?;
            let prompt = render(&pack, &system, &user, record)?;
            print_json(&json!({"system": prompt.system_text, "user": prompt.user_text}))
        }
    }
}
