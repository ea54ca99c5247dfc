//! `licensekit eval ...`: manifest-driven runs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use licensekit_core::experiments::{
    run_cv_eval, run_data_size_ablation, run_prompt_grid, Backend, Gateway, RunManifest, RunResults,
};
use licensekit_core::metrics::Metric;
use licensekit_core::stats::{Direction, DEFAULT_D_THRESHOLD};
use serde_json::json;

use crate::analysis::{compare_results, rank_results, CompareFlags};
use crate::print_json;

/// The manifest plus command-line overrides of its fields.
#[derive(Args)]
pub struct ManifestArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Results root; each run lands in <out>/<run_id>/.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated; replaces the manifest's list.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    user: Option<String>,
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
}

impl ManifestArgs {
    fn load(&self) -> anyhow::Result<RunManifest> {
        let mut m = RunManifest::load(&self.manifest).with_context(|| format!("loading {}", self.manifest.display()))?;
        if let Some(v) = &self.run_id {
            m.run_id = v.clone();
        }
        if let Some(v) = self.fraction {
            m.fraction = v;
        }
        if let Some(v) = self.k {
            m.k = v;
        }
        if let Some(v) = self.seed {
            m.seed = v;
        }
        if let Some(v) = &self.models {
            m.model_ids = v.clone();
        }
        if let Some(v) = &self.system {
            m.system_id = v.clone();
        }
        if let Some(v) = &self.user {
            m.user_id = v.clone();
        }
        if let Some(v) = self.backend {
            m.backend = v;
        }
        if let Some(v) = &self.replay {
            m.replay_path = Some(std::path::absolute(v)?);
        }
        if let Some(v) = self.concurrency {
            m.concurrency_limit = v;
        }
        m.validate()?;
        Ok(m)
    }

    fn run_dir(&self, manifest: &RunManifest) -> PathBuf {
        self.out.join(&manifest.run_id)
    }
}

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Cross-validated evaluation of every listed model.
    Run(ManifestArgs),
    /// Rank the models of a finished run.
    Rank {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long, default_value = "pa")]
        metric: Metric,
        #[arg(long)]
        direction: Option<Direction>,
        #[arg(long, default_value_t = DEFAULT_D_THRESHOLD)]
        d_threshold: f64,
    },
    /// Compare two models of a finished run.
    Compare {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        options: CompareFlags,
    },
    /// Evaluate one model under every system x user prompt pair.
    Grid {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        systems: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        users: Vec<String>,
    },
    /// Export nested training sets and evaluate one endpoint per size.
    Ablate {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// SIZE=MODEL_ID, repeatable: the endpoint tuned on that many examples.
        #[arg(long = "endpoint", value_parser = parse_endpoint)]
        endpoints: Vec<(usize, String)>,
    },
}

fn parse_endpoint(s: &str) -> Result<(usize, String), String> {
    let (size, model) = s.split_once('=').ok_or("expected SIZE=MODEL_ID")?;
    let size = size.trim().parse().map_err(|e| format!("bad size {size:?}: {e}"))?;
    Ok((size, model.trim().to_string()))
}

pub async fn run(cmd: EvalCommand) -> anyhow::Result<()> {
    match cmd {
        EvalCommand::Run(args) => {
            let manifest = args.load()?;
            let gateway = Gateway::from_manifest(&manifest)?;
            let results = run_cv_eval(&manifest, &args.out, &gateway).await?;
            let models: BTreeMap<&str, BTreeMap<&str, f64>> = results
                .models()
                .map(|m| {
                    let means = Metric::ALL
                        .iter()
                        .filter_map(|&metric| results.mean(m, metric).map(|v| (metric.name(), v)))
                        .collect();
                    (m, means)
                })
                .collect();
            print_json(&json!({"run_dir": args.run_dir(&manifest), "k": results.k(), "means": models}))
        }
        EvalCommand::Rank {
            manifest,
            metric,
            direction,
            d_threshold,
        } => {
            let m = manifest.load()?;
            let dir = manifest.run_dir(&m);
            let results = RunResults::load(&dir)?;
            rank_results(&results, metric, direction, d_threshold, Some(&dir))
        }
        EvalCommand::Compare { manifest, a, b, options } => {
            let m = manifest.load()?;
            let results = RunResults::load(&manifest.run_dir(&m))?;
            compare_results(&results, &a, &b, &options)
        }
        EvalCommand::Grid { manifest: args, systems, users } => {
            let manifest = args.load()?;
            let gateway = Gateway::from_manifest(&manifest)?;
            let table = run_prompt_grid(&manifest, &systems, &users, &args.out, &gateway).await?;
            print!("{}", table.to_csv());
            Ok(())
        }
        EvalCommand::Ablate {
            manifest: args,
            sizes,
            endpoints,
        } => {
            let manifest = args.load()?;
            let endpoints: BTreeMap<usize, String> = endpoints.into_iter().collect();
            if endpoints.is_empty() {
                bail!("at least one --endpoint SIZE=MODEL_ID is required");
            }
            let gateway = Gateway::from_manifest(&manifest)?;
            let table = run_data_size_ablation(&manifest, &sizes, &endpoints, &args.out, &gateway).await?;
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}
