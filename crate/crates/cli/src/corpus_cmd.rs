//! `licensekit corpus ...`

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Subcommand, ValueEnum};
use licensekit_core::corpus::{
    balanced_subset, category_stats, export_instruction_dataset, filter_invalid, load_corpus, save_corpus_jsonl,
    stratified_folds, subsample_for_ablation, CorpusFormat, FoldAssignment,
};
use licensekit_core::hashing::derive_seed;
use licensekit_core::prompts::load_template_pack;
use licensekit_core::{Corpus, TemplatePack};
use serde_json::json;

use crate::print_json;

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Args)]
pub struct Input {
    /// Corpus file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to the file extension.
    #[arg(long)]
    format: Option<FormatArg>,
}

impl Input {
    fn load(&self) -> anyhow::Result<Corpus> {
        let format = match self.format {
            Some(FormatArg::Jsonl) => CorpusFormat::JsonLines,
            Some(FormatArg::Csv) => CorpusFormat::Csv,
            None => CorpusFormat::from_path(&self.input),
        };
        load_corpus(&self.input, format).with_context(|| format!("loading {}", self.input.display()))
    }
}

#[derive(Subcommand)]
pub enum CorpusCommand {
    /// Parse a corpus and print record and label counts.
    Load(Input),
    /// Drop unreadable, expired and duplicate records.
    Filter {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-category counts.
    Stats(Input),
    /// Draw a label-balanced subset. Uses the same seed derivation as evaluation runs.
    Subset {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        allow_shrink: bool,
    },
    /// Assign records to stratified folds and write the assignment as JSON.
    Folds {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Write instruction-tuning examples for every fold except the held-out one.
    ExportInstructions {
        #[command(flatten)]
        input: Input,
        /// Fold assignment written by `corpus folds`.
        #[arg(long)]
        folds: PathBuf,
        #[arg(long)]
        held_out: usize,
        #[arg(long)]
        out: PathBuf,
        /// Template pack; the bundled pack when absent.
        #[arg(long)]
        pack: Option<PathBuf>,
        #[arg(long, default_value = "sys_v3")]
        system: String,
        #[arg(long, default_value = "user_v3")]
        user: String,
    },
    /// Write nested training subsets, one file per size.
    AblateSubsets {
        #[command(flatten)]
        input: Input,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        seed: u64,
    },
}

pub fn load_pack(path: Option<&Path>) -> anyhow::Result<TemplatePack> {
    Ok(match path {
        Some(p) => load_template_pack(p)?,
        None => TemplatePack::builtin(),
    })
}

fn write_corpus(corpus: &Corpus, path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    save_corpus_jsonl(corpus, BufWriter::new(file))?;
    Ok(())
}

pub fn run(cmd: CorpusCommand) -> anyhow::Result<()> {
    match cmd {
        CorpusCommand::Load(input) => {
            let corpus = input.load()?;
            let labels: serde_json::Map<String, serde_json::Value> = corpus
                .label_counts()
                .into_iter()
                .map(|(l, n)| (l.as_str().to_string(), json!(n)))
                .collect();
            print_json(&json!({
                "records": corpus.len(),
                "labels": labels,
                "content_hash": corpus.content_hash(),
            }))
        }
        CorpusCommand::Filter { input, out } => {
            let (kept, report) = filter_invalid(&input.load()?);
            write_corpus(&kept, &out)?;
            print_json(&report)
        }
        CorpusCommand::Stats(input) => print_json(&category_stats(&input.load()?)),
        CorpusCommand::Subset {
            input,
            out,
            fraction,
            seed,
            allow_shrink,
        } => {
            let subset = balanced_subset(&input.load()?, fraction, derive_seed(seed, "subset"), allow_shrink)?;
            write_corpus(&subset, &out)?;
            print_json(&json!({"records": subset.len(), "out": out}))
        }
        CorpusCommand::Folds { input, out, k, seed } => {
            let folds = stratified_folds(&input.load()?, k, derive_seed(seed, "folds"))?;
            fs::write(&out, serde_json::to_string_pretty(&folds)?)?;
            print_json(&json!({"k": k, "fold_sizes": folds.fold_sizes(), "out": out}))
        }
        CorpusCommand::ExportInstructions {
            input,
            folds,
            held_out,
            out,
            pack,
            system,
            user,
        } => {
            let corpus = input.load()?;
            let assignment: FoldAssignment = serde_json::from_str(
                &fs::read_to_string(&folds).with_context(|| format!("reading {}", folds.display()))?,
            )?;
            let pack = load_pack(pack.as_deref())?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let n = export_instruction_dataset(&corpus, &assignment, held_out, &pack, &system, &user, BufWriter::new(file))?;
            print_json(&json!({"examples": n, "out": out}))
        }
        CorpusCommand::AblateSubsets { input, out, sizes, seed } => {
            if sizes.is_empty() {
                bail!("--sizes is empty");
            }
            let subsets = subsample_for_ablation(&input.load()?, &sizes, derive_seed(seed, "ablation"))?;
            fs::create_dir_all(&out)?;
            let mut written = Vec::new();
            for (size, subset) in sizes.iter().zip(&subsets) {
                let path = out.join(format!("size_{size}.jsonl"));
                write_corpus(subset, &path)?;
                written.push(json!({"size": size, "records": subset.len(), "path": path}));
            }
            print_json(&written)
        }
    }
}
