//! Cross-validated evaluation and the on-disk results format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::rank_report;
use super::{io_err, ExperimentError, Gateway, RunManifest};
use crate::corpus::{
    balanced_subset, filter_invalid, load_corpus, stratified_folds, target_completion, Corpus, CorpusFormat,
    FoldAssignment,
};
use crate::hashing::{derive_seed, json_hash};
use crate::metrics::{evaluate_fold, DrMode, EvalOutcome, FoldResponse, GroundTruth, Metric, MetricSummary};
use crate::modelgate::complete_many;
use crate::prompts::render;
use crate::stats::DEFAULT_D_THRESHOLD;

pub const LOCK_FILE: &str = "MANIFEST.lock";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PARTIAL_FILE: &str = "PARTIAL";

/// Provenance of a results directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLock {
    pub run_id: String,
    pub manifest_hash: String,
    pub corpus_hash: String,
    pub subset_hash: String,
    pub fold_hash: String,
    pub pack_hash: String,
    pub ruleset_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_hash: Option<String>,
    pub k: usize,
    pub model_ids: Vec<String>,
    pub system_id: String,
    pub user_id: String,
    pub embedder_id: String,
    pub dr_mode: DrMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl RunLock {
    pub fn read(dir: &Path) -> Result<Self, ExperimentError> {
        let path = dir.join(LOCK_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Results {
            path,
            message: e.to_string(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let path = dir.join(LOCK_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("lock serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub manifest_hash: String,
    pub model_id: String,
    pub fold: usize,
    pub n: usize,
    pub pa_pct: f64,
    pub dr_pct: f64,
    pub nrr_pct: f64,
    pub ss_pct: f64,
    pub ss_consistency_pct: f64,
    pub ars_s: f64,
}

impl SummaryRow {
    fn summary(&self) -> MetricSummary {
        MetricSummary {
            n: self.n,
            pa_pct: self.pa_pct,
            dr_pct: self.dr_pct,
            nrr_pct: self.nrr_pct,
            ss_pct: self.ss_pct,
            ss_consistency_pct: self.ss_consistency_pct,
            ars_s: self.ars_s,
        }
    }
}

/// One line of `outcomes/<model>/<fold>.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLine {
    pub manifest_hash: String,
    pub fold: usize,
    #[serde(flatten)]
    pub outcome: EvalOutcome,
}

/// Per-fold metric summaries of one or more compatible runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResults {
    pub sources: Vec<RunLock>,
    /// Model id to summaries indexed by fold.
    pub summaries: BTreeMap<String, Vec<MetricSummary>>,
}

impl RunResults {
    pub fn k(&self) -> usize {
        self.sources.first().map_or(0, |l| l.k)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.summaries.keys().map(String::as_str)
    }

    pub fn values(&self, model_id: &str, metric: Metric) -> Option<Vec<f64>> {
        self.summaries
            .get(model_id)
            .map(|folds| folds.iter().map(|s| s.value(metric)).collect())
    }

    pub fn mean(&self, model_id: &str, metric: Metric) -> Option<f64> {
        let v = self.values(model_id, metric)?;
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn manifest_hashes(&self) -> Vec<&str> {
        self.sources.iter().map(|l| l.manifest_hash.as_str()).collect()
    }

    /// Reads `MANIFEST.lock` and `summary.csv` from a results directory.
    pub fn load(dir: &Path) -> Result<Self, ExperimentError> {
        let lock = RunLock::read(dir)?;
        let path = dir.join(SUMMARY_FILE);
        let bad = |message: String| ExperimentError::Results {
            path: path.clone(),
            message,
        };
        let mut reader = csv::Reader::from_path(&path).map_err(|e| bad(e.to_string()))?;
        let mut by_model: BTreeMap<String, BTreeMap<usize, MetricSummary>> = BTreeMap::new();
        for row in reader.deserialize::<SummaryRow>() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.manifest_hash != lock.manifest_hash {
                return Err(bad(format!(
                    "row for {} fold {} carries manifest hash {}, lock has {}",
                    row.model_id, row.fold, row.manifest_hash, lock.manifest_hash
                )));
            }
            if by_model.entry(row.model_id.clone()).or_default().insert(row.fold, row.summary()).is_some() {
                return Err(bad(format!("duplicate row for {} fold {}", row.model_id, row.fold)));
            }
        }
        let mut summaries = BTreeMap::new();
        for (model, folds) in by_model {
            if folds.keys().copied().ne(0..lock.k) {
                return Err(bad(format!("model {model} does not cover folds 0..{}", lock.k)));
            }
            summaries.insert(model, folds.into_values().collect());
        }
        Ok(Self {
            sources: vec![lock],
            summaries,
        })
    }

    /// Merges runs evaluated on the same corpus, subset and folds.
    pub fn combine(runs: Vec<RunResults>) -> Result<Self, ExperimentError> {
        let mut iter = runs.into_iter();
        let mut merged = iter
            .next()
            .ok_or_else(|| ExperimentError::Incompatible("no runs given".into()))?;
        for run in iter {
            let (a, b) = (&merged.sources[0], &run.sources[0]);
            for (what, x, y) in [
                ("corpus", &a.corpus_hash, &b.corpus_hash),
                ("subset", &a.subset_hash, &b.subset_hash),
                ("fold", &a.fold_hash, &b.fold_hash),
            ] {
                if x != y {
                    return Err(ExperimentError::Incompatible(format!(
                        "{what} hash differs between {} and {}",
                        a.run_id, b.run_id
                    )));
                }
            }
            for (model, folds) in run.summaries {
                if merged.summaries.contains_key(&model) {
                    return Err(ExperimentError::Incompatible(format!("model {model} appears in more than one run")));
                }
                merged.summaries.insert(model, folds);
            }
            merged.sources.extend(run.sources);
        }
        Ok(merged)
    }

    pub fn load_many(dirs: &[PathBuf]) -> Result<Self, ExperimentError> {
        Self::combine(dirs.iter().map(|d| Self::load(d)).collect::<Result<_, _>>()?)
    }
}

/// Writes `MANIFEST.lock` and `summary.csv` for the given per-fold summaries.
pub fn persist_summary(
    dir: &Path,
    lock: &RunLock,
    summaries: &BTreeMap<String, Vec<MetricSummary>>,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    lock.write(dir)?;
    let path = dir.join(SUMMARY_FILE);
    let mut writer = csv::Writer::from_path(&path).map_err(|e| ExperimentError::Results {
        path: path.clone(),
        message: e.to_string(),
    })?;
    for (model, folds) in summaries {
        for (fold, s) in folds.iter().enumerate() {
            writer
                .serialize(SummaryRow {
                    manifest_hash: lock.manifest_hash.clone(),
                    model_id: model.clone(),
                    fold,
                    n: s.n,
                    pa_pct: s.pa_pct,
                    dr_pct: s.dr_pct,
                    nrr_pct: s.nrr_pct,
                    ss_pct: s.ss_pct,
                    ss_consistency_pct: s.ss_consistency_pct,
                    ars_s: s.ars_s,
                })
                .map_err(|e| ExperimentError::Results {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
        }
    }
    writer.flush().map_err(io_err(&path))
}

/// The filtered corpus, its balanced subset and the fold assignment a manifest selects.
pub struct Split {
    pub corpus_hash: String,
    pub subset: Corpus,
    pub folds: FoldAssignment,
}

impl Split {
    pub fn subset_hash(&self) -> String {
        json_hash(&self.subset.ids().collect::<Vec<_>>())
    }
}

pub fn prepare_split(manifest: &RunManifest) -> Result<Split, ExperimentError> {
    let path = manifest.resolve(&manifest.corpus_path);
    let corpus = load_corpus(&path, CorpusFormat::from_path(&path))?;
    let (filtered, report) = filter_invalid(&corpus);
    tracing::info!(?report, "filtered corpus");
    let subset = balanced_subset(
        &filtered,
        manifest.fraction,
        derive_seed(manifest.seed, "subset"),
        manifest.allow_shrink,
    )?;
    let folds = stratified_folds(&subset, manifest.k, derive_seed(manifest.seed, "folds"))?;
    Ok(Split {
        corpus_hash: corpus.content_hash(),
        subset,
        folds,
    })
}

fn write_partial(dir: &Path, err: &ExperimentError) {
    let path = dir.join(PARTIAL_FILE);
    if let Err(e) = fs::write(&path, format!("{err}\n")) {
        tracing::error!(path = %path.display(), error = %e, "could not write partial-results marker");
    }
}

/// Runs the cross-validated evaluation a manifest describes and persists it under
/// `<out_root>/<run_id>/`.
///
/// A failure leaves a `PARTIAL` marker next to whatever was written. A directory that already
/// holds a different manifest's results is never touched.
pub async fn run_cv_eval(
    manifest: &RunManifest,
    out_root: &Path,
    gateway: &Gateway,
) -> Result<RunResults, ExperimentError> {
    manifest.validate()?;
    let dir = out_root.join(&manifest.run_id);
    let manifest_hash = manifest.content_hash();
    if dir.join(LOCK_FILE).exists() {
        let existing = RunLock::read(&dir)?;
        if existing.manifest_hash != manifest_hash {
            return Err(ExperimentError::LockMismatch {
                dir,
                expected: manifest_hash,
                found: existing.manifest_hash,
            });
        }
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    match execute(manifest, &manifest_hash, &dir, gateway).await {
        Ok(results) => {
            let marker = dir.join(PARTIAL_FILE);
            if marker.exists() {
                fs::remove_file(&marker).map_err(io_err(&marker))?;
            }
            Ok(results)
        }
        Err(err) => {
            write_partial(&dir, &err);
            Err(err)
        }
    }
}

async fn execute(
    manifest: &RunManifest,
    manifest_hash: &str,
    dir: &Path,
    gateway: &Gateway,
) -> Result<RunResults, ExperimentError> {
    let split = prepare_split(manifest)?;
    let pack = manifest.load_pack()?;
    let ruleset = manifest.load_ruleset()?;
    let prompts = split
        .subset
        .iter()
        .map(|r| render(&pack, &manifest.system_id, &manifest.user_id, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut truth = BTreeMap::new();
    for r in &split.subset {
        truth.insert(
            r.id.clone(),
            GroundTruth {
                label: r.label,
                reference: target_completion(r)?,
            },
        );
    }
    let configs = manifest
        .model_ids
        .iter()
        .map(|m| gateway.config_for(m))
        .collect::<Result<Vec<_>, _>>()?;

    let lock = RunLock {
        run_id: manifest.run_id.clone(),
        manifest_hash: manifest_hash.to_string(),
        corpus_hash: split.corpus_hash.clone(),
        subset_hash: split.subset_hash(),
        fold_hash: split.folds.content_hash(),
        pack_hash: pack.content_hash(),
        ruleset_hash: ruleset.content_hash(),
        replay_hash: gateway.replay_hash().map(str::to_string),
        k: manifest.k,
        model_ids: manifest.model_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
        system_id: manifest.system_id.clone(),
        user_id: manifest.user_id.clone(),
        embedder_id: manifest.embedder_id.clone(),
        dr_mode: manifest.dr_mode,
        manifest: Some(manifest.clone()),
    };
    lock.write(dir)?;

    let mut summaries = BTreeMap::new();
    for config in &configs {
        let responses = complete_many(gateway.backend.as_ref(), config, &prompts, manifest.concurrency_limit).await;
        let responses = match responses {
            Ok(r) => r,
            Err(e) => {
                gateway.flush()?;
                return Err(e.into());
            }
        };
        let model_dir = dir.join("outcomes").join(&config.model_id);
        fs::create_dir_all(&model_dir).map_err(io_err(&model_dir))?;
        let mut per_fold = Vec::with_capacity(manifest.k);
        for fold in 0..manifest.k {
            let members = split.folds.members(&split.subset, fold);
            let fold_responses: Vec<FoldResponse> = members
                .iter()
                .map(|r| {
                    let resp = &responses[&r.id];
                    FoldResponse {
                        license_id: r.id.clone(),
                        model_id: config.model_id.clone(),
                        system_id: manifest.system_id.clone(),
                        user_id: manifest.user_id.clone(),
                        text: resp.text.clone(),
                        latency_s: resp.latency_s,
                    }
                })
                .collect();
            let fold_truth: BTreeMap<String, GroundTruth> =
                members.iter().map(|r| (r.id.clone(), truth[&r.id].clone())).collect();
            let (outcomes, summary) = evaluate_fold(
                &fold_responses,
                &fold_truth,
                &ruleset,
                gateway.embedder.as_ref(),
                manifest.dr_mode,
            )
            .await?;
            write_outcomes(&model_dir.join(format!("{fold}.jsonl")), manifest_hash, fold, outcomes)?;
            per_fold.push(summary);
        }
        summaries.insert(config.model_id.clone(), per_fold);
    }
    gateway.flush()?;

    persist_summary(dir, &lock, &summaries)?;
    let results = RunResults {
        sources: vec![lock],
        summaries,
    };
    for metric in Metric::ALL {
        let report = rank_report(&results, metric, metric.direction(), DEFAULT_D_THRESHOLD)?;
        let path = dir.join(format!("rank_{}.md", metric.name()));
        fs::write(&path, report.markdown).map_err(io_err(&path))?;
    }
    Ok(results)
}

fn write_outcomes(
    path: &Path,
    manifest_hash: &str,
    fold: usize,
    outcomes: Vec<EvalOutcome>,
) -> Result<(), ExperimentError> {
    let mut text = String::new();
    for outcome in outcomes {
        let line = OutcomeLine {
            manifest_hash: manifest_hash.to_string(),
            fold,
            outcome,
        };
        text.push_str(&serde_json::to_string(&line).expect("outcome serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Reads back the graded outcomes of one (model, fold).
pub fn read_outcomes(dir: &Path, model_id: &str, fold: usize) -> Result<Vec<OutcomeLine>, ExperimentError> {
    let path = dir.join("outcomes").join(model_id).join(format!("{fold}.jsonl"));
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .map(|l| {
            serde_json::from_str(l).map_err(|e| ExperimentError::Results {
                path: path.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}
