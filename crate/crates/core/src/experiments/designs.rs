//! Prompt-grid and training-size ablation designs built on [`run_cv_eval`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::{prepare_split, run_cv_eval};
use super::{io_err, ExperimentError, Gateway, RunManifest};
use crate::corpus::{export_instruction_dataset, subsample_for_ablation};
use crate::hashing::derive_seed;
use crate::metrics::Metric;
use crate::prompts::grid;

pub const GRID_FILE: &str = "grid_pa.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

/// Mean PA per (system prompt, user prompt) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub system_ids: Vec<String>,
    pub user_ids: Vec<String>,
    /// `pa[i][j]` for system `i`, user `j`.
    pub pa: Vec<Vec<f64>>,
}

impl GridTable {
    pub fn cell(&self, system_id: &str, user_id: &str) -> Option<f64> {
        let i = self.system_ids.iter().position(|s| s == system_id)?;
        let j = self.user_ids.iter().position(|u| u == user_id)?;
        Some(self.pa[i][j])
    }

    pub fn row_mean(&self, i: usize) -> f64 {
        self.pa[i].iter().sum::<f64>() / self.pa[i].len() as f64
    }

    /// Heatmap csv: one row per system prompt, one column per user prompt plus the row mean.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("system");
        for u in &self.user_ids {
            out.push(',');
            out.push_str(u);
        }
        out.push_str(",mean\n");
        for (i, s) in self.system_ids.iter().enumerate() {
            out.push_str(s);
            for v in &self.pa[i] {
                let _ = write!(out, ",{v:.1}");
            }
            let _ = writeln!(out, ",{:.1}", self.row_mean(i));
        }
        out
    }
}

/// Runs the full cross-validation once per (system, user) pair on the manifest's subset and
/// folds. Cell runs land in `<out>/<run_id>/grid/<system>__<user>/`, the heatmap in
/// `<out>/<run_id>/grid_pa.csv`.
pub async fn run_prompt_grid(
    manifest: &RunManifest,
    system_ids: &[String],
    user_ids: &[String],
    out_root: &Path,
    gateway: &Gateway,
) -> Result<GridTable, ExperimentError> {
    manifest.validate()?;
    if manifest.model_ids.len() != 1 {
        return Err(ExperimentError::Manifest(format!(
            "a prompt grid evaluates exactly one model, manifest lists {}",
            manifest.model_ids.len()
        )));
    }
    if system_ids.is_empty() || user_ids.is_empty() {
        return Err(ExperimentError::Manifest("grid needs at least one system and one user prompt".into()));
    }
    let pack = manifest.load_pack()?;
    let cells = grid(&pack, system_ids, user_ids)?;
    let model = &manifest.model_ids[0];
    let run_dir = out_root.join(&manifest.run_id);
    let cell_root = run_dir.join("grid");

    let mut pa = vec![Vec::with_capacity(user_ids.len()); system_ids.len()];
    for (n, (s, u)) in cells.iter().enumerate() {
        let cell = RunManifest {
            run_id: format!("{s}__{u}"),
            system_id: s.clone(),
            user_id: u.clone(),
            ..manifest.clone()
        };
        let results = run_cv_eval(&cell, &cell_root, gateway).await?;
        let mean = results.mean(model, Metric::Pa).expect("cell run evaluated the model");
        tracing::info!(system = %s, user = %u, pa = mean, "grid cell done");
        pa[n / user_ids.len()].push(mean);
    }
    let table = GridTable {
        system_ids: system_ids.to_vec(),
        user_ids: user_ids.to_vec(),
        pa,
    };
    let path = run_dir.join(GRID_FILE);
    fs::write(&path, table.to_csv()).map_err(io_err(&path))?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub size: usize,
    pub model_id: String,
    pub pa_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,model_id,pa_pct\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.1}", r.size, r.model_id, r.pa_pct);
        }
        out
    }

    pub fn strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].pa_pct > w[0].pa_pct)
    }
}

/// Training-size ablation.
///
/// Exports nested training subsets of the manifest subset (one instruction file per size and
/// held-out fold, under `<out>/<run_id>/ablation/size_<s>/fold_<f>.jsonl`), then evaluates the
/// endpoint registered for each size across all folds and reports its mean PA.
pub async fn run_data_size_ablation(
    manifest: &RunManifest,
    sizes: &[usize],
    endpoints: &BTreeMap<usize, String>,
    out_root: &Path,
    gateway: &Gateway,
) -> Result<AblationTable, ExperimentError> {
    manifest.validate()?;
    if let Some(&missing) = sizes.iter().find(|s| !endpoints.contains_key(s)) {
        return Err(ExperimentError::MissingEndpoint(missing));
    }
    let split = prepare_split(manifest)?;
    let nested = subsample_for_ablation(&split.subset, sizes, derive_seed(manifest.seed, "ablation"))?;
    let pack = manifest.load_pack()?;
    let run_dir = out_root.join(&manifest.run_id);

    let mut rows = Vec::with_capacity(sizes.len());
    for (&size, subset) in sizes.iter().zip(&nested) {
        let size_dir = run_dir.join("ablation").join(format!("size_{size}"));
        fs::create_dir_all(&size_dir).map_err(io_err(&size_dir))?;
        for fold in 0..manifest.k {
            let path = size_dir.join(format!("fold_{fold}.jsonl"));
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            export_instruction_dataset(
                subset,
                &split.folds,
                fold,
                &pack,
                &manifest.system_id,
                &manifest.user_id,
                std::io::BufWriter::new(file),
            )?;
        }
        let model_id = endpoints[&size].clone();
        let eval = RunManifest {
            run_id: "eval".into(),
            model_ids: vec![model_id.clone()],
            ..manifest.clone()
        };
        let results = run_cv_eval(&eval, &size_dir, gateway).await?;
        let pa_pct = results.mean(&model_id, Metric::Pa).expect("endpoint was evaluated");
        rows.push(AblationRow { size, model_id, pa_pct });
    }
    let table = AblationTable { rows };
    let path = run_dir.join(ABLATION_FILE);
    fs::write(&path, table.to_csv()).map_err(io_err(&path))?;
    Ok(table)
}
