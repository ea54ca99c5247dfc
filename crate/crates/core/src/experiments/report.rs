//! Ranking and pairwise-comparison reports over per-fold results.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, RunResults};
use crate::metrics::Metric;
use crate::stats::{
    bonferroni_threshold, cliffs_delta, sk_esd_rank, wilcoxon_signed_rank, Direction, Magnitude, RankTable,
    SampleGroup, StatsError, WilcoxonMode,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub table: RankTable,
    pub markdown: String,
    pub csv: String,
}

fn direction_label(direction: Direction) -> &'static str {
    match direction {
        Direction::HigherIsBetter => "higher is better",
        Direction::LowerIsBetter => "lower is better",
    }
}

/// Scott-Knott ESD ranks of every model on one metric. Rows are sorted by rank, then model id.
pub fn rank_report(
    results: &RunResults,
    metric: Metric,
    direction: Direction,
    d_threshold: f64,
) -> Result<RankReport, ExperimentError> {
    let groups: Vec<SampleGroup> = results
        .summaries
        .iter()
        .map(|(model, folds)| SampleGroup::new(model.clone(), folds.iter().map(|s| s.value(metric)).collect()))
        .collect();
    let table = sk_esd_rank(metric.name(), &groups, direction, d_threshold)?;

    let mut rows: Vec<_> = table.entries.iter().collect();
    rows.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.group_id.cmp(&b.group_id)));

    let mut md = String::new();
    let _ = writeln!(md, "# {} ranking ({})", metric.name().to_uppercase(), direction_label(direction));
    let _ = writeln!(md);
    let _ = writeln!(md, "manifest: {}", results.manifest_hashes().join(", "));
    let _ = writeln!(md, "d threshold: {d_threshold}");
    let _ = writeln!(md);
    let _ = writeln!(md, "| Rank | Model | Value |");
    let _ = writeln!(md, "|-----:|:------|------:|");
    let mut csv = String::from("metric,rank,model_id,value\n");
    for e in rows {
        let _ = writeln!(md, "| {} | {} | {:.2} |", e.rank, e.group_id, e.mean);
        let _ = writeln!(csv, "{},{},{},{}", metric.name(), e.rank, e.group_id, e.mean);
    }
    Ok(RankReport {
        table,
        markdown: md,
        csv,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub metrics: Vec<Metric>,
    pub alpha: f64,
    /// Bonferroni family size; metrics × pairs when absent.
    pub bonferroni_m: Option<usize>,
    pub mode: WilcoxonMode,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            alpha: 0.05,
            bonferroni_m: None,
            mode: WilcoxonMode::Auto,
        }
    }
}

/// One (pair, metric) test. Effect sizes are oriented as `b` relative to `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub group_a: String,
    pub group_b: String,
    pub metric: Metric,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Absent when every paired difference is zero.
    pub statistic_w: Option<f64>,
    pub p_value: f64,
    pub exact: bool,
    pub zeros_dropped: usize,
    pub alpha_adjusted: f64,
    pub significant: bool,
    pub cliffs_delta: f64,
    pub magnitude: Magnitude,
    pub zero_delta: bool,
    pub no_difference: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub family_size: usize,
    pub results: Vec<ComparisonResult>,
    pub markdown: String,
    pub csv: String,
}

/// Paired Wilcoxon tests and Cliff's delta for every (pair, metric), Bonferroni-corrected over
/// the whole family. Folds are paired by index.
pub fn compare_report(
    results: &RunResults,
    pairs: &[(String, String)],
    options: &CompareOptions,
) -> Result<ComparisonReport, ExperimentError> {
    if pairs.is_empty() || options.metrics.is_empty() {
        return Err(ExperimentError::Incompatible("nothing to compare".into()));
    }
    let family_size = options.bonferroni_m.unwrap_or(pairs.len() * options.metrics.len());
    let alpha_adjusted = bonferroni_threshold(options.alpha, family_size)?;
    let fetch = |model: &str, metric: Metric| {
        results
            .values(model, metric)
            .ok_or_else(|| ExperimentError::Incompatible(format!("no results for model {model}")))
    };

    let mut out = Vec::new();
    for (a, b) in pairs {
        for &metric in &options.metrics {
            let va = fetch(a, metric)?;
            let vb = fetch(b, metric)?;
            if va.len() != vb.len() {
                return Err(ExperimentError::Incompatible(format!(
                    "{a} has {} folds but {b} has {}; folds must pair by index",
                    va.len(),
                    vb.len()
                )));
            }
            let (statistic_w, p_value, exact, zeros_dropped, no_difference) =
                match wilcoxon_signed_rank(&vb, &va, options.mode) {
                    Ok(w) => (Some(w.w), w.p_value, w.exact, w.zeros_dropped, false),
                    Err(StatsError::AllZeroDifferences) => (None, 1.0, false, va.len(), true),
                    Err(e) => return Err(e.into()),
                };
            let delta = cliffs_delta(&vb, &va)?;
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            out.push(ComparisonResult {
                group_a: a.clone(),
                group_b: b.clone(),
                metric,
                mean_a: mean(&va),
                mean_b: mean(&vb),
                statistic_w,
                p_value,
                exact,
                zeros_dropped,
                alpha_adjusted,
                significant: !no_difference && p_value < alpha_adjusted,
                cliffs_delta: delta.delta,
                magnitude: delta.magnitude,
                zero_delta: delta.zero,
                no_difference,
            });
        }
    }

    let mut md = String::new();
    let _ = writeln!(md, "# Pairwise comparison");
    let _ = writeln!(md);
    let _ = writeln!(md, "manifest: {}", results.manifest_hashes().join(", "));
    let _ = writeln!(
        md,
        "alpha {} / family {} = {:.6}",
        options.alpha, family_size, alpha_adjusted
    );
    let _ = writeln!(md);
    let _ = writeln!(md, "| Metric | A | B | Mean A | Mean B | W | p | Significant | Delta | Magnitude |");
    let _ = writeln!(md, "|:--|:--|:--|--:|--:|--:|--:|:--|--:|:--|");
    let mut csv = String::from(
        "metric,group_a,group_b,mean_a,mean_b,statistic_w,p_value,exact,zeros_dropped,alpha_adjusted,significant,cliffs_delta,magnitude,zero_delta,no_difference\n",
    );
    for r in &out {
        let w = match r.statistic_w {
            Some(w) => format!("{w}"),
            None => "no difference".to_string(),
        };
        let sig = if r.significant { "**yes**" } else { "no" };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.2} | {:.2} | {} | {:.4} | {} | {:.3} | {} |",
            r.metric.name(),
            r.group_a,
            r.group_b,
            r.mean_a,
            r.mean_b,
            w,
            r.p_value,
            sig,
            r.cliffs_delta,
            r.magnitude.as_str()
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.metric.name(),
            r.group_a,
            r.group_b,
            r.mean_a,
            r.mean_b,
            r.statistic_w.map(|w| w.to_string()).unwrap_or_default(),
            r.p_value,
            r.exact,
            r.zeros_dropped,
            r.alpha_adjusted,
            r.significant,
            r.cliffs_delta,
            r.magnitude.as_str(),
            r.zero_delta,
            r.no_difference
        );
    }
    Ok(ComparisonReport {
        family_size,
        results: out,
        markdown: md,
        csv,
    })
}
