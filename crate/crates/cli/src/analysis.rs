//! `licensekit metrics|rank|compare`: scoring and statistics over saved outcomes and runs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use licensekit_core::experiments::{compare_report, rank_report, CompareOptions, RunResults};
use licensekit_core::metrics::{
    average_response_speed, duplication_rate, mean_ss, nonspecific_rate, prediction_agreement, DrMode, Metric, Ruleset,
};
use licensekit_core::stats::{Direction, WilcoxonMode, DEFAULT_D_THRESHOLD};
use licensekit_core::EvalOutcome;
use serde_json::{json, Value};

use crate::print_json;

#[derive(Args)]
pub struct MetricsArgs {
    /// Outcome file: one graded outcome per line, bare or as written under a run's outcomes/.
    #[arg(long = "in")]
    input: PathBuf,
    /// Regrade every response with these rules.
    #[arg(long)]
    ruleset: Option<PathBuf>,
    #[arg(long, default_value = "extras")]
    dr_mode: DrMode,
}

fn read_outcome_file(path: &Path) -> anyhow::Result<Vec<EvalOutcome>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut value: Value =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if let Some(inner) = value.get_mut("outcome") {
            value = inner.take();
        }
        out.push(serde_json::from_value(value).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn metrics(args: MetricsArgs) -> anyhow::Result<()> {
    let mut outcomes = read_outcome_file(&args.input)?;
    if let Some(path) = &args.ruleset {
        let ruleset = Ruleset::load(path)?;
        outcomes.iter_mut().for_each(|o| o.regrade(&ruleset));
    }
    let ss = mean_ss(&outcomes).ok();
    print_json(&json!({
        "n": outcomes.len(),
        "pa_pct": prediction_agreement(&outcomes)?,
        "dr_pct": duplication_rate(&outcomes, args.dr_mode)?,
        "nrr_pct": nonspecific_rate(&outcomes)?,
        "ars_s": average_response_speed(&outcomes)?,
        "ss_pct": ss.as_ref().map(|s| s.ss_pct),
        "ss_consistency_pct": ss.as_ref().map(|s| s.consistency_pct),
    }))
}

#[derive(Args)]
pub struct RankArgs {
    /// Run directories holding MANIFEST.lock and summary.csv; several are combined.
    #[arg(long = "in", required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value = "pa")]
    metric: Metric,
    /// higher or lower; defaults to the metric's natural direction.
    #[arg(long)]
    direction: Option<Direction>,
    #[arg(long, default_value_t = DEFAULT_D_THRESHOLD)]
    d_threshold: f64,
    /// Also write rank_<metric>.md and .csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn rank_results(
    results: &RunResults,
    metric: Metric,
    direction: Option<Direction>,
    d_threshold: f64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let report = rank_report(results, metric, direction.unwrap_or(metric.direction()), d_threshold)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("rank_{}.md", metric.name())), &report.markdown)?;
        fs::write(dir.join(format!("rank_{}.csv", metric.name())), &report.csv)?;
    }
    print!("{}", report.markdown);
    Ok(())
}

pub fn rank(args: RankArgs) -> anyhow::Result<()> {
    let results = RunResults::load_many(&args.input)?;
    rank_results(&results, args.metric, args.direction, args.d_threshold, args.out.as_deref())
}

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long = "in", required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[command(flatten)]
    options: CompareFlags,
}

#[derive(Args)]
pub struct CompareFlags {
    /// Repeatable; every metric when absent.
    #[arg(long)]
    metric: Vec<Metric>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Family size for the correction; metrics x pairs when absent.
    #[arg(long)]
    bonferroni_m: Option<usize>,
    #[arg(long, default_value = "auto")]
    mode: WilcoxonMode,
    /// Also write compare.md and compare.csv here.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

pub fn compare_results(results: &RunResults, a: &str, b: &str, flags: &CompareFlags) -> anyhow::Result<()> {
    let options = CompareOptions {
        metrics: if flags.metric.is_empty() {
            Metric::ALL.to_vec()
        } else {
            flags.metric.clone()
        },
        alpha: flags.alpha,
        bonferroni_m: flags.bonferroni_m,
        mode: flags.mode,
    };
    let report = compare_report(results, &[(a.to_string(), b.to_string())], &options)?;
    if let Some(dir) = &flags.report_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("compare.md"), &report.markdown)?;
        fs::write(dir.join("compare.csv"), &report.csv)?;
    }
    print!("{}", report.markdown);
    Ok(())
}

pub fn compare(args: CompareArgs) -> anyhow::Result<()> {
    let results = RunResults::load_many(&args.input)?;
    compare_results(&results, &args.a, &args.b, &args.options)
}
