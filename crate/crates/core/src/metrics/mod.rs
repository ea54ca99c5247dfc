//! Response grading and the five response metrics.
//!
//! | metric | definition |
//! |--------|------------|
//! | PA  | share of responses whose extracted verdict matches the expert label |
//! | DR  | share of responses that repeat another response (`n - distinct`) |
//! | SS  | mean cosine similarity to the expert reference answer |
//! | NRR | share of responses with no extractable verdict |
//! | ARS | mean response latency in seconds |
//!
//! All percentages are in `[0, 100]`.

pub mod verdict;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::modelgate::{Embedder, GateError};
use crate::stats::Direction;
use crate::text::normalize;

pub use verdict::{extract_verdict, PatternSyntax, Ruleset, RulesetFile};

/// Cosine threshold above which a response counts as consistent with the expert answer.
pub const SS_CONSISTENCY_THRESHOLD: f64 = 0.80;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no outcomes to score")]
    Empty,
    #[error("outcome for {0} has no semantic similarity")]
    MissingSimilarity(String),
    #[error("outcome for {license_id} has negative latency {latency_s}")]
    NegativeLatency { license_id: String, latency_s: f64 },
    #[error("similarity undefined for a zero-norm embedding")]
    ZeroNorm,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("responses and ground truth are not aligned; without truth: {without_truth:?}, without response: {without_response:?}")]
    IdMismatch {
        without_truth: Vec<String>,
        without_response: Vec<String>,
    },
    #[error("record {0} has no ground-truth label")]
    Unlabeled(String),
    #[error("ruleset error: {0}")]
    Ruleset(String),
    #[error(transparent)]
    Gate(#[from] GateError),
}

/// Commercial-use verdict extracted from a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "allows")]
    AllowsCommercial,
    #[serde(rename = "denies")]
    DeniesCommercial,
    #[serde(rename = "unclear")]
    Unclear,
    #[serde(rename = "non_specific")]
    NonSpecific,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::AllowsCommercial => "allows",
            Verdict::DeniesCommercial => "denies",
            Verdict::Unclear => "unclear",
            Verdict::NonSpecific => "non_specific",
        }
    }

    /// Whether this verdict agrees with an expert label. Non-specific never agrees.
    pub fn matches(self, label: Label) -> bool {
        matches!(
            (self, label),
            (Verdict::AllowsCommercial, Label::AllowsCommercial)
                | (Verdict::DeniesCommercial, Label::DeniesCommercial)
                | (Verdict::Unclear, Label::Unclear)
        )
    }
}

impl From<Label> for Option<Verdict> {
    fn from(label: Label) -> Self {
        match label {
            Label::AllowsCommercial => Some(Verdict::AllowsCommercial),
            Label::DeniesCommercial => Some(Verdict::DeniesCommercial),
            Label::Unclear => Some(Verdict::Unclear),
            Label::Unlabeled => None,
        }
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "allows" => Ok(Verdict::AllowsCommercial),
            "denies" => Ok(Verdict::DeniesCommercial),
            "unclear" => Ok(Verdict::Unclear),
            "non_specific" => Ok(Verdict::NonSpecific),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

/// One graded model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub license_id: String,
    pub model_id: String,
    pub system_id: String,
    pub user_id: String,
    pub response_text: String,
    pub extracted: Verdict,
    pub ground_truth: Label,
    pub correct: bool,
    pub normalized_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ss: Option<f64>,
    pub latency_s: f64,
}

impl EvalOutcome {
    /// Re-derives the verdict, correctness and normalized text under `ruleset`.
    pub fn regrade(&mut self, ruleset: &Ruleset) {
        self.extracted = ruleset.extract(&self.response_text);
        self.correct = self.extracted.matches(self.ground_truth);
        self.normalized_response = normalize(&self.response_text);
    }
}

/// A raw response to be graded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResponse {
    pub license_id: String,
    pub model_id: String,
    pub system_id: String,
    pub user_id: String,
    pub text: String,
    pub latency_s: f64,
}

/// Expert label plus the reference answer used for semantic similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub label: Label,
    pub reference: String,
}

pub fn grade(response: &FoldResponse, truth: &GroundTruth, ruleset: &Ruleset) -> Result<EvalOutcome, MetricsError> {
    if !truth.label.is_ground_truth() {
        return Err(MetricsError::Unlabeled(response.license_id.clone()));
    }
    let extracted = ruleset.extract(&response.text);
    Ok(EvalOutcome {
        license_id: response.license_id.clone(),
        model_id: response.model_id.clone(),
        system_id: response.system_id.clone(),
        user_id: response.user_id.clone(),
        response_text: response.text.clone(),
        extracted,
        ground_truth: truth.label,
        correct: extracted.matches(truth.label),
        normalized_response: normalize(&response.text),
        ss: None,
        latency_s: response.latency_s,
    })
}

fn non_empty(outcomes: &[EvalOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        Err(MetricsError::Empty)
    } else {
        Ok(outcomes.len() as f64)
    }
}

pub fn prediction_agreement(outcomes: &[EvalOutcome]) -> Result<f64, MetricsError> {
    let n = non_empty(outcomes)?;
    let correct = outcomes.iter().filter(|o| o.correct).count();
    Ok(100.0 * correct as f64 / n)
}

/// How repeated responses are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrMode {
    /// Every response beyond the first of its kind: `n - distinct`.
    #[default]
    Extras,
    /// Size of the largest group of identical responses, or zero when no response repeats.
    MaxClass,
}

impl FromStr for DrMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "extras" => Ok(DrMode::Extras),
            "max-class" | "max_class" => Ok(DrMode::MaxClass),
            other => Err(format!("unknown duplication mode {other:?}")),
        }
    }
}

pub fn duplication_rate(outcomes: &[EvalOutcome], mode: DrMode) -> Result<f64, MetricsError> {
    let n = non_empty(outcomes)?;
    let mut groups: HashMap<&str, usize> = HashMap::new();
    for o in outcomes {
        *groups.entry(o.normalized_response.as_str()).or_insert(0) += 1;
    }
    let duplicates = match mode {
        DrMode::Extras => outcomes.len() - groups.len(),
        DrMode::MaxClass => groups.values().copied().max().filter(|&m| m > 1).unwrap_or(0),
    };
    Ok(100.0 * duplicates as f64 / n)
}

pub fn nonspecific_rate(outcomes: &[EvalOutcome]) -> Result<f64, MetricsError> {
    let n = non_empty(outcomes)?;
    let count = outcomes.iter().filter(|o| o.extracted == Verdict::NonSpecific).count();
    Ok(100.0 * count as f64 / n)
}

pub fn average_response_speed(outcomes: &[EvalOutcome]) -> Result<f64, MetricsError> {
    let n = non_empty(outcomes)?;
    let mut total = 0.0;
    for o in outcomes {
        if o.latency_s.is_nan() || o.latency_s < 0.0 {
            return Err(MetricsError::NegativeLatency {
                license_id: o.license_id.clone(),
                latency_s: o.latency_s,
            });
        }
        total += o.latency_s;
    }
    Ok(total / n)
}

/// Aggregated similarity: `100 * mean(ss)` clamped below at zero, and the share of items above
/// [`SS_CONSISTENCY_THRESHOLD`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub ss_pct: f64,
    pub consistency_pct: f64,
}

pub fn mean_ss(outcomes: &[EvalOutcome]) -> Result<SimilaritySummary, MetricsError> {
    let n = non_empty(outcomes)?;
    let mut total = 0.0;
    let mut consistent = 0usize;
    for o in outcomes {
        let ss = o.ss.ok_or_else(|| MetricsError::MissingSimilarity(o.license_id.clone()))?;
        total += ss;
        if ss > SS_CONSISTENCY_THRESHOLD {
            consistent += 1;
        }
    }
    Ok(SimilaritySummary {
        ss_pct: (100.0 * total / n).max(0.0),
        consistency_pct: 100.0 * consistent as f64 / n,
    })
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub async fn semantic_similarity(
    outcome_text: &str,
    reference_text: &str,
    embedder: &dyn Embedder,
) -> Result<f64, MetricsError> {
    let a = embedder.embed(outcome_text).await?;
    let b = embedder.embed(reference_text).await?;
    cosine(&a, &b)
}

/// The five metrics for one (model, prompt pair, fold) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub pa_pct: f64,
    pub dr_pct: f64,
    pub nrr_pct: f64,
    pub ss_pct: f64,
    pub ss_consistency_pct: f64,
    pub ars_s: f64,
}

impl MetricSummary {
    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Pa => self.pa_pct,
            Metric::Dr => self.dr_pct,
            Metric::Nrr => self.nrr_pct,
            Metric::Ss => self.ss_pct,
            Metric::Ars => self.ars_s,
        }
    }
}

pub fn summarize(outcomes: &[EvalOutcome], dr_mode: DrMode) -> Result<MetricSummary, MetricsError> {
    let ss = mean_ss(outcomes)?;
    Ok(MetricSummary {
        n: outcomes.len(),
        pa_pct: prediction_agreement(outcomes)?,
        dr_pct: duplication_rate(outcomes, dr_mode)?,
        nrr_pct: nonspecific_rate(outcomes)?,
        ss_pct: ss.ss_pct,
        ss_consistency_pct: ss.consistency_pct,
        ars_s: average_response_speed(outcomes)?,
    })
}

/// Grades one fold and scores it.
///
/// Responses and ground truth must cover exactly the same license ids. Outcomes come back
/// sorted by license id.
pub async fn evaluate_fold(
    responses: &[FoldResponse],
    ground_truth: &BTreeMap<String, GroundTruth>,
    ruleset: &Ruleset,
    embedder: &dyn Embedder,
    dr_mode: DrMode,
) -> Result<(Vec<EvalOutcome>, MetricSummary), MetricsError> {
    let response_ids: BTreeSet<&str> = responses.iter().map(|r| r.license_id.as_str()).collect();
    let without_truth: Vec<String> = response_ids
        .iter()
        .filter(|id| !ground_truth.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    let without_response: Vec<String> = ground_truth
        .keys()
        .filter(|id| !response_ids.contains(id.as_str()))
        .cloned()
        .collect();
    if !without_truth.is_empty() || !without_response.is_empty() {
        return Err(MetricsError::IdMismatch {
            without_truth,
            without_response,
        });
    }

    let mut outcomes = Vec::with_capacity(responses.len());
    for response in responses {
        let truth = &ground_truth[&response.license_id];
        let mut outcome = grade(response, truth, ruleset)?;
        outcome.ss = Some(semantic_similarity(&response.text, &truth.reference, embedder).await?);
        outcomes.push(outcome);
    }
    outcomes.sort_by(|a, b| a.license_id.cmp(&b.license_id));
    let summary = summarize(&outcomes, dr_mode)?;
    Ok((outcomes, summary))
}

/// The five metrics by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Pa,
    Dr,
    Nrr,
    Ss,
    Ars,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Pa, Metric::Ss, Metric::Dr, Metric::Nrr, Metric::Ars];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Pa => "pa",
            Metric::Dr => "dr",
            Metric::Nrr => "nrr",
            Metric::Ss => "ss",
            Metric::Ars => "ars",
        }
    }

    /// PA and SS are better when higher; DR, NRR and ARS when lower.
    pub fn direction(self) -> Direction {
        match self {
            Metric::Pa | Metric::Ss => Direction::HigherIsBetter,
            Metric::Dr | Metric::Nrr | Metric::Ars => Direction::LowerIsBetter,
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pa" => Ok(Metric::Pa),
            "dr" => Ok(Metric::Dr),
            "nrr" => Ok(Metric::Nrr),
            "ss" => Ok(Metric::Ss),
            "ars" => Ok(Metric::Ars),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}
