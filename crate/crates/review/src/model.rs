//! Review sessions, decisions and summaries as stored and served.

use chrono::{DateTime, Utc};
use licensekit_core::metrics::Verdict;
use serde::{Deserialize, Serialize};

/// Whether reviewers may request model assistance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    #[serde(alias = "Manual")]
    Manual,
    #[serde(alias = "Assisted")]
    Assisted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub reviewer_id: String,
    pub group: Group,
    pub created_at: DateTime<Utc>,
    pub license_queue: Vec<String>,
    /// Content hash of the corpus holding the ground-truth labels.
    pub ground_truth_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub session_id: String,
    pub license_id: String,
    pub verdict: Verdict,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
    pub duration_s: f64,
    pub assist_shown: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assist_verdict: Option<Verdict>,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Session(ReviewSession),
    Decision(ReviewDecision),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub reviewer_id: String,
    pub group: Group,
    pub license_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextItem {
    pub license_id: String,
    pub name: String,
    pub text: String,
    /// Zero-based position in the queue.
    pub position: usize,
    pub queue_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzeRequest {
    pub license_id: String,
    pub model_id: String,
    pub system_id: String,
    pub user_id: String,
}

/// Model assistance for one license.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistPayload {
    pub license_id: String,
    pub model_id: String,
    pub verdict: Verdict,
    pub rationale_text: String,
    pub latency_s: f64,
    pub request_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub license_id: String,
    pub verdict: Verdict,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
    #[serde(default)]
    pub assist_shown: bool,
    /// Verdict the reviewer was shown; looked up from the assist cache when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assist_verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub group: Group,
    pub pa_pct: f64,
    pub mean_duration_s: f64,
    pub n_decided: usize,
    pub n_pending: usize,
    /// Assisted sessions only: decisions made with the assist panel open.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_assist_shown: Option<usize>,
    /// Assisted sessions only: share of assisted decisions that followed the model's verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assist_agreement_pct: Option<f64>,
}
