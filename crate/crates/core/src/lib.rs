//! Dataset-license compliance evaluation toolkit.
//!
//! The crate is organised around the evaluation pipeline:
//!
//! - [`corpus`]: labeled license corpora, filtering, balanced subsets, stratified folds and
//!   instruction-tuning exports.
//! - [`prompts`]: system/user prompt template packs and rendering.
//! - [`modelgate`]: chat-completion and embedding endpoints with record/replay backends.
//! - [`metrics`]: verdict extraction and the five response metrics (PA, DR, SS, NRR, ARS).
//! - [`stats`]: Cohen's d, Scott-Knott ESD ranking, Wilcoxon signed-rank, Cliff's delta and
//!   Bonferroni correction.
//! - [`experiments`]: manifest-driven cross-validated runs, prompt grids, data-size ablations
//!   and reports.

pub mod corpus;
pub mod experiments;
pub mod hashing;
pub mod metrics;
pub mod modelgate;
pub mod prompts;
pub mod stats;
pub mod text;

pub use corpus::{Category, Corpus, Label, LicenseRecord, RecordStatus};
pub use metrics::{EvalOutcome, MetricSummary, Verdict};
pub use prompts::{RenderedPrompt, TemplatePack};
