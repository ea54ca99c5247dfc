//! Timed human review of license texts, with optional model assistance.
//!
//! Reviewers work through a queue of licenses in a session. Each decision is timed from the
//! client-supplied start and end timestamps, validated against the server clock and appended to a
//! per-session log. Summaries score decisions against the corpus labels with the same agreement
//! and speed metrics used for models.

pub mod api;
pub mod model;
pub mod service;
pub mod store;

use licensekit_core::modelgate::GateError;

pub use api::{router, serve};
pub use model::*;
pub use service::{AssistConfig, ReviewService, CLOCK_SKEW};
pub use store::{ReviewStore, StoredSession};

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("session {0} has no decisions yet")]
    NoDecisions(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing or wrong bearer token")]
    Unauthorized,
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("store: {0}")]
    Store(String),
}

impl ReviewError {
    pub fn kind(&self) -> &'static str {
        match self {
            ReviewError::Validation(_) => "validation",
            ReviewError::NotFound(_) => "not_found",
            ReviewError::Conflict(_) => "conflict",
            ReviewError::NoDecisions(_) => "no_decisions",
            ReviewError::Config(_) => "configuration",
            ReviewError::Unauthorized => "unauthorized",
            ReviewError::Gate(_) => "model",
            ReviewError::Store(_) => "store",
        }
    }

    /// Whether the same request may succeed later.
    pub fn retriable(&self) -> bool {
        match self {
            ReviewError::Gate(e) => e.retriable(),
            _ => false,
        }
    }
}
