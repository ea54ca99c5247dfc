//! Session bookkeeping, timing validation and cached model assistance.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use licensekit_core::metrics::{average_response_speed, prediction_agreement, Ruleset};
use licensekit_core::modelgate::{prompt_fingerprint, CompletionBackend, ModelEndpointConfig};
use licensekit_core::prompts::render;
use licensekit_core::{Corpus, EvalOutcome, TemplatePack, Verdict};
use tokio::sync::Mutex;

use crate::model::*;
use crate::store::{ReviewStore, StoredSession};
use crate::ReviewError;

/// How far a client clock may run ahead of the server.
pub const CLOCK_SKEW: Duration = Duration::from_secs(5);

/// Everything needed to answer assistance requests.
pub struct AssistConfig {
    pub backend: Arc<dyn CompletionBackend>,
    pub models: BTreeMap<String, ModelEndpointConfig>,
    pub pack: TemplatePack,
    pub ruleset: Ruleset,
}

struct SessionState {
    session: ReviewSession,
    decisions: Vec<ReviewDecision>,
    decided: HashSet<String>,
}

impl SessionState {
    fn new(stored: StoredSession) -> Self {
        let decided = stored.decisions.iter().map(|d| d.license_id.clone()).collect();
        Self {
            session: stored.session,
            decisions: stored.decisions,
            decided,
        }
    }
}

#[derive(Default)]
struct AssistCache {
    by_fingerprint: HashMap<String, AssistPayload>,
    latest_by_license: HashMap<String, Verdict>,
}

pub struct ReviewService {
    corpus: Corpus,
    corpus_hash: String,
    assist: AssistConfig,
    store: ReviewStore,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    cache: Mutex<AssistCache>,
}

impl ReviewService {
    /// Builds the service and replays any sessions already in `store`.
    pub fn new(corpus: Corpus, assist: AssistConfig, store: ReviewStore) -> Result<Self, ReviewError> {
        let corpus_hash = corpus.content_hash();
        let mut sessions = HashMap::new();
        for (id, stored) in store.load_all()? {
            if stored.session.ground_truth_source != corpus_hash {
                tracing::warn!(session = %id, "session was created against a different corpus");
            }
            sessions.insert(id, Arc::new(Mutex::new(SessionState::new(stored))));
        }
        Ok(Self {
            corpus,
            corpus_hash,
            assist,
            store,
            sessions: RwLock::new(sessions),
            cache: Mutex::new(AssistCache::default()),
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    fn session(&self, session_id: &str) -> Result<Arc<Mutex<SessionState>>, ReviewError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ReviewError::NotFound(format!("session {session_id}")))
    }

    pub async fn create_session(&self, req: CreateSession) -> Result<SessionCreated, ReviewError> {
        if req.reviewer_id.trim().is_empty() {
            return Err(ReviewError::Validation("reviewer_id is empty".into()));
        }
        if req.license_ids.is_empty() {
            return Err(ReviewError::Validation("license_ids is empty".into()));
        }
        let mut seen = HashSet::new();
        for id in &req.license_ids {
            if !seen.insert(id.as_str()) {
                return Err(ReviewError::Validation(format!("license {id} is listed twice")));
            }
            let record = self
                .corpus
                .get(id)
                .ok_or_else(|| ReviewError::Validation(format!("unknown license {id}")))?;
            if !record.label.is_ground_truth() {
                return Err(ReviewError::Validation(format!("license {id} has no expert label")));
            }
        }
        let session = ReviewSession {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            reviewer_id: req.reviewer_id,
            group: req.group,
            created_at: Utc::now(),
            license_queue: req.license_ids,
            ground_truth_source: self.corpus_hash.clone(),
        };
        self.store.append(&session.session_id, &LogRecord::Session(session.clone()))?;
        let session_id = session.session_id.clone();
        let state = SessionState::new(StoredSession {
            session,
            decisions: Vec::new(),
        });
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(session_id.clone(), Arc::new(Mutex::new(state)));
        tracing::info!(session = %session_id, "session created");
        Ok(SessionCreated { session_id })
    }

    pub async fn get_session(&self, session_id: &str) -> Result<ReviewSession, ReviewError> {
        Ok(self.session(session_id)?.lock().await.session.clone())
    }

    /// The first undecided license in queue order, or `None` when the queue is exhausted.
    pub async fn next_item(&self, session_id: &str) -> Result<Option<NextItem>, ReviewError> {
        let state = self.session(session_id)?;
        let state = state.lock().await;
        let queue = &state.session.license_queue;
        let Some((position, id)) = queue.iter().enumerate().find(|(_, id)| !state.decided.contains(*id)) else {
            return Ok(None);
        };
        let record = self
            .corpus
            .get(id)
            .ok_or_else(|| ReviewError::NotFound(format!("license {id} is no longer in the corpus")))?;
        Ok(Some(NextItem {
            license_id: record.id.clone(),
            name: record.name.clone(),
            text: record.text.clone(),
            position,
            queue_length: queue.len(),
        }))
    }

    pub async fn analyze(&self, req: AnalyzeRequest) -> Result<AssistPayload, ReviewError> {
        let config = self
            .assist
            .models
            .get(&req.model_id)
            .ok_or_else(|| ReviewError::Config(format!("unknown model {}", req.model_id)))?;
        let record = self
            .corpus
            .get(&req.license_id)
            .ok_or_else(|| ReviewError::Validation(format!("unknown license {}", req.license_id)))?;
        let prompt = render(&self.assist.pack, &req.system_id, &req.user_id, record)
            .map_err(|e| ReviewError::Validation(e.to_string()))?;
        let fingerprint = prompt_fingerprint(config, &prompt);
        if let Some(hit) = self.cache.lock().await.by_fingerprint.get(&fingerprint) {
            return Ok(hit.clone());
        }
        let response = self.assist.backend.complete(config, &prompt).await?;
        let payload = AssistPayload {
            license_id: record.id.clone(),
            model_id: req.model_id,
            verdict: self.assist.ruleset.extract(&response.text),
            rationale_text: response.text,
            latency_s: response.latency_s,
            request_fingerprint: fingerprint.clone(),
        };
        let mut cache = self.cache.lock().await;
        cache.latest_by_license.insert(payload.license_id.clone(), payload.verdict);
        cache.by_fingerprint.insert(fingerprint, payload.clone());
        Ok(payload)
    }

    pub async fn record_decision(&self, session_id: &str, req: DecisionRequest) -> Result<ReviewDecision, ReviewError> {
        self.record_decision_at(session_id, req, Utc::now()).await
    }

    /// Records a decision as if it arrived at `received_at`.
    pub async fn record_decision_at(
        &self,
        session_id: &str,
        req: DecisionRequest,
        received_at: DateTime<Utc>,
    ) -> Result<ReviewDecision, ReviewError> {
        let state = self.session(session_id)?;
        let mut state = state.lock().await;
        if !state.session.license_queue.contains(&req.license_id) {
            return Err(ReviewError::Validation(format!(
                "license {} is not in this session",
                req.license_id
            )));
        }
        if state.decided.contains(&req.license_id) {
            return Err(ReviewError::Conflict(format!("license {} already decided", req.license_id)));
        }
        if req.verdict == Verdict::NonSpecific {
            return Err(ReviewError::Validation("verdict must be allows, denies or unclear".into()));
        }
        let elapsed = (req.ended_at - req.started_at)
            .to_std()
            .map_err(|_| ReviewError::Validation("ended_at precedes started_at".into()))?;
        let latest = received_at + chrono::Duration::from_std(CLOCK_SKEW).expect("small constant");
        if req.ended_at > latest {
            return Err(ReviewError::Validation("ended_at lies in the future".into()));
        }
        let assist_verdict = match (state.session.group, req.assist_shown) {
            (Group::Manual, true) => {
                return Err(ReviewError::Validation("assistance is not available in a manual session".into()))
            }
            (Group::Manual, false) | (Group::Assisted, false) => None,
            (Group::Assisted, true) => match req.assist_verdict {
                Some(v) => Some(v),
                None => self.cache.lock().await.latest_by_license.get(&req.license_id).copied(),
            },
        };
        let decision = ReviewDecision {
            session_id: session_id.to_string(),
            license_id: req.license_id,
            verdict: req.verdict,
            started_at: req.started_at,
            ended_at: req.ended_at,
            duration_s: elapsed.as_secs_f64(),
            assist_shown: req.assist_shown,
            assist_verdict,
        };
        self.store.append(session_id, &LogRecord::Decision(decision.clone()))?;
        state.decided.insert(decision.license_id.clone());
        state.decisions.push(decision.clone());
        Ok(decision)
    }

    pub async fn summary(&self, session_id: &str) -> Result<SessionSummary, ReviewError> {
        let state = self.session(session_id)?;
        let state = state.lock().await;
        if state.decisions.is_empty() {
            return Err(ReviewError::NoDecisions(session_id.to_string()));
        }
        let outcomes = state
            .decisions
            .iter()
            .map(|d| self.as_outcome(&state.session, d))
            .collect::<Result<Vec<_>, _>>()?;
        let pa_pct = prediction_agreement(&outcomes).map_err(|e| ReviewError::Store(e.to_string()))?;
        let mean_duration_s = average_response_speed(&outcomes).map_err(|e| ReviewError::Store(e.to_string()))?;
        let (n_assist_shown, assist_agreement_pct) = match state.session.group {
            Group::Manual => (None, None),
            Group::Assisted => {
                let shown: Vec<&ReviewDecision> = state.decisions.iter().filter(|d| d.assist_shown).collect();
                let with_verdict: Vec<bool> = shown
                    .iter()
                    .filter_map(|d| d.assist_verdict.map(|v| v == d.verdict))
                    .collect();
                let agreement = (!with_verdict.is_empty())
                    .then(|| 100.0 * with_verdict.iter().filter(|x| **x).count() as f64 / with_verdict.len() as f64);
                (Some(shown.len()), agreement)
            }
        };
        Ok(SessionSummary {
            session_id: session_id.to_string(),
            group: state.session.group,
            pa_pct,
            mean_duration_s,
            n_decided: state.decisions.len(),
            n_pending: state.session.license_queue.len() - state.decisions.len(),
            n_assist_shown,
            assist_agreement_pct,
        })
    }

    fn as_outcome(&self, session: &ReviewSession, d: &ReviewDecision) -> Result<EvalOutcome, ReviewError> {
        let record = self
            .corpus
            .get(&d.license_id)
            .ok_or_else(|| ReviewError::NotFound(format!("license {} is no longer in the corpus", d.license_id)))?;
        Ok(EvalOutcome {
            license_id: d.license_id.clone(),
            model_id: session.reviewer_id.clone(),
            system_id: String::new(),
            user_id: String::new(),
            response_text: d.verdict.as_str().to_string(),
            extracted: d.verdict,
            ground_truth: record.label,
            correct: d.verdict.matches(record.label),
            normalized_response: d.verdict.as_str().to_string(),
            ss: None,
            latency_s: d.duration_s,
        })
    }
}
