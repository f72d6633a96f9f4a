//! Test sessions: issuing fresh items, scoring answers and closing with a
//! verdict, with every step written to an append-only event log.

mod log;

use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{
    guess_pvalue, item_likelihoods, stopping_decision, update_posterior, Decision, InferenceError, Posterior,
    TestConfig,
};
use crate::items::{InstanceRegistry, ItemError, QuestionItem, QuestionTemplates};
use crate::rng::DetRng;
use crate::stimulus::{render, sample_catch_spec, sample_spec, IllusionSpec, StimulusError};

pub use crate::inference::VerdictLabel;
pub use log::{parse_log, EventSink, FileSink, MemorySink, NullSink, SessionEvent};

/// Registry rejections tolerated for a single item before giving up.
pub const MAX_NOVELTY_ATTEMPTS: u32 = 256;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("out of order: {0}")]
    OutOfOrder(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("choice {index} out of range for {k} choices")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("no fresh instance after {attempts} draws; the enabled parameter space is too small")]
    NoveltyExhausted { attempts: u32 },
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error(transparent)]
    Item(#[from] ItemError),
    #[error(transparent)]
    Inference(InferenceError),
}

impl From<InferenceError> for SessionError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::ConfigInvalid(m) => SessionError::ConfigInvalid(m),
            InferenceError::IndexOutOfRange { index, k } => SessionError::IndexOutOfRange { index, k },
            other => SessionError::Inference(other),
        }
    }
}

impl From<StimulusError> for SessionError {
    fn from(e: StimulusError) -> Self {
        SessionError::Item(ItemError::Stimulus(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    ReadyForItem,
    AwaitingAnswer,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssuedItem {
    pub item: QuestionItem,
    pub spec: IllusionSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub item_id: String,
    pub choice: Option<usize>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub posterior: Posterior,
    /// Chance of at least this many illusion-consistent answers on the
    /// scored items under pure guessing. Absent when no scored item was
    /// answered.
    pub p_value: Option<f64>,
    pub n_items: u32,
    pub n_catch: u32,
    pub catch_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Continue,
    Verdict(Verdict),
}

/// Comparable view of a session's state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub subject_id: String,
    pub config: TestConfig,
    pub issued: Vec<IssuedItem>,
    pub answers: Vec<AnswerRecord>,
    pub posterior: Posterior,
    pub state: SessionState,
    pub verdict: Option<Verdict>,
}

/// A fresh random session id.
pub fn new_session_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

pub struct Session {
    session_id: String,
    subject_id: String,
    config: TestConfig,
    issued: Vec<IssuedItem>,
    answers: Vec<AnswerRecord>,
    posterior: Posterior,
    state: SessionState,
    verdict: Option<Verdict>,
    registry: Arc<InstanceRegistry>,
    templates: &'static QuestionTemplates,
    sink: Box<dyn EventSink>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("session_id", &self.session_id)
            .field("subject_id", &self.subject_id)
            .field("state", &self.state)
            .field("n_issued", &self.issued.len())
            .finish()
    }
}

impl Session {
    pub fn create(
        subject_id: &str,
        config: TestConfig,
        registry: Arc<InstanceRegistry>,
        sink: Box<dyn EventSink>,
    ) -> Result<Session, SessionError> {
        Self::create_with_id(&new_session_id(), subject_id, config, registry, sink)
    }

    pub fn create_with_id(
        session_id: &str,
        subject_id: &str,
        config: TestConfig,
        registry: Arc<InstanceRegistry>,
        mut sink: Box<dyn EventSink>,
    ) -> Result<Session, SessionError> {
        config.validate()?;
        sink.append(&SessionEvent::Created {
            session_id: session_id.to_string(),
            subject_id: subject_id.to_string(),
            config: config.clone(),
            ts_ms: log::now_ms(),
        })?;
        Ok(Self::empty(session_id.to_string(), subject_id.to_string(), config, registry, sink))
    }

    fn empty(
        session_id: String,
        subject_id: String,
        config: TestConfig,
        registry: Arc<InstanceRegistry>,
        sink: Box<dyn EventSink>,
    ) -> Session {
        Session {
            posterior: Posterior::from_prior(config.prior),
            session_id,
            subject_id,
            config,
            issued: Vec::new(),
            answers: Vec::new(),
            state: SessionState::ReadyForItem,
            verdict: None,
            registry,
            templates: QuestionTemplates::builtin(),
            sink,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn config(&self) -> &TestConfig {
        &self.config
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    pub fn verdict(&self) -> Option<&Verdict> {
        self.verdict.as_ref()
    }

    pub fn issued(&self) -> &[IssuedItem] {
        &self.issued
    }

    pub fn answers(&self) -> &[AnswerRecord] {
        &self.answers
    }

    /// The item waiting for an answer, if any.
    pub fn outstanding(&self) -> Option<&IssuedItem> {
        match self.state {
            SessionState::AwaitingAnswer => self.issued.last(),
            _ => None,
        }
    }

    pub fn find_issued(&self, item_id: &str) -> Option<&IssuedItem> {
        self.issued.iter().find(|i| i.item.item_id == item_id)
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            session_id: self.session_id.clone(),
            subject_id: self.subject_id.clone(),
            config: self.config.clone(),
            issued: self.issued.clone(),
            answers: self.answers.clone(),
            posterior: self.posterior.clone(),
            state: self.state,
            verdict: self.verdict.clone(),
        }
    }

    /// Issues the next item and its rendered PNG.
    pub fn next_item(&mut self) -> Result<(QuestionItem, Vec<u8>), SessionError> {
        let item = self.next_item_unrendered()?;
        let spec = &self.issued.last().expect("just issued").spec;
        let png = render(spec)?.to_png()?;
        Ok((item, png))
    }

    /// Issues the next item without rendering it, for agents that do not
    /// look at the image.
    pub fn next_item_unrendered(&mut self) -> Result<QuestionItem, SessionError> {
        match self.state {
            SessionState::ReadyForItem => {}
            SessionState::AwaitingAnswer => {
                return Err(SessionError::OutOfOrder("an item is awaiting an answer".into()));
            }
            SessionState::Closed => return Err(SessionError::OutOfOrder("session is closed".into())),
        }
        let seq = self.issued.len() as u32;
        for attempt in 0..MAX_NOVELTY_ATTEMPTS {
            let (spec, item) = self.draw(seq, attempt)?;
            if !self.registry.check_and_register(&self.subject_id, item.spec_hash)? {
                continue;
            }
            self.sink.append(&SessionEvent::ItemIssued {
                seq,
                spec_hash: item.spec_hash,
                spec: spec.clone(),
                item: item.clone(),
                attempts: attempt + 1,
                ts_ms: log::now_ms(),
            })?;
            self.issued.push(IssuedItem { item: item.clone(), spec });
            self.state = SessionState::AwaitingAnswer;
            return Ok(item);
        }
        Err(SessionError::NoveltyExhausted { attempts: MAX_NOVELTY_ATTEMPTS })
    }

    fn draw(&self, seq: u32, attempt: u32) -> Result<(IllusionSpec, QuestionItem), SessionError> {
        let mut key = Vec::with_capacity(24 + self.subject_id.len());
        key.extend(self.config.master_seed.to_le_bytes());
        key.extend((self.subject_id.len() as u64).to_le_bytes());
        key.extend(self.subject_id.as_bytes());
        key.extend(seq.to_le_bytes());
        key.extend(attempt.to_le_bytes());
        let mut rng = DetRng::from_bytes("session-item", &key);
        let kinds = &self.config.kinds;
        let kind = kinds[rng.below(kinds.len() as u64) as usize];
        let catch = rng.chance_milli(self.config.catch_ratio_milli);
        let spec_seed = rng.next_u64();
        let shuffle_seed = rng.next_u64();
        let bias = &self.config.bias;
        let spec = if catch {
            sample_catch_spec(kind, spec_seed, bias)?
        } else {
            sample_spec(kind, spec_seed, self.config.difficulty, bias)?
        };
        let item = self.templates.build_item(&spec, bias, shuffle_seed)?;
        Ok((spec, item))
    }

    /// Records an answer to the outstanding item. `None` marks a timeout or
    /// malformed reply; it is logged but carries no evidence.
    pub fn submit_answer(
        &mut self,
        item_id: &str,
        choice: Option<usize>,
        latency_ms: u64,
    ) -> Result<Outcome, SessionError> {
        match self.state {
            SessionState::AwaitingAnswer => {}
            SessionState::ReadyForItem => {
                if self.find_issued(item_id).is_some() {
                    return Err(SessionError::UnknownItem(item_id.to_string()));
                }
                return Err(SessionError::OutOfOrder("no item is awaiting an answer".into()));
            }
            SessionState::Closed => return Err(SessionError::OutOfOrder("session is closed".into())),
        }
        let current = &self.issued.last().expect("awaiting implies issued").item;
        if current.item_id != item_id {
            return Err(SessionError::UnknownItem(item_id.to_string()));
        }
        let next_posterior = match choice {
            Some(c) => Some(update_posterior(
                &self.posterior,
                item_likelihoods(current, c, self.config.lapse_epsilon)?,
            )?),
            None => None,
        };
        self.sink.append(&SessionEvent::Answered {
            item_id: item_id.to_string(),
            choice,
            latency_ms,
            ts_ms: log::now_ms(),
        })?;
        self.apply_answer(item_id, choice, latency_ms, next_posterior);
        match self.decide() {
            None => Ok(Outcome::Continue),
            Some(verdict) => {
                self.sink.append(&SessionEvent::Verdict { verdict: verdict.clone(), ts_ms: log::now_ms() })?;
                self.close(verdict.clone());
                Ok(Outcome::Verdict(verdict))
            }
        }
    }

    fn apply_answer(&mut self, item_id: &str, choice: Option<usize>, latency_ms: u64, post: Option<Posterior>) {
        self.answers.push(AnswerRecord { item_id: item_id.to_string(), choice, latency_ms });
        if let Some(p) = post {
            self.posterior = p;
        }
        self.state = SessionState::ReadyForItem;
    }

    fn close(&mut self, verdict: Verdict) {
        self.verdict = Some(verdict);
        self.state = SessionState::Closed;
    }

    /// Applies the stopping rule; the item budget counts issued items so that
    /// an agent that never answers still terminates.
    fn decide(&self) -> Option<Verdict> {
        let label = match stopping_decision(&self.posterior, &self.config) {
            Decision::Verdict(l) => l,
            Decision::Continue if self.issued.len() as u32 >= self.config.n_max => VerdictLabel::Inconclusive,
            Decision::Continue => return None,
        };
        Some(self.build_verdict(label))
    }

    fn build_verdict(&self, label: VerdictLabel) -> Verdict {
        let mut match_probs = Vec::new();
        let mut matches = 0;
        let (mut n_catch, mut catch_answered, mut catch_correct) = (0u32, 0u32, 0u32);
        for (issued, answer) in self.issued.iter().zip(&self.answers) {
            let item = &issued.item;
            if item.is_catch {
                n_catch += 1;
            }
            let Some(choice) = answer.choice else { continue };
            if item.is_catch {
                catch_answered += 1;
                catch_correct += u32::from(choice == item.veridical_idx);
            } else {
                match_probs.push(1.0 / item.k as f64);
                matches += usize::from(choice == item.illusion_idx);
            }
        }
        Verdict {
            label,
            posterior: self.posterior.clone(),
            p_value: guess_pvalue(&match_probs, matches).ok(),
            n_items: self.issued.len() as u32,
            n_catch,
            catch_accuracy: (catch_answered > 0).then(|| f64::from(catch_correct) / f64::from(catch_answered)),
        }
    }

    /// Rebuilds a session from its log. The registry and sink are used only
    /// for items issued after the replay.
    pub fn replay_events(
        events: &[SessionEvent],
        registry: Arc<InstanceRegistry>,
        sink: Box<dyn EventSink>,
    ) -> Result<Session, SessionError> {
        let corrupt = |i: usize, reason: &str| SessionError::CorruptLog { line: i + 1, reason: reason.to_string() };
        let mut session = match events.first() {
            Some(SessionEvent::Created { session_id, subject_id, config, .. }) => {
                config.validate().map_err(|e| corrupt(0, &e.to_string()))?;
                Session::empty(session_id.clone(), subject_id.clone(), config.clone(), registry, sink)
            }
            _ => return Err(corrupt(0, "log does not start with a created record")),
        };
        for (i, ev) in events.iter().enumerate().skip(1) {
            match ev {
                SessionEvent::Created { .. } => return Err(corrupt(i, "duplicate created record")),
                SessionEvent::ItemIssued { seq, spec_hash, spec, item, .. } => {
                    if session.state != SessionState::ReadyForItem {
                        return Err(corrupt(i, "item issued while another is outstanding or after close"));
                    }
                    if *seq as usize != session.issued.len() || item.spec_hash != *spec_hash {
                        return Err(corrupt(i, "item record inconsistent with log position"));
                    }
                    if spec.canonical_hash() != *spec_hash || item.validate().is_err() {
                        return Err(corrupt(i, "item record does not match its spec"));
                    }
                    // A fresh registry must still refuse what this log already showed.
                    session.registry.check_and_register(&session.subject_id, *spec_hash)?;
                    session.issued.push(IssuedItem { item: item.clone(), spec: spec.clone() });
                    session.state = SessionState::AwaitingAnswer;
                }
                SessionEvent::Answered { item_id, choice, latency_ms, .. } => {
                    let Some(current) = session.outstanding() else {
                        return Err(corrupt(i, "answer without an outstanding item"));
                    };
                    if current.item.item_id != *item_id {
                        return Err(corrupt(i, "answer names a different item"));
                    }
                    let post = match choice {
                        Some(c) => {
                            let likes = item_likelihoods(&current.item, *c, session.config.lapse_epsilon)
                                .map_err(|e| corrupt(i, &e.to_string()))?;
                            Some(update_posterior(&session.posterior, likes).map_err(|e| corrupt(i, &e.to_string()))?)
                        }
                        None => None,
                    };
                    session.apply_answer(item_id, *choice, *latency_ms, post);
                }
                SessionEvent::Verdict { verdict, .. } => {
                    if session.state != SessionState::ReadyForItem {
                        return Err(corrupt(i, "verdict out of sequence"));
                    }
                    match session.decide() {
                        Some(v) if v.label == verdict.label => session.close(v),
                        _ => return Err(corrupt(i, "recorded verdict disagrees with the answers")),
                    }
                }
            }
        }
        Ok(session)
    }

    /// Reads a JSON-lines log and rebuilds the session.
    pub fn replay(
        mut reader: impl Read,
        registry: Arc<InstanceRegistry>,
        sink: Box<dyn EventSink>,
    ) -> Result<Session, SessionError> {
        let mut text = String::new();
        reader.read_to_string(&mut text).map_err(|e| SessionError::Storage(e.to_string()))?;
        Self::replay_events(&parse_log(&text)?, registry, sink)
    }
}
