//! Agents that take the test: seeded reference policies for calibrating
//! the statistics, an image-reading perceiver, and external programs
//! reached over a line-delimited JSON protocol.

mod external;
pub mod vision;
pub mod wire;

use std::io::{BufRead, Write};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::inference::TestConfig;
use crate::items::{InstanceRegistry, ItemError, QuestionItem};
use crate::rng::DetRng;
use crate::session::{NullSink, Outcome, Session, SessionError, Verdict};
use crate::stimulus::BiasModel;

pub use external::{ExternalAgent, DEFAULT_TIMEOUT};
pub use wire::{FromAgent, ToAgent, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent did not answer in time")]
    Timeout,
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("agent transport: {0}")]
    Transport(String),
    #[error("perception failed: {0}")]
    Perception(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl From<ItemError> for AgentError {
    fn from(e: ItemError) -> Self {
        AgentError::Perception(e.to_string())
    }
}

pub enum AgentPolicy {
    /// Uniform over the choices.
    RandomGuesser { seed: u64 },
    /// Reports the physical answer, lapsing to a uniform pick with
    /// probability `epsilon`. Reads the answer key.
    VeridicalSimulant { epsilon: f64, seed: u64 },
    /// Reports the illusory answer, lapsing like the veridical simulant.
    /// Reads the answer key.
    PerceiverSimulant { epsilon: f64, seed: u64 },
    /// Measures the image and applies the bias model; no answer key.
    ImagePerceiver { bias: BiasModel },
    External(Box<ExternalAgent>),
}

impl std::fmt::Debug for AgentPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgentPolicy::RandomGuesser { seed } => write!(f, "RandomGuesser({seed})"),
            AgentPolicy::VeridicalSimulant { epsilon, seed } => write!(f, "VeridicalSimulant({epsilon}, {seed})"),
            AgentPolicy::PerceiverSimulant { epsilon, seed } => write!(f, "PerceiverSimulant({epsilon}, {seed})"),
            AgentPolicy::ImagePerceiver { .. } => f.write_str("ImagePerceiver"),
            AgentPolicy::External(_) => f.write_str("External"),
        }
    }
}

fn answer_rng(seed: u64, item_id: &str) -> DetRng {
    let mut key = seed.to_le_bytes().to_vec();
    key.extend(item_id.as_bytes());
    DetRng::from_bytes("agent-answer", &key)
}

fn simulant(epsilon: f64, seed: u64, item: &QuestionItem, target: usize) -> usize {
    let mut rng = answer_rng(seed, &item.item_id);
    if rng.unit() < epsilon {
        rng.below(item.k as u64) as usize
    } else {
        target
    }
}

impl AgentPolicy {
    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            AgentPolicy::VeridicalSimulant { epsilon, .. } | AgentPolicy::PerceiverSimulant { epsilon, .. }
                if !(0.0..0.5).contains(epsilon) =>
            {
                Err(AgentError::InvalidPolicy(format!("epsilon {epsilon} outside [0, 0.5)")))
            }
            _ => Ok(()),
        }
    }

    /// Whether answering needs the rendered image.
    pub fn needs_image(&self) -> bool {
        matches!(self, AgentPolicy::ImagePerceiver { .. } | AgentPolicy::External(_))
    }

    /// Chooses an answer. Seeded policies are deterministic in
    /// `(seed, item_id)`.
    pub fn answer(&mut self, session_id: &str, item: &QuestionItem, png: &[u8]) -> Result<usize, AgentError> {
        match self {
            AgentPolicy::RandomGuesser { seed } => {
                Ok(answer_rng(*seed, &item.item_id).below(item.k as u64) as usize)
            }
            AgentPolicy::VeridicalSimulant { epsilon, seed } => Ok(simulant(*epsilon, *seed, item, item.veridical_idx)),
            AgentPolicy::PerceiverSimulant { epsilon, seed } => Ok(simulant(*epsilon, *seed, item, item.illusion_idx)),
            AgentPolicy::ImagePerceiver { bias } => vision::perceive(&item.prompt, &item.choice_texts(), png, bias),
            AgentPolicy::External(agent) => agent.ask(session_id, item, png),
        }
    }
}

/// Runs `session` to its verdict with `policy` answering. Timeouts and
/// malformed replies are recorded as null answers; transport failures end
/// the run.
pub fn run_agent_session(policy: &mut AgentPolicy, session: &mut Session) -> Result<Verdict, AgentError> {
    policy.validate()?;
    if let AgentPolicy::External(agent) = policy {
        agent.handshake()?;
    }
    loop {
        let (item, png) = if policy.needs_image() {
            session.next_item()?
        } else {
            (session.next_item_unrendered()?, Vec::new())
        };
        let started = Instant::now();
        let choice = match policy.answer(session.session_id(), &item, &png) {
            Ok(c) => Some(c),
            Err(AgentError::Timeout | AgentError::MalformedReply(_) | AgentError::Perception(_)) => None,
            Err(e) => return Err(e),
        };
        let latency = started.elapsed().as_millis() as u64;
        if let Outcome::Verdict(v) = session.submit_answer(&item.item_id, choice, latency)? {
            if let AgentPolicy::External(agent) = policy {
                // The verdict is courtesy; an agent that already left is fine.
                let _ = agent.send_verdict(&v);
            }
            return Ok(v);
        }
    }
}

/// One session for `subject_id` against a private in-memory registry.
pub fn run_simulated_session(
    policy: &mut AgentPolicy,
    subject_id: &str,
    config: TestConfig,
) -> Result<Verdict, AgentError> {
    let mut session = Session::create(subject_id, config, Arc::new(InstanceRegistry::in_memory(false)), Box::new(NullSink))?;
    run_agent_session(policy, &mut session)
}

/// Agent side of the wire protocol: answers `ready` to `hello` and calls
/// `respond` for each item until the verdict arrives or input ends.
pub fn serve_wire_agent(
    input: impl BufRead,
    mut output: impl Write,
    mut respond: impl FnMut(&str, &[String], &[u8]) -> usize,
) -> Result<Option<ToAgent>, AgentError> {
    let io = |e: std::io::Error| AgentError::Transport(e.to_string());
    for line in input.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match wire::decode_to_agent(&line)? {
            ToAgent::Hello { .. } => FromAgent::Ready,
            ToAgent::Item { item_id, prompt, choices, image_png_b64, .. } => {
                let png = ToAgent::decode_image(&image_png_b64)?;
                FromAgent::Answer { choice: respond(&prompt, &choices, &png), item_id }
            }
            verdict @ ToAgent::Verdict { .. } => return Ok(Some(verdict)),
        };
        writeln!(output, "{}", wire::encode(&reply)).and_then(|_| output.flush()).map_err(io)?;
    }
    Ok(None)
}
