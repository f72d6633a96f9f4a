//! Illusion-based test harness for detecting experience in an agent.
//!
//! Never-before-seen visual illusion stimuli are synthesized, posed as
//! multiple-choice questions, and the answers accumulated into a posterior
//! over three response hypotheses: guessing, reporting the physical
//! (veridical) facts, or reporting the illusory percept.

pub mod agents;
pub mod inference;
pub mod items;
mod rng;
pub mod session;
pub mod stimulus;

pub use agents::{run_agent_session, AgentError, AgentPolicy};
pub use inference::{Hypothesis, Posterior, TestConfig, VerdictLabel};
pub use items::{ChoiceTag, InstanceRegistry, QuestionItem};
pub use session::{Outcome, Session, SessionState, Verdict};
pub use stimulus::{BiasModel, Difficulty, IllusionKind, IllusionSpec, RenderedStimulus};
