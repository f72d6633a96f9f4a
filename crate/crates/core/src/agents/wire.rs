//! Line-delimited JSON protocol spoken with external agents over stdio.
//!
//! Tester to agent: `hello`, then one `item` per question, then `verdict`.
//! Agent to tester: `ready`, then one `answer` per item. Unknown fields are
//! ignored. An unknown `type` is a malformed message.

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::items::QuestionItem;
use crate::session::Verdict;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ToAgent {
    Hello {
        protocol: u32,
    },
    Item {
        session_id: String,
        item_id: String,
        prompt: String,
        choices: Vec<String>,
        image_png_b64: String,
    },
    Verdict {
        label: String,
        posterior: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FromAgent {
    Ready,
    Answer { item_id: String, choice: usize },
}

impl ToAgent {
    pub fn hello() -> Self {
        ToAgent::Hello { protocol: PROTOCOL_VERSION }
    }

    /// The question as the agent sees it: no answer key.
    pub fn item(session_id: &str, item: &QuestionItem, png: &[u8]) -> Self {
        ToAgent::Item {
            session_id: session_id.to_string(),
            item_id: item.item_id.clone(),
            prompt: item.prompt.clone(),
            choices: item.choice_texts(),
            image_png_b64: base64::engine::general_purpose::STANDARD.encode(png),
        }
    }

    pub fn verdict(v: &Verdict) -> Self {
        ToAgent::Verdict { label: v.label.to_string(), posterior: v.posterior.probs }
    }

    pub fn decode_image(b64: &str) -> Result<Vec<u8>, AgentError> {
        base64::engine::general_purpose::STANDARD
            .decode(b64)
            .map_err(|e| AgentError::MalformedReply(format!("bad image encoding: {e}")))
    }
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("wire messages serialize")
}

pub fn decode_to_agent(line: &str) -> Result<ToAgent, AgentError> {
    serde_json::from_str(line.trim()).map_err(|e| AgentError::MalformedReply(format!("{e}: {line:?}")))
}

pub fn decode_from_agent(line: &str) -> Result<FromAgent, AgentError> {
    serde_json::from_str(line.trim()).map_err(|e| AgentError::MalformedReply(format!("{e}: {line:?}")))
}
