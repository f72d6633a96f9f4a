//! Question items built from stimulus specs, and the per-subject novelty
//! registry.

mod build;
mod registry;
mod template;

use thiserror::Error;

use crate::stimulus::{IllusionKind, StimulusError};

pub use crate::stimulus::ChoiceTag;
pub use build::{build_item, canonical_hash, make_catch_item, QuestionItem};
pub use registry::InstanceRegistry;
pub use template::{Choice, KindTemplate, QuestionTemplates};

#[derive(Debug, Error)]
pub enum ItemError {
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error("no question template for {0}")]
    UnsupportedKind(IllusionKind),
    #[error("template: {0}")]
    Template(String),
    #[error("registry storage: {0}")]
    Storage(String),
}
