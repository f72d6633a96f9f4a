use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ItemError;
use crate::stimulus::{ChoiceTag, IllusionKind};

const BUILTIN: &str = include_str!("../../templates/default.json");

/// One answer option: the wording shown to the subject and its meaning.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Choice {
    pub tag: ChoiceTag,
    pub text: String,
}

fn default_choice_count() -> usize {
    4
}

/// Wording for one illusion kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindTemplate {
    pub prompt: String,
    #[serde(default = "default_choice_count")]
    pub choice_count: usize,
    /// Texts for every tag that can be a correct or illusory answer.
    pub answers: BTreeMap<ChoiceTag, String>,
    /// Extra options that are never correct.
    #[serde(default)]
    pub distractors: Vec<Choice>,
}

impl KindTemplate {
    pub fn text_for(&self, tag: ChoiceTag) -> Option<&str> {
        self.answers
            .get(&tag)
            .map(String::as_str)
            .or_else(|| self.distractors.iter().find(|c| c.tag == tag).map(|c| c.text.as_str()))
    }

    pub fn tag_for(&self, text: &str) -> Option<ChoiceTag> {
        self.answers
            .iter()
            .find(|(_, t)| t.as_str() == text)
            .map(|(tag, _)| *tag)
            .or_else(|| self.distractors.iter().find(|c| c.text == text).map(|c| c.tag))
    }

    fn option_count(&self) -> usize {
        self.answers.len() + self.distractors.len()
    }
}

/// Per-kind prompts and choice pools, loaded from JSON so that rewording is a
/// data change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTemplates {
    pub schema: u32,
    pub kinds: BTreeMap<IllusionKind, KindTemplate>,
}

impl QuestionTemplates {
    /// Templates shipped with the crate.
    pub fn builtin() -> &'static QuestionTemplates {
        static CELL: OnceLock<QuestionTemplates> = OnceLock::new();
        CELL.get_or_init(|| QuestionTemplates::from_json(BUILTIN).expect("builtin templates are valid"))
    }

    pub fn from_json(text: &str) -> Result<Self, ItemError> {
        let t: QuestionTemplates = serde_json::from_str(text).map_err(|e| ItemError::Template(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ItemError> {
        if self.schema != 1 {
            return Err(ItemError::Template(format!("unsupported template schema {}", self.schema)));
        }
        let mut prompts = BTreeSet::new();
        for (kind, t) in &self.kinds {
            if !(2..=8).contains(&t.choice_count) {
                return Err(ItemError::Template(format!("{kind}: choice_count must be in 2..=8")));
            }
            if t.option_count() < t.choice_count {
                return Err(ItemError::Template(format!("{kind}: fewer options than choice_count")));
            }
            let mut texts = BTreeSet::new();
            let mut tags = BTreeSet::new();
            for (tag, text) in t.answers.iter().chain(t.distractors.iter().map(|c| (&c.tag, &c.text))) {
                if !texts.insert(text.as_str()) || !tags.insert(*tag) {
                    return Err(ItemError::Template(format!("{kind}: duplicate option {text:?}")));
                }
            }
            if !prompts.insert(t.prompt.as_str()) {
                return Err(ItemError::Template(format!("{kind}: prompt shared with another kind")));
            }
        }
        Ok(())
    }

    pub fn get(&self, kind: IllusionKind) -> Result<&KindTemplate, ItemError> {
        self.kinds.get(&kind).ok_or(ItemError::UnsupportedKind(kind))
    }

    /// Prompts are unique per kind, so a prompt identifies its kind.
    pub fn kind_for_prompt(&self, prompt: &str) -> Option<IllusionKind> {
        self.kinds.iter().find(|(_, t)| t.prompt == prompt).map(|(k, _)| *k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_every_kind() {
        let t = QuestionTemplates::builtin();
        for kind in IllusionKind::ALL {
            let kt = t.get(kind).unwrap();
            assert_eq!(t.kind_for_prompt(&kt.prompt), Some(kind));
        }
    }

    #[test]
    fn text_and_tag_lookups_agree() {
        let kt = QuestionTemplates::builtin().get(IllusionKind::CafeWall).unwrap();
        assert_eq!(kt.text_for(ChoiceTag::Red), Some("Red"));
        assert_eq!(kt.tag_for("Crooked"), Some(ChoiceTag::Crooked));
        assert_eq!(kt.tag_for("Purple"), None);
    }

    #[test]
    fn duplicate_texts_are_rejected() {
        let text = r#"{"schema":1,"kinds":{"cafe_wall":{"prompt":"p","choice_count":2,
            "answers":{"straight":"Same","crooked":"Same"}}}}"#;
        assert!(matches!(QuestionTemplates::from_json(text), Err(ItemError::Template(_))));
    }

    #[test]
    fn choice_count_out_of_range_is_rejected() {
        let text = r#"{"schema":1,"kinds":{"cafe_wall":{"prompt":"p","choice_count":9,
            "answers":{"straight":"S","crooked":"C"}}}}"#;
        assert!(QuestionTemplates::from_json(text).is_err());
    }
}
