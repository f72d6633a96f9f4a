use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::template::{Choice, QuestionTemplates};
use super::ItemError;
use crate::rng::DetRng;
use crate::stimulus::{
    expected_percept, ground_truth, sample_catch_spec, BiasModel, ChoiceTag, IllusionKind, IllusionSpec, SpecHash,
};

/// A multiple-choice question about one stimulus instance. The two key
/// indices never leave the operator side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub item_id: String,
    pub spec_hash: SpecHash,
    pub kind: IllusionKind,
    pub prompt: String,
    pub choices: Vec<Choice>,
    pub veridical_idx: usize,
    pub illusion_idx: usize,
    pub k: usize,
    pub is_catch: bool,
}

impl QuestionItem {
    pub fn choice_texts(&self) -> Vec<String> {
        self.choices.iter().map(|c| c.text.clone()).collect()
    }

    pub fn index_of(&self, tag: ChoiceTag) -> Option<usize> {
        self.choices.iter().position(|c| c.tag == tag)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), ItemError> {
        let bad = |m: &str| Err(ItemError::Template(format!("item {}: {m}", self.item_id)));
        if !(2..=8).contains(&self.k) || self.choices.len() != self.k {
            return bad("choice count");
        }
        if self.veridical_idx >= self.k || self.illusion_idx >= self.k {
            return bad("key index out of range");
        }
        if self.is_catch != (self.veridical_idx == self.illusion_idx) {
            return bad("catch flag disagrees with key indices");
        }
        for (i, a) in self.choices.iter().enumerate() {
            if self.choices[i + 1..].iter().any(|b| b.text == a.text) {
                return bad("duplicate choice text");
            }
        }
        Ok(())
    }
}

fn item_id(hash: &SpecHash, shuffle_seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(b"item");
    h.update(hash.0);
    h.update(shuffle_seed.to_le_bytes());
    hex::encode(&h.finalize()[..8])
}

impl QuestionTemplates {
    /// Poses `spec` as a question. One choice carries the physical answer,
    /// one the predicted percept (the same choice for catch instances), the
    /// rest are distractors; the order is a permutation fixed by
    /// `shuffle_seed`.
    pub fn build_item(&self, spec: &IllusionSpec, bias: &BiasModel, shuffle_seed: u64) -> Result<QuestionItem, ItemError> {
        let percept = expected_percept(spec, bias)?;
        let veridical = ground_truth(spec).veridical_tag();
        let illusion = percept.modal;
        let kind = spec.kind();
        let t = self.get(kind)?;

        let mut tags = vec![veridical];
        if illusion != veridical {
            tags.push(illusion);
        }
        for tag in &tags {
            if !t.answers.contains_key(tag) {
                return Err(ItemError::Template(format!("{kind}: no text for answer {tag}")));
            }
        }

        let hash = spec.canonical_hash();
        // Distractors depend on the instance only, so reshuffling permutes
        // the same choices.
        let mut pick = DetRng::from_bytes("item-distractors", &hash.0);
        let mut pool: Vec<ChoiceTag> = t
            .answers
            .keys()
            .copied()
            .chain(t.distractors.iter().map(|c| c.tag))
            .filter(|tag| !tags.contains(tag))
            .collect();
        pick.shuffle(&mut pool);
        let k = t.choice_count;
        tags.extend(pool.into_iter().take(k - tags.len()));
        let mut order = DetRng::from_bytes("item-choices", &[hash.0.as_slice(), &shuffle_seed.to_le_bytes()].concat());
        order.shuffle(&mut tags);

        let choices: Vec<Choice> = tags
            .iter()
            .map(|tag| Choice { tag: *tag, text: t.text_for(*tag).expect("tag drawn from template").to_string() })
            .collect();
        let veridical_idx = tags.iter().position(|x| *x == veridical).unwrap();
        let illusion_idx = tags.iter().position(|x| *x == illusion).unwrap();
        let item = QuestionItem {
            item_id: item_id(&hash, shuffle_seed),
            spec_hash: hash,
            kind,
            prompt: t.prompt.clone(),
            k: choices.len(),
            choices,
            veridical_idx,
            illusion_idx,
            is_catch: veridical_idx == illusion_idx,
        };
        item.validate()?;
        Ok(item)
    }

    /// Draws a control instance where percept and physical answer agree and
    /// poses it.
    pub fn make_catch_item(
        &self,
        kind: IllusionKind,
        seed: u64,
        bias: &BiasModel,
    ) -> Result<(IllusionSpec, QuestionItem), ItemError> {
        self.get(kind)?;
        let spec = sample_catch_spec(kind, seed, bias)?;
        let item = self.build_item(&spec, bias, seed)?;
        debug_assert!(item.is_catch);
        Ok((spec, item))
    }
}

/// [`QuestionTemplates::build_item`] with the builtin templates.
pub fn build_item(spec: &IllusionSpec, bias: &BiasModel, shuffle_seed: u64) -> Result<QuestionItem, ItemError> {
    QuestionTemplates::builtin().build_item(spec, bias, shuffle_seed)
}

/// [`QuestionTemplates::make_catch_item`] with the builtin templates.
pub fn make_catch_item(kind: IllusionKind, seed: u64, bias: &BiasModel) -> Result<(IllusionSpec, QuestionItem), ItemError> {
    QuestionTemplates::builtin().make_catch_item(kind, seed, bias)
}

pub fn canonical_hash(spec: &IllusionSpec) -> SpecHash {
    spec.canonical_hash()
}
