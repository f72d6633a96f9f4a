//! Pinned render corpus: ten specs per kind with their canonical digests and
//! pixel-buffer digests.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::percept::BiasModel;
use super::render::render;
use super::sample::{sample_catch_spec, sample_spec, Difficulty};
use super::spec::{IllusionKind, IllusionSpec, SpecHash};
use super::StimulusError;

pub const GOLDEN_CORPUS: &str = include_str!("../../golden/render_corpus.json");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenEntry {
    pub spec: IllusionSpec,
    pub spec_hash: SpecHash,
    pub pixel_digest: String,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    spec: Value,
    spec_hash: SpecHash,
    pixel_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenMismatch {
    pub index: usize,
    pub what: String,
}

/// Five standard, two subtle and three catch instances per kind.
pub fn corpus_specs() -> Result<Vec<IllusionSpec>, StimulusError> {
    let bias = BiasModel::default();
    let mut out = Vec::new();
    for kind in IllusionKind::ALL {
        for seed in 1000..1005 {
            out.push(sample_spec(kind, seed, Difficulty::Standard, &bias)?);
        }
        for seed in 2000..2002 {
            out.push(sample_spec(kind, seed, Difficulty::Subtle, &bias)?);
        }
        for seed in 3000..3003 {
            out.push(sample_catch_spec(kind, seed, &bias)?);
        }
    }
    Ok(out)
}

pub fn build_corpus() -> Result<Vec<GoldenEntry>, StimulusError> {
    corpus_specs()?
        .into_iter()
        .map(|spec| {
            let img = render(&spec)?;
            Ok(GoldenEntry { spec_hash: spec.canonical_hash(), pixel_digest: img.pixel_digest(), spec })
        })
        .collect()
}

pub fn corpus_to_json(entries: &[GoldenEntry]) -> String {
    let raw: Vec<RawEntry> = entries
        .iter()
        .map(|e| RawEntry {
            spec: serde_json::from_str(&e.spec.canonical_json()).expect("canonical json parses"),
            spec_hash: e.spec_hash,
            pixel_digest: e.pixel_digest.clone(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&raw).expect("corpus serializes");
    text.push('\n');
    text
}

pub fn load_corpus(text: &str) -> Result<Vec<GoldenEntry>, StimulusError> {
    let raw: Vec<RawEntry> = serde_json::from_str(text).map_err(|e| StimulusError::Parse(e.to_string()))?;
    raw.into_iter()
        .map(|mut r| {
            Ok(GoldenEntry {
                spec: IllusionSpec::from_value(&mut r.spec)?,
                spec_hash: r.spec_hash,
                pixel_digest: r.pixel_digest,
            })
        })
        .collect()
}

/// Re-renders every entry and reports each digest that differs.
pub fn verify_corpus(entries: &[GoldenEntry]) -> Vec<GoldenMismatch> {
    let mut bad = Vec::new();
    for (index, e) in entries.iter().enumerate() {
        let hash = e.spec.canonical_hash();
        if hash != e.spec_hash {
            bad.push(GoldenMismatch { index, what: format!("spec hash {hash} != pinned {}", e.spec_hash) });
        }
        match render(&e.spec) {
            Ok(img) if img.pixel_digest() != e.pixel_digest => bad.push(GoldenMismatch {
                index,
                what: format!("pixel digest {} != pinned {}", img.pixel_digest(), e.pixel_digest),
            }),
            Ok(_) => {}
            Err(err) => bad.push(GoldenMismatch { index, what: err.to_string() }),
        }
    }
    bad
}
