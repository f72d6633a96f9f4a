//! Deterministic synthesis of illusion stimuli with their physical ground
//! truth and predicted human percept.

mod golden;
mod layout;
mod percept;
mod raster;
mod render;
mod sample;
mod spec;
mod stereo;
mod truth;

use thiserror::Error;

pub use golden::{build_corpus, corpus_specs, corpus_to_json, load_corpus, verify_corpus, GoldenEntry, GoldenMismatch, GOLDEN_CORPUS};
pub use layout::{
    cafe_wall_layout, ebbinghaus_layout, grid_layout, line_span, muller_lyer_layout, ramp, stripe_rows, validate,
    CafeWallLayout, Disk, EbbinghausGroup, GridLayout, MullerLyerFigure, BLACK_DISK_GRAY, DARK_THRESHOLD, INDUCER,
    INK, ORANGE, PAPER, STROKE_HALF, TILE_DARK, TILE_LIGHT, WHITE,
};
pub use percept::{
    cafe_wall_percept, contrast_stripe_percept, ebbinghaus_percept, expected_percept, grid_percept,
    muller_lyer_percept, stereogram_percept, BiasModel, ChoiceTag, PerceptExpectation, CLEAR_MARGIN,
};
pub use render::{black_disk_indices, decode_png, render, DecodedImage, RenderedStimulus};
pub use sample::{sample_catch_spec, sample_spec, Difficulty, MAX_REDRAWS};
pub use spec::{
    AutostereogramParams, CafeWallParams, ContrastStripeParams, EbbinghausParams, FinDirection, HiddenShape,
    IllusionKind, IllusionParams, IllusionSpec, MullerLyerParams, ScintillatingGridParams, SpecHash,
    DEFAULT_CANVAS, SCHEMA_VERSION,
};
pub use stereo::{decode_stereogram, hidden_mask, DepthMask, ShapeGeometry, CORRELATION_FLOOR};
pub use truth::{ground_truth, GroundTruth};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StimulusError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid bias model: {0}")]
    InvalidBias(String),
    #[error("ambiguous instance: predicted percept margin {margin_milli}/1000 below threshold")]
    AmbiguousInstance { margin_milli: u32 },
    #[error("no acceptable {kind} instance after {attempts} draws; check the bias model")]
    InternalExhaustion { kind: IllusionKind, attempts: u32 },
    #[error("image carries no stereogram self-correlation")]
    NotAStereogram,
    #[error("unknown illusion kind {0:?}")]
    UnknownKind(String),
    #[error("cannot parse spec: {0}")]
    Parse(String),
    #[error("malformed digest {0:?}")]
    BadDigest(String),
    #[error("png: {0}")]
    Png(String),
}
