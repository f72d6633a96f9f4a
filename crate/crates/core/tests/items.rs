use std::collections::HashSet;

use proptest::prelude::*;

use qualia_core::items::{build_item, make_catch_item, QuestionTemplates};
use qualia_core::stimulus::{
    expected_percept, ground_truth, sample_catch_spec, sample_spec, BiasModel, ChoiceTag, Difficulty, FinDirection,
    IllusionKind, IllusionParams, IllusionSpec,
};

fn text(kind: IllusionKind, tag: ChoiceTag) -> String {
    QuestionTemplates::builtin().get(kind).unwrap().text_for(tag).unwrap().to_string()
}

#[test]
fn key_indices_point_at_the_right_texts() {
    let bias = BiasModel::default();
    for kind in IllusionKind::ALL {
        for seed in 0..1000u64 {
            let spec = if seed % 4 == 3 {
                sample_catch_spec(kind, seed, &bias).unwrap()
            } else {
                sample_spec(kind, seed, Difficulty::Standard, &bias).unwrap()
            };
            let item = build_item(&spec, &bias, seed ^ 0xabcd).unwrap();
            assert_eq!(item.k, 4);
            assert_eq!(item.choices.len(), 4);
            let texts = item.choice_texts();
            assert_eq!(texts.iter().collect::<HashSet<_>>().len(), 4, "{kind} {seed}: duplicate choices");
            assert_eq!(texts[item.veridical_idx], text(kind, ground_truth(&spec).veridical_tag()));
            let percept = expected_percept(&spec, &bias).unwrap();
            assert_eq!(texts[item.illusion_idx], text(kind, percept.modal));
            assert_eq!(item.veridical_idx == item.illusion_idx, percept.coincides_with_veridical);
        }
    }
}

#[test]
fn illusion_position_is_uniform_over_shuffles() {
    let bias = BiasModel::default();
    let spec = sample_spec(IllusionKind::CafeWall, 17, Difficulty::Standard, &bias).unwrap();
    let n = 10_000u64;
    let mut counts = [0u32; 4];
    for shuffle_seed in 0..n {
        counts[build_item(&spec, &bias, shuffle_seed).unwrap().illusion_idx] += 1;
    }
    let p = 0.25;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    for (pos, c) in counts.iter().enumerate() {
        let freq = f64::from(*c) / n as f64;
        assert!((freq - p).abs() <= 3.0 * se, "position {pos}: frequency {freq}, counts {counts:?}");
    }
}

/// Answers what the inducing context suggests: the side with outward fins
/// is longer, the disk among small inducers is bigger.
fn stereotype(spec: &IllusionSpec) -> ChoiceTag {
    match &spec.params {
        IllusionParams::MullerLyer(p) => {
            if p.fin_dir_left == FinDirection::Outward {
                ChoiceTag::LeftLonger
            } else {
                ChoiceTag::RightLonger
            }
        }
        IllusionParams::Ebbinghaus(p) => {
            if p.inducer_r_left < p.inducer_r_right {
                ChoiceTag::LeftBigger
            } else {
                ChoiceTag::RightBigger
            }
        }
        _ => unreachable!(),
    }
}

#[test]
fn stereotype_cheater_fails_size_catch_items() {
    let bias = BiasModel::default();
    for kind in [IllusionKind::MullerLyer, IllusionKind::Ebbinghaus] {
        let (mut context, mut fixed) = (0u32, 0u32);
        let n = 200;
        for seed in 0..n {
            let (spec, item) = make_catch_item(kind, seed, &bias).unwrap();
            assert!(item.is_catch);
            let texts = item.choice_texts();
            let idx = |tag| texts.iter().position(|t| *t == text(kind, tag)).unwrap();
            context += u32::from(idx(stereotype(&spec)) == item.veridical_idx);
            let left = if kind == IllusionKind::MullerLyer { ChoiceTag::LeftLonger } else { ChoiceTag::LeftBigger };
            fixed += u32::from(idx(left) == item.veridical_idx);
        }
        // chance over the two plausible sides is one half
        let margin = 0.1;
        assert!(f64::from(context) / f64::from(n as u32) <= 0.5 + margin, "{kind}: context cheater {context}/{n}");
        assert!(f64::from(fixed) / f64::from(n as u32) <= 0.5 + margin, "{kind}: fixed cheater {fixed}/{n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reshuffling_permutes_choices(kind_i in 0usize..6, seed in 0u64..5000, s1: u64, s2: u64) {
        let kind = IllusionKind::ALL[kind_i];
        let bias = BiasModel::default();
        let spec = sample_spec(kind, seed, Difficulty::Standard, &bias).unwrap();
        let a = build_item(&spec, &bias, s1).unwrap();
        let b = build_item(&spec, &bias, s2).unwrap();
        let mut ta = a.choice_texts();
        let mut tb = b.choice_texts();
        prop_assert_eq!(&ta[a.veridical_idx], &tb[b.veridical_idx]);
        prop_assert_eq!(&ta[a.illusion_idx], &tb[b.illusion_idx]);
        ta.sort();
        tb.sort();
        prop_assert_eq!(ta, tb);
        prop_assert_eq!(a.spec_hash, b.spec_hash);
    }

    #[test]
    fn items_round_trip_through_json(kind_i in 0usize..6, seed in 0u64..5000, shuffle: u64) {
        let kind = IllusionKind::ALL[kind_i];
        let bias = BiasModel::default();
        let spec = sample_spec(kind, seed, Difficulty::Subtle, &bias).unwrap();
        let item = build_item(&spec, &bias, shuffle).unwrap();
        let back = serde_json::from_str(&serde_json::to_string(&item).unwrap()).unwrap();
        prop_assert_eq!(item, back);
    }
}
