//! Bias model for the modal human percept and the semantic answer tags.
//!
//! The percept rules are written on measured features (lengths, radii, gray
//! levels) rather than on a spec so that an image-reading agent can apply the
//! same model to what it measures.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::spec::*;
use super::truth::ground_truth;
use super::StimulusError;

/// Semantic meaning of a choice, independent of its wording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceTag {
    LeftLonger,
    RightLonger,
    SameLength,
    LeftBigger,
    RightBigger,
    SameSize,
    Straight,
    Crooked,
    Solid,
    SpectrumOfGray,
    NoBlackDots,
    DotsFlicker,
    OneBlackDot,
    ShapeCircle,
    ShapeSquare,
    ShapeTriangle,
    ShapeCross,
    ShapeStar,
    JustNoise,
    NotInImage,
    Red,
    RedGridLines,
}

impl ChoiceTag {
    pub fn for_shape(shape: HiddenShape) -> ChoiceTag {
        match shape {
            HiddenShape::None => ChoiceTag::JustNoise,
            HiddenShape::Circle => ChoiceTag::ShapeCircle,
            HiddenShape::Square => ChoiceTag::ShapeSquare,
            HiddenShape::Triangle => ChoiceTag::ShapeTriangle,
            HiddenShape::Cross => ChoiceTag::ShapeCross,
            HiddenShape::Star => ChoiceTag::ShapeStar,
        }
    }
}

impl fmt::Display for ChoiceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("tag serializes");
        f.write_str(v.as_str().unwrap_or_default())
    }
}

/// Perceived-size biases, in thousandths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasModel {
    /// Müller-Lyer: outward fins scale perceived length by `1 + beta`,
    /// inward fins by `1 - beta`.
    pub beta_ml_milli: u32,
    /// Ebbinghaus: small inducers scale perceived radius by `1 + gamma`,
    /// large inducers by `1 - gamma`.
    pub gamma_eb_milli: u32,
    /// Instances with a weaker predicted percept are rejected as ambiguous.
    pub min_percept_margin_milli: u32,
}

impl Default for BiasModel {
    fn default() -> Self {
        BiasModel { beta_ml_milli: 120, gamma_eb_milli: 100, min_percept_margin_milli: 50 }
    }
}

impl BiasModel {
    pub fn validate(&self) -> Result<(), StimulusError> {
        for (name, v) in [("beta_ml_milli", self.beta_ml_milli), ("gamma_eb_milli", self.gamma_eb_milli)] {
            if v == 0 || v >= 500 {
                return Err(StimulusError::InvalidBias(format!("{name} = {v} outside (0, 500)")));
            }
        }
        if self.min_percept_margin_milli > 1000 {
            return Err(StimulusError::InvalidBias("min_percept_margin_milli above 1000".into()));
        }
        Ok(())
    }
}

/// Predicted modal percept of a stimulus instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptExpectation {
    pub modal: ChoiceTag,
    pub margin_milli: u32,
    pub coincides_with_veridical: bool,
}

/// Strength reported for percepts that simply follow an unambiguous physical
/// configuration.
pub const CLEAR_MARGIN: u32 = 1000;

/// Modal choice between two sizes after scaling each by its bias factor
/// (factors in thousandths). Returns the tag index 0 = left, 1 = right,
/// 2 = same, together with the margin.
fn compare_scaled(left: u32, fl: i64, right: u32, fr: i64) -> (usize, u32) {
    if fl == fr && left == right {
        return (2, CLEAR_MARGIN);
    }
    let pl = i64::from(left) * fl;
    let pr = i64::from(right) * fr;
    let base = i64::from(left.max(right)).max(1);
    let margin = ((pl - pr).abs() / base).min(i64::from(CLEAR_MARGIN)) as u32;
    match pl.cmp(&pr) {
        std::cmp::Ordering::Greater => (0, margin),
        std::cmp::Ordering::Less => (1, margin),
        std::cmp::Ordering::Equal => (2, 0),
    }
}

pub fn muller_lyer_percept(
    bias: &BiasModel,
    left: (u32, FinDirection),
    right: (u32, FinDirection),
) -> (ChoiceTag, u32) {
    let factor = |d: FinDirection| match d {
        FinDirection::Outward => 1000 + i64::from(bias.beta_ml_milli),
        FinDirection::Inward => 1000 - i64::from(bias.beta_ml_milli),
    };
    let (side, margin) = compare_scaled(left.0, factor(left.1), right.0, factor(right.1));
    ([ChoiceTag::LeftLonger, ChoiceTag::RightLonger, ChoiceTag::SameLength][side], margin)
}

/// `left`/`right` are (center radius, inducer radius).
pub fn ebbinghaus_percept(bias: &BiasModel, left: (u32, u32), right: (u32, u32)) -> (ChoiceTag, u32) {
    let factor = |(r, ri): (u32, u32)| match ri.cmp(&r) {
        std::cmp::Ordering::Less => 1000 + i64::from(bias.gamma_eb_milli),
        std::cmp::Ordering::Greater => 1000 - i64::from(bias.gamma_eb_milli),
        std::cmp::Ordering::Equal => 1000,
    };
    let (side, margin) = compare_scaled(left.0, factor(left), right.0, factor(right));
    ([ChoiceTag::LeftBigger, ChoiceTag::RightBigger, ChoiceTag::SameSize][side], margin)
}

/// Tiles are black and white; the wedge illusion needs shifted rows and a
/// thin mortar strictly between the tile grays.
pub fn cafe_wall_percept(row_offset_milli: u32, mortar_px: u32, mortar_gray: u32, tilt_decideg: i32) -> (ChoiceTag, u32) {
    if tilt_decideg != 0 {
        return (ChoiceTag::Crooked, CLEAR_MARGIN);
    }
    let illusory = row_offset_milli > 0 && mortar_px > 0 && (1..=254).contains(&mortar_gray);
    if illusory {
        (ChoiceTag::Crooked, (2 * row_offset_milli).min(CLEAR_MARGIN))
    } else {
        (ChoiceTag::Straight, CLEAR_MARGIN)
    }
}

pub fn contrast_stripe_percept(stripe: (u32, u32), background: (u32, u32)) -> (ChoiceTag, u32) {
    if stripe.0 != stripe.1 {
        return (ChoiceTag::SpectrumOfGray, CLEAR_MARGIN);
    }
    if background.0 != background.1 {
        let span = background.0.abs_diff(background.1);
        return (ChoiceTag::SpectrumOfGray, span * 1000 / 255);
    }
    (ChoiceTag::Solid, CLEAR_MARGIN)
}

/// Scintillation needs a dark background, mid-gray lines and bright disks
/// at least as wide as the lines.
pub fn grid_percept(bg: u32, line: u32, disk: u32, line_px: u32, disk_r: u32, black_disks: u32) -> (ChoiceTag, u32) {
    let scintillates = bg < line && line < disk && 2 * disk_r >= line_px;
    match (scintillates, black_disks) {
        (true, 0) => {
            let contrast = (line - bg).min(disk - line);
            (ChoiceTag::DotsFlicker, (contrast * 1000 / 128).min(CLEAR_MARGIN))
        }
        // A fixed black dot among flickering ones has no clear modal answer.
        (true, _) => (ChoiceTag::OneBlackDot, 0),
        (false, 0) => (ChoiceTag::NoBlackDots, CLEAR_MARGIN),
        (false, _) => (ChoiceTag::OneBlackDot, CLEAR_MARGIN),
    }
}

pub fn stereogram_percept(shape: HiddenShape, period: u32, amplitude: u32) -> (ChoiceTag, u32) {
    if shape == HiddenShape::None {
        return (ChoiceTag::JustNoise, CLEAR_MARGIN);
    }
    (ChoiceTag::for_shape(shape), (amplitude * 1000 / period.max(1)).min(CLEAR_MARGIN))
}

/// Applies the bias model to a spec. Fails with `AmbiguousInstance` when the
/// predicted margin falls below the configured minimum.
pub fn expected_percept(spec: &IllusionSpec, bias: &BiasModel) -> Result<PerceptExpectation, StimulusError> {
    let (modal, margin) = match &spec.params {
        IllusionParams::MullerLyer(p) => muller_lyer_percept(
            bias,
            (p.shaft_len_left, p.fin_dir_left),
            (p.shaft_len_right, p.fin_dir_right),
        ),
        IllusionParams::Ebbinghaus(p) => ebbinghaus_percept(
            bias,
            (p.center_r_left, p.inducer_r_left),
            (p.center_r_right, p.inducer_r_right),
        ),
        IllusionParams::CafeWall(p) => {
            cafe_wall_percept(p.row_offset_milli, p.mortar_px, p.mortar_gray, p.true_tilt_decideg)
        }
        IllusionParams::ContrastStripe(p) => contrast_stripe_percept(
            (p.stripe_gray_left, p.stripe_gray_right),
            (p.bg_gray_left, p.bg_gray_right),
        ),
        IllusionParams::ScintillatingGrid(p) => {
            grid_percept(p.bg_gray, p.line_gray, p.disk_gray, p.line_px, p.disk_r, p.true_black_disks)
        }
        IllusionParams::Autostereogram(p) => {
            stereogram_percept(p.hidden_shape, p.pattern_period, p.depth_amplitude)
        }
    };
    if margin < bias.min_percept_margin_milli {
        return Err(StimulusError::AmbiguousInstance { margin_milli: margin });
    }
    let veridical = ground_truth(spec).veridical_tag();
    Ok(PerceptExpectation {
        modal,
        margin_milli: margin,
        coincides_with_veridical: modal == veridical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ml(l: u32, dl: FinDirection, r: u32, dr: FinDirection) -> IllusionSpec {
        IllusionSpec::new(
            0,
            IllusionParams::MullerLyer(MullerLyerParams {
                shaft_len_left: l,
                shaft_len_right: r,
                fin_len: 30,
                fin_angle_decideg: 450,
                fin_dir_left: dl,
                fin_dir_right: dr,
                vertical_sep: 120,
            }),
        )
    }

    #[test]
    fn equal_shafts_outward_left_reads_left_longer_by_240() {
        // (1.12 - 0.88) * L / L = 0.24
        let e = expected_percept(&ml(200, FinDirection::Outward, 200, FinDirection::Inward), &BiasModel::default())
            .unwrap();
        assert_eq!(e.modal, ChoiceTag::LeftLonger);
        assert_eq!(e.margin_milli, 240);
        assert!(!e.coincides_with_veridical);
    }

    #[test]
    fn large_real_difference_beats_the_fins() {
        // 200 * 1.12 = 224 < 280 * 0.88 = 246.4; margin 22.4 / 280 = 0.08
        let e = expected_percept(&ml(200, FinDirection::Outward, 280, FinDirection::Inward), &BiasModel::default())
            .unwrap();
        assert_eq!(e.modal, ChoiceTag::RightLonger);
        assert_eq!(e.margin_milli, 80);
        assert!(e.coincides_with_veridical);
    }

    #[test]
    fn weak_percept_is_ambiguous() {
        // 200 * 1.12 = 224 vs 250 * 0.88 = 220: margin 4 / 250 = 16 milli
        let err = expected_percept(&ml(200, FinDirection::Outward, 250, FinDirection::Inward), &BiasModel::default())
            .unwrap_err();
        assert!(matches!(err, StimulusError::AmbiguousInstance { margin_milli: 16 }));
    }

    #[test]
    fn identical_figures_read_same_length() {
        let e = expected_percept(&ml(180, FinDirection::Inward, 180, FinDirection::Inward), &BiasModel::default())
            .unwrap();
        assert_eq!(e.modal, ChoiceTag::SameLength);
        assert!(e.coincides_with_veridical);
    }

    #[test]
    fn ebbinghaus_small_inducers_enlarge() {
        let (tag, m) = ebbinghaus_percept(&BiasModel::default(), (30, 10), (30, 40));
        assert_eq!(tag, ChoiceTag::LeftBigger);
        assert_eq!(m, 200);
        let (tag, _) = ebbinghaus_percept(&BiasModel::default(), (30, 40), (30, 10));
        assert_eq!(tag, ChoiceTag::RightBigger);
    }

    #[test]
    fn uniform_stripe_on_gradient_reads_spectrum() {
        assert_eq!(contrast_stripe_percept((128, 128), (0, 255)).0, ChoiceTag::SpectrumOfGray);
        assert_eq!(contrast_stripe_percept((128, 128), (60, 60)), (ChoiceTag::Solid, CLEAR_MARGIN));
    }

    #[test]
    fn cafe_wall_without_offset_reads_straight() {
        assert_eq!(cafe_wall_percept(0, 3, 128, 0), (ChoiceTag::Straight, CLEAR_MARGIN));
        assert_eq!(cafe_wall_percept(500, 3, 128, 0), (ChoiceTag::Crooked, 1000));
        assert_eq!(cafe_wall_percept(300, 3, 255, 0).0, ChoiceTag::Straight);
    }

    #[test]
    fn grid_percepts() {
        assert_eq!(grid_percept(10, 128, 250, 8, 6, 0).0, ChoiceTag::DotsFlicker);
        assert_eq!(grid_percept(10, 128, 128, 8, 6, 1), (ChoiceTag::OneBlackDot, CLEAR_MARGIN));
        assert_eq!(grid_percept(10, 128, 128, 8, 6, 0).0, ChoiceTag::NoBlackDots);
    }

    #[test]
    fn bias_bounds() {
        assert!(BiasModel::default().validate().is_ok());
        assert!(BiasModel { beta_ml_milli: 0, ..Default::default() }.validate().is_err());
        assert!(BiasModel { gamma_eb_milli: 500, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn tag_display_is_snake_case() {
        assert_eq!(ChoiceTag::SpectrumOfGray.to_string(), "spectrum_of_gray");
    }
}
