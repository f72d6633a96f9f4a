use serde::{Deserialize, Serialize};

use super::percept::ChoiceTag;
use super::spec::*;

/// Physical facts of an instance, read from its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    MullerLyer { length_delta_px: i64 },
    Ebbinghaus { radius_delta_px: i64 },
    CafeWall { rows_parallel: bool, tilt_decideg: i32 },
    ContrastStripe { stripe_uniform: bool },
    ScintillatingGrid { black_disk_count: u32 },
    Autostereogram { hidden_shape: HiddenShape },
}

impl GroundTruth {
    /// The answer an agent reporting physical facts would give.
    pub fn veridical_tag(&self) -> ChoiceTag {
        use std::cmp::Ordering::*;
        match *self {
            GroundTruth::MullerLyer { length_delta_px } => match length_delta_px.cmp(&0) {
                Less => ChoiceTag::LeftLonger,
                Greater => ChoiceTag::RightLonger,
                Equal => ChoiceTag::SameLength,
            },
            GroundTruth::Ebbinghaus { radius_delta_px } => match radius_delta_px.cmp(&0) {
                Less => ChoiceTag::LeftBigger,
                Greater => ChoiceTag::RightBigger,
                Equal => ChoiceTag::SameSize,
            },
            GroundTruth::CafeWall { rows_parallel, .. } => {
                if rows_parallel {
                    ChoiceTag::Straight
                } else {
                    ChoiceTag::Crooked
                }
            }
            GroundTruth::ContrastStripe { stripe_uniform } => {
                if stripe_uniform {
                    ChoiceTag::Solid
                } else {
                    ChoiceTag::SpectrumOfGray
                }
            }
            GroundTruth::ScintillatingGrid { black_disk_count } => {
                if black_disk_count == 0 {
                    ChoiceTag::NoBlackDots
                } else {
                    ChoiceTag::OneBlackDot
                }
            }
            GroundTruth::Autostereogram { hidden_shape } => ChoiceTag::for_shape(hidden_shape),
        }
    }
}

pub fn ground_truth(spec: &IllusionSpec) -> GroundTruth {
    match &spec.params {
        IllusionParams::MullerLyer(p) => GroundTruth::MullerLyer {
            length_delta_px: i64::from(p.shaft_len_right) - i64::from(p.shaft_len_left),
        },
        IllusionParams::Ebbinghaus(p) => GroundTruth::Ebbinghaus {
            radius_delta_px: i64::from(p.center_r_right) - i64::from(p.center_r_left),
        },
        IllusionParams::CafeWall(p) => GroundTruth::CafeWall {
            rows_parallel: p.true_tilt_decideg == 0,
            tilt_decideg: p.true_tilt_decideg,
        },
        IllusionParams::ContrastStripe(p) => GroundTruth::ContrastStripe {
            stripe_uniform: p.stripe_gray_left == p.stripe_gray_right,
        },
        IllusionParams::ScintillatingGrid(p) => GroundTruth::ScintillatingGrid {
            black_disk_count: p.true_black_disks,
        },
        IllusionParams::Autostereogram(p) => GroundTruth::Autostereogram { hidden_shape: p.hidden_shape },
    }
}
