use serde::{Deserialize, Serialize};

use super::layout::{muller_lyer_fin_offsets, validate, STROKE_HALF};
use super::percept::{expected_percept, BiasModel};
use super::spec::*;
use super::StimulusError;
use crate::rng::DetRng;

/// Upper bound on parameter re-draws before sampling gives up.
pub const MAX_REDRAWS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    #[default]
    Standard,
    /// Weaker illusions, and for the size illusions a small real difference
    /// that opposes the illusory one.
    Subtle,
}

impl std::str::FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Difficulty::Standard),
            "subtle" => Ok(Difficulty::Subtle),
            _ => Err(format!("unknown difficulty {s:?}")),
        }
    }
}

fn u(rng: &mut DetRng, lo: u32, hi: u32) -> u32 {
    rng.range(i64::from(lo), i64::from(hi)) as u32
}

fn fin_sep(rng: &mut DetRng, p: &MullerLyerParams) -> u32 {
    let (_, dy) = muller_lyer_fin_offsets(p);
    (2 * (dy + 3 * STROKE_HALF + 2)) as u32 + u(rng, 10, 60)
}

fn draw_muller_lyer(rng: &mut DetRng, d: Difficulty) -> IllusionParams {
    let len = u(rng, 160, 240);
    let outward_left = rng.coin();
    let extra = match d {
        Difficulty::Standard => 0,
        Difficulty::Subtle => u(rng, len / 50, len / 8),
    };
    let (left, right) = if outward_left { (len, len + extra) } else { (len + extra, len) };
    let (dl, dr) = if outward_left {
        (FinDirection::Outward, FinDirection::Inward)
    } else {
        (FinDirection::Inward, FinDirection::Outward)
    };
    let mut p = MullerLyerParams {
        shaft_len_left: left,
        shaft_len_right: right,
        fin_len: u(rng, 25, 50),
        fin_angle_decideg: u(rng, 200, 600),
        fin_dir_left: dl,
        fin_dir_right: dr,
        vertical_sep: 0,
    };
    p.vertical_sep = fin_sep(rng, &p);
    IllusionParams::MullerLyer(p)
}

fn draw_ebbinghaus(rng: &mut DetRng, d: Difficulty) -> IllusionParams {
    let r = u(rng, 20, 28);
    let small = u(rng, r * 3 / 10, r / 2);
    let large = u(rng, r * 6 / 5, r * 7 / 5);
    let grow = match d {
        Difficulty::Standard => 0,
        Difficulty::Subtle => u(rng, 1, (r / 8).max(1)),
    };
    let small_left = rng.coin();
    // The small-inducer side looks bigger; a subtle instance makes the other
    // side physically bigger.
    let (rl, rr, il, ir) = if small_left {
        (r, r + grow, small, large)
    } else {
        (r + grow, r, large, small)
    };
    IllusionParams::Ebbinghaus(EbbinghausParams {
        center_r_left: rl,
        center_r_right: rr,
        inducer_r_left: il,
        inducer_r_right: ir,
        inducer_count: u(rng, 4, 6),
        ring_gap: u(rng, (r / 5).max(2), r / 2),
    })
}

fn draw_cafe_wall(rng: &mut DetRng, offset: u32) -> IllusionParams {
    let tile_w = u(rng, 40, 64);
    let tile_h = u(rng, 24, 40);
    let mortar_px = u(rng, 2, 4);
    let max_rows = ((DEFAULT_CANVAS - 40) / (tile_h + mortar_px)).min(10);
    IllusionParams::CafeWall(CafeWallParams {
        tile_w,
        tile_h,
        row_offset_milli: offset,
        mortar_px,
        mortar_gray: u(rng, 100, 160),
        rows: u(rng, 6, max_rows.max(6)),
        cols: u(rng, 6, (DEFAULT_CANVAS - 16) / tile_w),
        true_tilt_decideg: 0,
    })
}

fn draw_contrast_stripe(rng: &mut DetRng, d: Difficulty) -> IllusionParams {
    let (lo, hi) = match d {
        Difficulty::Standard => (u(rng, 0, 60), u(rng, 195, 255)),
        Difficulty::Subtle => {
            let mid = u(rng, 90, 165);
            let half = u(rng, 5, 40);
            (mid - half, mid + half)
        }
    };
    let (l, r) = if rng.coin() { (lo, hi) } else { (hi, lo) };
    let stripe = u(rng, 100, 155);
    IllusionParams::ContrastStripe(ContrastStripeParams {
        bg_gray_left: l,
        bg_gray_right: r,
        stripe_gray_left: stripe,
        stripe_gray_right: stripe,
        stripe_height_milli: u(rng, 80, 200),
    })
}

fn draw_grid(rng: &mut DetRng, d: Difficulty, catch: bool) -> IllusionParams {
    let n = u(rng, 5, 9);
    let spacing = DEFAULT_CANVAS / (n + 1);
    let line_px = u(rng, (spacing / 8).max(2), spacing / 5);
    let disk_r = u(rng, line_px.div_ceil(2) + 1, line_px.max(line_px.div_ceil(2) + 1));
    let bg = u(rng, 0, 40);
    let (line, disk) = match (catch, d) {
        (true, _) => {
            let line = u(rng, 100, 150);
            (line, line)
        }
        (false, Difficulty::Standard) => (u(rng, 100, 150), u(rng, 215, 255)),
        (false, Difficulty::Subtle) => {
            let line = u(rng, 150, 200);
            (line, u(rng, line + 1, 255))
        }
    };
    IllusionParams::ScintillatingGrid(ScintillatingGridParams {
        bg_gray: bg,
        line_gray: line,
        disk_gray: disk,
        grid_n: n,
        line_px,
        disk_r,
        true_black_disks: u32::from(catch),
    })
}

fn draw_stereogram(rng: &mut DetRng, d: Difficulty, shape: Option<HiddenShape>) -> IllusionParams {
    let period = u(rng, 60, 100);
    let amplitude = match d {
        Difficulty::Standard => u(rng, 8, 20),
        Difficulty::Subtle => u(rng, 2, 7),
    };
    let shape = shape.unwrap_or_else(|| HiddenShape::VISIBLE[rng.below(5) as usize]);
    IllusionParams::Autostereogram(AutostereogramParams {
        pattern_period: period,
        depth_amplitude: amplitude,
        hidden_shape: shape,
    })
}

fn draw_catch(rng: &mut DetRng, kind: IllusionKind) -> IllusionParams {
    match kind {
        IllusionKind::MullerLyer => {
            // Outward fins on the physically shorter shaft: a percept that
            // followed the fins alone would pick the wrong side.
            let long_left = rng.coin();
            let (left, right, dl, dr) = if long_left {
                (280, 200, FinDirection::Inward, FinDirection::Outward)
            } else {
                (200, 280, FinDirection::Outward, FinDirection::Inward)
            };
            let mut p = MullerLyerParams {
                shaft_len_left: left,
                shaft_len_right: right,
                fin_len: u(rng, 25, 40),
                fin_angle_decideg: u(rng, 200, 500),
                fin_dir_left: dl,
                fin_dir_right: dr,
                vertical_sep: 0,
            };
            p.vertical_sep = fin_sep(rng, &p);
            IllusionParams::MullerLyer(p)
        }
        IllusionKind::Ebbinghaus => {
            let r = u(rng, 18, 22);
            let big = r * 14 / 10;
            let small_inducer = u(rng, r * 3 / 10, r / 2);
            let large_inducer = u(rng, big * 11 / 10, big * 5 / 4);
            let (rl, rr, il, ir) = if rng.coin() {
                (r, big, small_inducer, large_inducer)
            } else {
                (big, r, large_inducer, small_inducer)
            };
            IllusionParams::Ebbinghaus(EbbinghausParams {
                center_r_left: rl,
                center_r_right: rr,
                inducer_r_left: il,
                inducer_r_right: ir,
                inducer_count: u(rng, 4, 6),
                ring_gap: u(rng, 3, 8),
            })
        }
        IllusionKind::CafeWall => draw_cafe_wall(rng, 0),
        IllusionKind::ContrastStripe => {
            let bg = u(rng, 40, 215);
            let delta = u(rng, 40, 80);
            let stripe = if bg + delta <= 255 && (bg < delta || rng.coin()) { bg + delta } else { bg - delta };
            IllusionParams::ContrastStripe(ContrastStripeParams {
                bg_gray_left: bg,
                bg_gray_right: bg,
                stripe_gray_left: stripe,
                stripe_gray_right: stripe,
                stripe_height_milli: u(rng, 80, 200),
            })
        }
        IllusionKind::ScintillatingGrid => draw_grid(rng, Difficulty::Standard, true),
        IllusionKind::Autostereogram => draw_stereogram(rng, Difficulty::Standard, Some(HiddenShape::None)),
    }
}

fn redraw_until(
    kind: IllusionKind,
    seed: u64,
    rng: &mut DetRng,
    bias: &BiasModel,
    mut draw: impl FnMut(&mut DetRng) -> IllusionParams,
    accept: impl Fn(bool) -> bool,
) -> Result<IllusionSpec, StimulusError> {
    bias.validate()?;
    for _ in 0..MAX_REDRAWS {
        let spec = IllusionSpec::new(seed, draw(rng));
        if validate(&spec).is_err() {
            continue;
        }
        match expected_percept(&spec, bias) {
            Ok(e) if accept(e.coincides_with_veridical) => return Ok(spec),
            _ => continue,
        }
    }
    Err(StimulusError::InternalExhaustion { kind, attempts: MAX_REDRAWS })
}

/// Draws an illusion instance deterministically from `(kind, seed,
/// difficulty)`. The returned spec is valid, its predicted percept clears the
/// bias model's margin, and (except for stereograms, whose percept is the
/// encoded shape) the percept differs from the physical answer.
pub fn sample_spec(
    kind: IllusionKind,
    seed: u64,
    difficulty: Difficulty,
    bias: &BiasModel,
) -> Result<IllusionSpec, StimulusError> {
    let level = match difficulty {
        Difficulty::Standard => 0,
        Difficulty::Subtle => 1,
    };
    let mut rng = DetRng::new("sample-spec", &[kind.seed_part(), seed, level]);
    let draw = |rng: &mut DetRng| match kind {
        IllusionKind::MullerLyer => draw_muller_lyer(rng, difficulty),
        IllusionKind::Ebbinghaus => draw_ebbinghaus(rng, difficulty),
        IllusionKind::CafeWall => {
            let offset = match difficulty {
                Difficulty::Standard => u(rng, 200, 500),
                Difficulty::Subtle => u(rng, 60, 199),
            };
            draw_cafe_wall(rng, offset)
        }
        IllusionKind::ContrastStripe => draw_contrast_stripe(rng, difficulty),
        IllusionKind::ScintillatingGrid => draw_grid(rng, difficulty, false),
        IllusionKind::Autostereogram => draw_stereogram(rng, difficulty, None),
    };
    let stereo = kind == IllusionKind::Autostereogram;
    redraw_until(kind, seed, &mut rng, bias, draw, |coincides| stereo || !coincides)
}

/// Draws a control instance whose percept agrees with physical reality.
pub fn sample_catch_spec(kind: IllusionKind, seed: u64, bias: &BiasModel) -> Result<IllusionSpec, StimulusError> {
    let mut rng = DetRng::new("catch-spec", &[kind.seed_part(), seed]);
    redraw_until(kind, seed, &mut rng, bias, |rng| draw_catch(rng, kind), |coincides| coincides)
}
