//! Random-dot autostereograms: hidden shape masks, synthesis and a
//! self-correlation decoder used to check that a shape is really encoded.

use super::layout::{polar, shape_half_size};
use super::spec::{AutostereogramParams, HiddenShape, IllusionSpec};
use super::{RenderedStimulus, StimulusError};
use crate::rng::DetRng;

/// Minimum excess of the match rate at lag `period` over the rate at lag
/// `period / 2` for an image to count as a stereogram.
pub const CORRELATION_FLOOR: f64 = 0.25;

/// Below this fraction of near-lag matches the decoded mask is empty.
const NEAR_FLOOR: f64 = 0.01;

/// Binary raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl DepthMask {
    pub fn empty(width: u32, height: u32) -> Self {
        DepthMask { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Intersection over union. Two empty masks have IoU 0.
    pub fn iou(&self, other: &DepthMask) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += usize::from(*a && *b);
            union += usize::from(*a || *b);
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Membership test for a hidden shape centered on the canvas.
pub struct ShapeGeometry {
    shape: HiddenShape,
    cx: i64,
    cy: i64,
    s: i64,
    star: Vec<(i64, i64)>,
}

impl ShapeGeometry {
    pub fn new(shape: HiddenShape, width: u32, height: u32) -> Self {
        let s = i64::from(width.min(height)) * 3 / 10;
        let star = if shape == HiddenShape::Star {
            (0..10)
                .map(|i| {
                    let radius = if i % 2 == 0 { s } else { s * 2 / 5 };
                    polar(radius as f64, f64::from(i) * 360.0 - 900.0)
                })
                .collect()
        } else {
            Vec::new()
        };
        ShapeGeometry {
            shape,
            cx: i64::from(width) / 2,
            cy: i64::from(height) / 2,
            s,
            star,
        }
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        let (dx, dy, s) = (x - self.cx, y - self.cy, self.s);
        match self.shape {
            HiddenShape::None => false,
            HiddenShape::Circle => dx * dx + dy * dy <= s * s,
            HiddenShape::Square => dx.abs() <= s * 4 / 5 && dy.abs() <= s * 4 / 5,
            HiddenShape::Triangle => dy.abs() <= s && 2 * dx.abs() <= dy + s,
            HiddenShape::Cross => {
                (dx.abs() <= s / 3 && dy.abs() <= s) || (dy.abs() <= s / 3 && dx.abs() <= s)
            }
            HiddenShape::Star => point_in_polygon(&self.star, dx, dy),
        }
    }

    pub fn mask(&self, width: u32, height: u32) -> DepthMask {
        let mut m = DepthMask::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[(y * width + x) as usize] = self.contains(i64::from(x), i64::from(y));
            }
        }
        m
    }
}

/// Even-odd rule with exact integer arithmetic.
fn point_in_polygon(poly: &[(i64, i64)], x: i64, y: i64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[(i + n - 1) % n];
        if (yi > y) != (yj > y) {
            // x < xi + (y - yi) * (xj - xi) / (yj - yi), sign-corrected.
            let lhs = (x - xi) * (yj - yi);
            let rhs = (y - yi) * (xj - xi);
            if (yj - yi > 0 && lhs < rhs) || (yj - yi < 0 && lhs > rhs) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Ground-truth near-surface mask for a stereogram spec.
pub fn hidden_mask(spec: &IllusionSpec, p: &AutostereogramParams) -> DepthMask {
    ShapeGeometry::new(p.hidden_shape, spec.canvas_w, spec.canvas_h).mask(spec.canvas_w, spec.canvas_h)
}

pub(crate) fn render_stereogram(spec: &IllusionSpec, p: &AutostereogramParams) -> Vec<u8> {
    debug_assert!(shape_half_size(spec) > 0);
    let (w, h) = (spec.canvas_w as usize, spec.canvas_h as usize);
    let period = p.pattern_period as usize;
    let near = (p.pattern_period - p.depth_amplitude) as usize;
    let geom = ShapeGeometry::new(p.hidden_shape, spec.canvas_w, spec.canvas_h);
    let mut rng = DetRng::new("autostereogram-dots", &[spec.seed]);
    let mut noise = vec![0u8; period];
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        rng.fill(&mut noise);
        let row = &mut out[y * w..(y + 1) * w];
        for x in 0..w {
            let sep = if geom.contains(x as i64, y as i64) { near } else { period };
            row[x] = if x < sep { noise[x] } else { row[x - sep] };
        }
    }
    out
}

fn match_rate(px: &[u8], w: usize, h: usize, lag: usize, start: usize) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for y in 0..h {
        let row = &px[y * w..(y + 1) * w];
        for x in start.max(lag)..w {
            hits += usize::from(row[x] == row[x - lag]);
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Recovers the near-surface mask of a single-channel stereogram with the
/// given pattern period.
pub fn decode_stereogram(stimulus: &RenderedStimulus, period: u32) -> Result<DepthMask, StimulusError> {
    let (w, h) = (stimulus.width as usize, stimulus.height as usize);
    let period = period as usize;
    if stimulus.channels != 1 || period < 4 || period * 2 > w {
        return Err(StimulusError::NotAStereogram);
    }
    let px = &stimulus.pixels;
    let excess = match_rate(px, w, h, period, period) - match_rate(px, w, h, period / 2, period);
    if excess < CORRELATION_FLOOR {
        return Err(StimulusError::NotAStereogram);
    }

    // Pick the near lag as the one explaining the most pixels that do not
    // repeat at the background period.
    let mut best = (0usize, 0.0f64);
    for lag in period / 2 + 1..period {
        let mut hits = 0usize;
        let mut total = 0usize;
        for y in 0..h {
            let row = &px[y * w..(y + 1) * w];
            for x in period..w {
                total += 1;
                hits += usize::from(row[x] == row[x - lag] && row[x] != row[x - period]);
            }
        }
        let rate = hits as f64 / total.max(1) as f64;
        if rate > best.1 {
            best = (lag, rate);
        }
    }

    let mut mask = DepthMask::empty(stimulus.width, stimulus.height);
    if best.1 < NEAR_FLOOR {
        return Ok(mask);
    }
    let lag = best.0;
    for y in 0..h {
        let row = &px[y * w..(y + 1) * w];
        for x in period..w {
            mask.bits[y * w + x] = row[x] == row[x - lag] && row[x] != row[x - period];
        }
    }
    Ok(mask)
}
