//! A perceiver that answers from the image alone.
//!
//! It measures the figure in the pixels (shaft lengths, fin directions,
//! disk sizes, tile phases, grays, the stereogram depth map) and feeds the
//! measurements through the same percept rules the item generator uses to
//! predict the illusory answer. It never sees an answer key, which makes it
//! a fair stand-in for an external agent that experiences the illusions.

use super::AgentError;
use crate::items::QuestionTemplates;
use crate::stimulus::{
    cafe_wall_percept, contrast_stripe_percept, decode_png, decode_stereogram, ebbinghaus_percept, grid_percept,
    muller_lyer_percept, BiasModel, ChoiceTag, FinDirection, HiddenShape, IllusionKind, RenderedStimulus,
    ShapeGeometry, SpecHash, DARK_THRESHOLD, INDUCER, ORANGE,
};

/// Decoded image with row-major access.
pub struct Image {
    pub w: usize,
    pub h: usize,
    pub channels: usize,
    pub px: Vec<u8>,
}

impl Image {
    pub fn from_png(bytes: &[u8]) -> Result<Image, AgentError> {
        let (w, h, ch, px) = decode_png(bytes).map_err(|e| AgentError::Perception(e.to_string()))?;
        Ok(Image { w: w as usize, h: h as usize, channels: ch as usize, px })
    }

    fn gray(&self, x: usize, y: usize) -> u8 {
        self.px[(y * self.w + x) * self.channels]
    }

    fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.w + x) * self.channels;
        if self.channels == 3 {
            [self.px[i], self.px[i + 1], self.px[i + 2]]
        } else {
            [self.px[i]; 3]
        }
    }
}

/// Longest run of pixels satisfying `pred` in `row`, as (start, len).
fn longest_run(len: usize, pred: impl Fn(usize) -> bool) -> (usize, usize) {
    let (mut best, mut start, mut run) = ((0, 0), 0, 0);
    for i in 0..len {
        if pred(i) {
            if run == 0 {
                start = i;
            }
            run += 1;
            if run > best.1 {
                best = (start, run);
            }
        } else {
            run = 0;
        }
    }
    best
}

/// Perceived answer to `prompt` for the given image, as a choice index.
pub fn perceive(prompt: &str, choices: &[String], png: &[u8], bias: &BiasModel) -> Result<usize, AgentError> {
    let templates = QuestionTemplates::builtin();
    let kind = templates
        .kind_for_prompt(prompt)
        .ok_or_else(|| AgentError::Perception(format!("unrecognized prompt {prompt:?}")))?;
    let img = Image::from_png(png)?;
    let tag = perceive_tag(kind, &img, bias)?;
    let text = templates.get(kind)?.text_for(tag).unwrap_or_default();
    choices
        .iter()
        .position(|c| c == text)
        .ok_or_else(|| AgentError::Perception(format!("perceived {tag} but no matching choice")))
}

pub fn perceive_tag(kind: IllusionKind, img: &Image, bias: &BiasModel) -> Result<ChoiceTag, AgentError> {
    let (tag, _) = match kind {
        IllusionKind::MullerLyer => {
            let [l, r] = muller_lyer_features(img)?;
            muller_lyer_percept(bias, l, r)
        }
        IllusionKind::Ebbinghaus => {
            let [l, r] = ebbinghaus_features(img)?;
            ebbinghaus_percept(bias, l, r)
        }
        IllusionKind::CafeWall => {
            let f = cafe_wall_features(img)?;
            cafe_wall_percept(f.offset_milli, f.mortar_px, f.mortar_gray, i32::from(f.tilted))
        }
        IllusionKind::ContrastStripe => {
            let (stripe, bg) = stripe_features(img);
            contrast_stripe_percept(stripe, bg)
        }
        IllusionKind::ScintillatingGrid => {
            let g = grid_features(img)?;
            grid_percept(g.bg, g.line, g.disk, g.line_px, g.disk_r, g.black)
        }
        IllusionKind::Autostereogram => (ChoiceTag::for_shape(stereogram_shape(img)?), 0),
    };
    Ok(tag)
}

/// (shaft length, fin direction) of the left and right figures.
pub fn muller_lyer_features(img: &Image) -> Result<[(u32, FinDirection); 2], AgentError> {
    let ink = |x: usize, y: usize| img.gray(x, y) < 128;
    // Rows whose longest ink run is shaft-like; a shaft is three such rows.
    let mut shafts: Vec<(usize, usize, usize)> = Vec::new();
    for y in 0..img.h {
        let (x0, len) = longest_run(img.w, |x| ink(x, y));
        if len >= 80 {
            match shafts.last_mut() {
                Some(s) if y <= s.0 + 2 => {}
                _ => shafts.push((y + 1, x0, len)),
            }
        }
    }
    if shafts.len() != 2 {
        return Err(AgentError::Perception(format!("found {} shafts", shafts.len())));
    }
    let (cy_a, cy_b) = (shafts[0].0, shafts[1].0);
    let half_gap = (cy_b - cy_a) / 2;
    let mut out = [(0u32, FinDirection::Outward); 2];
    for (i, &(cy, x0, len)) in shafts.iter().enumerate() {
        // Ink in the band above the shaft near its left end; outward fins
        // lean away from the shaft.
        let mut lean = 0i64;
        for y in cy.saturating_sub(half_gap)..cy - 1 {
            for x in x0.saturating_sub(len / 2)..x0 + len / 2 {
                if ink(x, y) {
                    lean += x as i64 - x0 as i64;
                }
            }
        }
        let dir = if lean < 0 { FinDirection::Outward } else { FinDirection::Inward };
        out[i] = (len as u32, dir);
    }
    // The left figure is the one centered further left.
    if shafts[0].1 + shafts[0].2 / 2 > shafts[1].1 + shafts[1].2 / 2 {
        out.swap(0, 1);
    }
    Ok(out)
}

/// (center radius, inducer radius) of the left and right groups.
pub fn ebbinghaus_features(img: &Image) -> Result<[(u32, u32); 2], AgentError> {
    let mut out = [(0, 0); 2];
    for (side, range) in [(0, 0..img.w / 2), (1, img.w / 2..img.w)].into_iter() {
        let (mut best, mut cx, mut cy) = (0, 0, 0);
        for y in 0..img.h {
            let (x0, len) = longest_run(range.len(), |i| img.rgb(range.start + i, y) == ORANGE);
            if len > best {
                (best, cx, cy) = (len, range.start + x0 + len / 2, y);
            }
        }
        if best == 0 {
            return Err(AgentError::Perception("no orange disk".into()));
        }
        let r = (best - 1) / 2;
        // The first inducer sits straight above the center disk.
        let mut y = cy - r;
        while y > 0 && img.rgb(cx, y - 1) != INDUCER {
            y -= 1;
        }
        let (_, run) = longest_run(y, |i| img.rgb(cx, y - 1 - i) == INDUCER);
        let ri = run.saturating_sub(1) / 2;
        out[side] = (r as u32, ri as u32);
    }
    Ok(out)
}

pub struct CafeWallFeatures {
    pub offset_milli: u32,
    pub mortar_px: u32,
    pub mortar_gray: u32,
    pub tilted: bool,
}

pub fn cafe_wall_features(img: &Image) -> Result<CafeWallFeatures, AgentError> {
    let mortar = img.gray(0, 0);
    let tile = |x: usize, y: usize| img.gray(x, y) != mortar;
    let cols: Vec<usize> = (0..img.w).filter(|&x| (0..img.h).any(|y| tile(x, y))).collect();
    let (Some(&xa), Some(&xb)) = (cols.first(), cols.last()) else {
        return Err(AgentError::Perception("no tiles".into()));
    };
    let runs = |x: usize| {
        let mut v = Vec::new();
        let mut y = 0;
        while y < img.h {
            if tile(x, y) {
                let s = y;
                while y < img.h && tile(x, y) {
                    y += 1;
                }
                v.push((s, y));
            }
            y += 1;
        }
        v
    };
    let (left, right) = (runs(xa + 1), runs(xb - 1));
    if left.len() < 2 {
        return Err(AgentError::Perception("fewer than two tile rows".into()));
    }
    let tilted = left.len() != right.len() || left.iter().zip(&right).any(|(a, b)| a.0 != b.0);
    let mortar_px = (left[1].0 - left[0].1) as u32;
    let first_edge = |y: usize| {
        let c = img.gray(xa, y);
        (xa..=xb).find(|&x| img.gray(x, y) != c).unwrap_or(xb + 1) - xa
    };
    let y0 = (left[0].0 + left[0].1) / 2;
    let y1 = (left[1].0 + left[1].1) / 2;
    let tile_w = first_edge(y0).max(1);
    let shift = first_edge(y1) % tile_w;
    Ok(CafeWallFeatures {
        offset_milli: (shift * 1000 / tile_w) as u32,
        mortar_px,
        mortar_gray: u32::from(mortar),
        tilted,
    })
}

/// ((stripe left, stripe right), (background left, background right)).
pub fn stripe_features(img: &Image) -> ((u32, u32), (u32, u32)) {
    let g = |x: usize, y: usize| u32::from(img.gray(x, y));
    let (mid, last) = (img.h / 2, img.w - 1);
    ((g(0, mid), g(last, mid)), (g(0, 0), g(last, 0)))
}

pub struct GridFeatures {
    pub bg: u32,
    pub line: u32,
    pub disk: u32,
    pub line_px: u32,
    pub disk_r: u32,
    pub black: u32,
}

pub fn grid_features(img: &Image) -> Result<GridFeatures, AgentError> {
    let bg = img.gray(0, 0);
    // Line bands crossing the top row and the left column.
    let bands = |n: usize, at: &dyn Fn(usize) -> u8| {
        let mut v = Vec::new();
        let mut i = 0;
        while i < n {
            if at(i) != bg {
                let s = i;
                while i < n && at(i) != bg {
                    i += 1;
                }
                v.push((s, i));
            }
            i += 1;
        }
        v
    };
    let xs = bands(img.w, &|x| img.gray(x, 0));
    let ys = bands(img.h, &|y| img.gray(0, y));
    if xs.is_empty() || ys.is_empty() {
        return Err(AgentError::Perception("no grid lines".into()));
    }
    let line = img.gray(xs[0].0, 0);
    let line_px = (xs[0].1 - xs[0].0) as u32;
    let centers = |b: &[(usize, usize)]| b.iter().map(|(s, e)| (s + e - 1) / 2).collect::<Vec<_>>();
    let (cx, cy) = (centers(&xs), centers(&ys));
    let mut black = 0;
    let mut disk = line;
    let mut disk_r = 0;
    for &y in &cy {
        for &x in &cx {
            let v = img.gray(x, y);
            if v < DARK_THRESHOLD {
                black += 1;
            } else if disk_r == 0 {
                disk = v;
                let (_, run) = longest_run(img.w, |i| img.gray(i, y) == v && i.abs_diff(x) < 64);
                disk_r = run.saturating_sub(1) as u32 / 2;
            }
        }
    }
    Ok(GridFeatures { bg: u32::from(bg), line: u32::from(line), disk: u32::from(disk), line_px, disk_r, black })
}

/// Finds the repeat period, decodes the depth map and names the shape it
/// resembles most.
pub fn stereogram_shape(img: &Image) -> Result<HiddenShape, AgentError> {
    if img.channels != 1 {
        return Err(AgentError::Perception("stereogram must be grayscale".into()));
    }
    let (w, h) = (img.w, img.h);
    let rate = |lag: usize| {
        let mut hits = 0usize;
        for y in 0..h {
            let row = &img.px[y * w..(y + 1) * w];
            hits += (lag..w).filter(|&x| row[x] == row[x - lag]).count();
        }
        hits as f64 / (h * (w - lag)).max(1) as f64
    };
    let rates: Vec<(usize, f64)> = (8..=w / 4).map(|p| (p, rate(p))).collect();
    let max = rates.iter().map(|r| r.1).fold(0.0, f64::max);
    let period = rates.iter().find(|r| r.1 >= 0.95 * max).map(|r| r.0).unwrap_or(8);
    let stim = RenderedStimulus {
        width: w as u32,
        height: h as u32,
        channels: 1,
        pixels: img.px.clone(),
        spec_hash: SpecHash([0; 32]),
    };
    let mask = decode_stereogram(&stim, period as u32).map_err(|e| AgentError::Perception(e.to_string()))?;
    if mask.count() < w * h / 100 {
        return Ok(HiddenShape::None);
    }
    let mut best = (HiddenShape::None, 0.0);
    for shape in HiddenShape::VISIBLE {
        let iou = ShapeGeometry::new(shape, w as u32, h as u32).mask(w as u32, h as u32).iou(&mask);
        if iou > best.1 {
            best = (shape, iou);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::items::build_item;
    use crate::stimulus::{render, sample_catch_spec, sample_spec, Difficulty};

    fn answer_for(spec: &crate::stimulus::IllusionSpec, seed: u64) -> (usize, crate::items::QuestionItem) {
        let bias = BiasModel::default();
        let item = build_item(spec, &bias, seed).unwrap();
        let png = render(spec).unwrap().to_png().unwrap();
        (perceive(&item.prompt, &item.choice_texts(), &png, &bias).unwrap(), item)
    }

    #[test]
    fn sees_the_illusion_on_every_kind() {
        for kind in IllusionKind::ALL {
            for seed in 0..6 {
                for d in [Difficulty::Standard, Difficulty::Subtle] {
                    let spec = sample_spec(kind, seed, d, &BiasModel::default()).unwrap();
                    let (ans, item) = answer_for(&spec, seed);
                    assert_eq!(ans, item.illusion_idx, "{kind} seed {seed} {d:?}");
                }
            }
        }
    }

    #[test]
    fn answers_catch_items_correctly() {
        for kind in IllusionKind::ALL {
            for seed in 0..6 {
                let spec = sample_catch_spec(kind, seed, &BiasModel::default()).unwrap();
                let (ans, item) = answer_for(&spec, seed);
                assert_eq!(ans, item.veridical_idx, "{kind} seed {seed}");
            }
        }
    }
}
