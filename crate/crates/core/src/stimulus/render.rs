use sha2::{Digest, Sha256};

use super::layout::*;
use super::raster::Raster;
use super::spec::*;
use super::stereo::render_stereogram;
use super::StimulusError;
use crate::rng::DetRng;

/// A rasterized stimulus. `pixels` is row-major, `channels` samples per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedStimulus {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub pixels: Vec<u8>,
    pub spec_hash: SpecHash,
}

impl RenderedStimulus {
    /// Single-channel sample at (x, y); for RGB the red channel.
    pub fn sample(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y as usize * self.width as usize + x as usize) * self.channels as usize]
    }

    pub fn rgb(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * self.channels as usize;
        if self.channels == 3 {
            [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
        } else {
            let v = self.pixels[i];
            [v, v, v]
        }
    }

    /// SHA-256 over dimensions, channel count and pixel buffer. This is the
    /// value pinned by the golden render corpus.
    pub fn pixel_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update([self.channels]);
        h.update(&self.pixels);
        hex::encode(h.finalize())
    }

    /// 8-bit, non-interlaced PNG.
    pub fn to_png(&self) -> Result<Vec<u8>, StimulusError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(if self.channels == 3 { png::ColorType::Rgb } else { png::ColorType::Grayscale });
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().map_err(|e| StimulusError::Png(e.to_string()))?;
            writer
                .write_image_data(&self.pixels)
                .map_err(|e| StimulusError::Png(e.to_string()))?;
        }
        Ok(out)
    }
}

/// Decoded PNG image: width, height, channels, row-major samples.
pub type DecodedImage = (u32, u32, u8, Vec<u8>);

pub fn decode_png(bytes: &[u8]) -> Result<DecodedImage, StimulusError> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| StimulusError::Png(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| StimulusError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| StimulusError::Png(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(StimulusError::Png("only 8-bit images are supported".into()));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(StimulusError::Png(format!("unsupported color type {other:?}"))),
    };
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, channels, buf))
}

/// Rasterizes a spec. Pure function of the spec: identical input gives a
/// bit-identical buffer.
pub fn render(spec: &IllusionSpec) -> Result<RenderedStimulus, StimulusError> {
    validate(spec)?;
    let (w, h) = (spec.canvas_w, spec.canvas_h);
    let (channels, pixels) = match &spec.params {
        IllusionParams::MullerLyer(p) => (1, render_muller_lyer(spec, p)),
        IllusionParams::Ebbinghaus(p) => (3, render_ebbinghaus(spec, p)),
        IllusionParams::CafeWall(p) => (1, render_cafe_wall(spec, p)),
        IllusionParams::ContrastStripe(p) => (1, render_contrast_stripe(spec, p)),
        IllusionParams::ScintillatingGrid(p) => (1, render_grid(spec, p)),
        IllusionParams::Autostereogram(p) => (1, render_stereogram(spec, p)),
    };
    Ok(RenderedStimulus {
        width: w,
        height: h,
        channels,
        pixels,
        spec_hash: spec.canonical_hash(),
    })
}

fn render_muller_lyer(spec: &IllusionSpec, p: &MullerLyerParams) -> Vec<u8> {
    let mut r = Raster::new(spec.canvas_w, spec.canvas_h, 1, &[PAPER]);
    for fig in muller_lyer_layout(spec, p) {
        for fin in &fig.fins {
            r.thick_line(fin.from, fin.to, STROKE_HALF, &[INK]);
        }
        let s = fig.shaft();
        r.fill_rect(s.x0, s.y0, s.x1, s.y1, &[INK]);
    }
    r.data
}

fn render_ebbinghaus(spec: &IllusionSpec, p: &EbbinghausParams) -> Vec<u8> {
    let mut r = Raster::new(spec.canvas_w, spec.canvas_h, 3, &WHITE);
    for g in ebbinghaus_layout(spec, p) {
        for d in &g.inducers {
            r.fill_disk(d.cx, d.cy, d.r, &INDUCER);
        }
        r.fill_disk(g.center.cx, g.center.cy, g.center.r, &ORANGE);
    }
    r.data
}

fn render_cafe_wall(spec: &IllusionSpec, p: &CafeWallParams) -> Vec<u8> {
    let mortar = p.mortar_gray as u8;
    let mut r = Raster::new(spec.canvas_w, spec.canvas_h, 1, &[mortar]);
    let l = cafe_wall_layout(spec, p);
    let tile_w = i64::from(p.tile_w);
    for row in 0..p.rows {
        let shift = l.row_shift[row as usize];
        for x in l.x_origin..l.x_origin + l.wall_w {
            let col = (x - l.x_origin - shift).div_euclid(tile_w);
            let color = if col.rem_euclid(2) == 0 { TILE_DARK } else { TILE_LIGHT };
            let top = l.row_top(p, row, x);
            for y in top..top + i64::from(p.tile_h) {
                r.put(x, y, &[color]);
            }
        }
    }
    r.data
}

fn render_contrast_stripe(spec: &IllusionSpec, p: &ContrastStripeParams) -> Vec<u8> {
    let w = i64::from(spec.canvas_w);
    let mut r = Raster::new(spec.canvas_w, spec.canvas_h, 1, &[0]);
    let (y0, y1) = stripe_rows(spec, p);
    for y in 0..r.h {
        let in_stripe = y >= y0 && y < y1;
        for x in 0..w {
            let v = if in_stripe {
                ramp(p.stripe_gray_left, p.stripe_gray_right, x, w)
            } else {
                ramp(p.bg_gray_left, p.bg_gray_right, x, w)
            };
            r.put(x, y, &[v]);
        }
    }
    r.data
}

/// Row-major indices of the intersections whose disk is physically black.
pub fn black_disk_indices(spec: &IllusionSpec, p: &ScintillatingGridParams) -> Vec<usize> {
    let n = (p.grid_n * p.grid_n) as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = DetRng::new("grid-black-disks", &[spec.seed]);
    rng.shuffle(&mut idx);
    idx.truncate(p.true_black_disks as usize);
    idx.sort_unstable();
    idx
}

fn render_grid(spec: &IllusionSpec, p: &ScintillatingGridParams) -> Vec<u8> {
    let mut r = Raster::new(spec.canvas_w, spec.canvas_h, 1, &[p.bg_gray as u8]);
    let g = grid_layout(spec, p);
    let line = [p.line_gray as u8];
    for &x in &g.xs {
        let (a, b) = line_span(x, p.line_px);
        r.fill_rect(a, 0, b - 1, r.h - 1, &line);
    }
    for &y in &g.ys {
        let (a, b) = line_span(y, p.line_px);
        r.fill_rect(0, a, r.w - 1, b - 1, &line);
    }
    let black = black_disk_indices(spec, p);
    let n = p.grid_n as usize;
    for (j, &y) in g.ys.iter().enumerate() {
        for (i, &x) in g.xs.iter().enumerate() {
            let color = if black.contains(&(j * n + i)) { BLACK_DISK_GRAY } else { p.disk_gray as u8 };
            r.fill_disk(x, y, i64::from(p.disk_r), &[color]);
        }
    }
    r.data
}
