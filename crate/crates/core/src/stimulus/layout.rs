//! Integer geometry shared by validation, rendering and measurement.

use super::spec::*;
use super::StimulusError;

/// Half-width of every Müller-Lyer stroke; strokes are `2 * STROKE_HALF + 1` px.
pub const STROKE_HALF: i64 = 1;
pub const INK: u8 = 0;
pub const PAPER: u8 = 255;

pub const TILE_DARK: u8 = 0;
pub const TILE_LIGHT: u8 = 255;

pub const ORANGE: [u8; 3] = [255, 140, 0];
pub const INDUCER: [u8; 3] = [150, 150, 160];
pub const WHITE: [u8; 3] = [255, 255, 255];

pub const BLACK_DISK_GRAY: u8 = 0;
/// Intersection centers darker than this count as physically black.
pub const DARK_THRESHOLD: u8 = 64;

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    fn union(self, o: Rect) -> Rect {
        Rect {
            x0: self.x0.min(o.x0),
            y0: self.y0.min(o.y0),
            x1: self.x1.max(o.x1),
            y1: self.y1.max(o.y1),
        }
    }

    fn inside(&self, w: i64, h: i64) -> bool {
        self.x0 >= 0 && self.y0 >= 0 && self.x1 < w && self.y1 < h
    }
}

/// Nearest integer to `len * cos(angle)` and `len * sin(angle)`. Uses the
/// pure-Rust `libm` routines so results do not depend on the platform libm.
pub fn polar(len: f64, decideg: f64) -> (i64, i64) {
    let rad = decideg * core::f64::consts::PI / 1800.0;
    (
        libm::round(len * libm::cos(rad)) as i64,
        libm::round(len * libm::sin(rad)) as i64,
    )
}

#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub from: (i64, i64),
    pub to: (i64, i64),
}

/// One Müller-Lyer figure: shaft rectangle plus four fin strokes.
#[derive(Debug, Clone)]
pub struct MullerLyerFigure {
    pub center_y: i64,
    /// First and last shaft column, inclusive.
    pub x0: i64,
    pub x1: i64,
    pub fins: [Segment; 4],
}

impl MullerLyerFigure {
    pub fn shaft(&self) -> Rect {
        Rect {
            x0: self.x0,
            y0: self.center_y - STROKE_HALF,
            x1: self.x1,
            y1: self.center_y + STROKE_HALF,
        }
    }

    fn bounds(&self) -> Rect {
        let mut r = self.shaft();
        for f in &self.fins {
            for (x, y) in [f.from, f.to] {
                r = r.union(Rect {
                    x0: x - STROKE_HALF,
                    y0: y - STROKE_HALF,
                    x1: x + STROKE_HALF,
                    y1: y + STROKE_HALF,
                });
            }
        }
        r
    }
}

pub fn muller_lyer_fin_offsets(p: &MullerLyerParams) -> (i64, i64) {
    polar(f64::from(p.fin_len), f64::from(p.fin_angle_decideg))
}

pub fn muller_lyer_layout(spec: &IllusionSpec, p: &MullerLyerParams) -> [MullerLyerFigure; 2] {
    let w = i64::from(spec.canvas_w);
    let h = i64::from(spec.canvas_h);
    let sep = i64::from(p.vertical_sep);
    let top_y = h / 2 - sep / 2;
    let (dx, dy) = muller_lyer_fin_offsets(p);
    let figure = |cx: i64, cy: i64, len: u32, dir: FinDirection| {
        let len = i64::from(len);
        let x0 = cx - len / 2;
        let x1 = x0 + len - 1;
        // Fins attach just outside the shaft rows so the shaft's middle row
        // carries only shaft ink.
        let up = cy - 2 * STROKE_HALF - 1;
        let down = cy + 2 * STROKE_HALF + 1;
        let (lx, rx) = match dir {
            FinDirection::Outward => (x0 - dx, x1 + dx),
            FinDirection::Inward => (x0 + dx, x1 - dx),
        };
        MullerLyerFigure {
            center_y: cy,
            x0,
            x1,
            fins: [
                Segment { from: (x0, up), to: (lx, up - dy) },
                Segment { from: (x0, down), to: (lx, down + dy) },
                Segment { from: (x1, up), to: (rx, up - dy) },
                Segment { from: (x1, down), to: (rx, down + dy) },
            ],
        }
    };
    [
        figure(w * 3 / 8, top_y, p.shaft_len_left, p.fin_dir_left),
        figure(w * 5 / 8, top_y + sep, p.shaft_len_right, p.fin_dir_right),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disk {
    pub cx: i64,
    pub cy: i64,
    pub r: i64,
}

impl Disk {
    fn bounds(&self) -> Rect {
        Rect {
            x0: self.cx - self.r,
            y0: self.cy - self.r,
            x1: self.cx + self.r,
            y1: self.cy + self.r,
        }
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy <= self.r * self.r
    }
}

#[derive(Debug, Clone)]
pub struct EbbinghausGroup {
    pub center: Disk,
    pub inducers: Vec<Disk>,
}

pub fn ebbinghaus_layout(spec: &IllusionSpec, p: &EbbinghausParams) -> [EbbinghausGroup; 2] {
    let w = i64::from(spec.canvas_w);
    let h = i64::from(spec.canvas_h);
    let group = |cx: i64, r: u32, ri: u32| {
        let ring = f64::from(r + p.ring_gap + ri);
        let inducers = (0..p.inducer_count)
            .map(|j| {
                // Start at twelve o'clock, go clockwise.
                let deci = 3600.0 * f64::from(j) / f64::from(p.inducer_count) - 900.0;
                let (dx, dy) = polar(ring, deci);
                Disk { cx: cx + dx, cy: h / 2 + dy, r: i64::from(ri) }
            })
            .collect();
        EbbinghausGroup {
            center: Disk { cx, cy: h / 2, r: i64::from(r) },
            inducers,
        }
    };
    [
        group(w / 4, p.center_r_left, p.inducer_r_left),
        group(w * 3 / 4, p.center_r_right, p.inducer_r_right),
    ]
}

/// Café wall geometry: the wall rectangle and per-row tile placement.
#[derive(Debug, Clone)]
pub struct CafeWallLayout {
    pub x_origin: i64,
    pub y_origin: i64,
    pub wall_w: i64,
    pub wall_h: i64,
    /// Horizontal phase shift of each tile row.
    pub row_shift: Vec<i64>,
    /// Slope applied to row `r` is `row_tilt_sign[r] * tan(tilt)`.
    pub tilt_tan: f64,
}

impl CafeWallLayout {
    /// Top row of tile row `r` at column `x`.
    pub fn row_top(&self, p: &CafeWallParams, r: u32, x: i64) -> i64 {
        let base = self.y_origin
            + i64::from(p.mortar_px)
            + i64::from(r) * i64::from(p.tile_h + p.mortar_px);
        base + self.tilt_offset(r, x)
    }

    pub fn tilt_offset(&self, r: u32, x: i64) -> i64 {
        if self.tilt_tan == 0.0 {
            return 0;
        }
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        let cx = self.x_origin + self.wall_w / 2;
        libm::round(sign * (x - cx) as f64 * self.tilt_tan) as i64
    }

    fn max_tilt_offset(&self) -> i64 {
        self.tilt_offset(0, self.x_origin).abs().max(
            self.tilt_offset(0, self.x_origin + self.wall_w - 1).abs(),
        )
    }
}

pub fn cafe_wall_layout(spec: &IllusionSpec, p: &CafeWallParams) -> CafeWallLayout {
    let w = i64::from(spec.canvas_w);
    let h = i64::from(spec.canvas_h);
    let wall_w = i64::from(p.cols) * i64::from(p.tile_w);
    let wall_h = i64::from(p.rows) * i64::from(p.tile_h) + i64::from(p.rows + 1) * i64::from(p.mortar_px);
    let shift = i64::from(p.row_offset_milli) * i64::from(p.tile_w) / 1000;
    let rad = f64::from(p.true_tilt_decideg) * core::f64::consts::PI / 1800.0;
    CafeWallLayout {
        x_origin: (w - wall_w) / 2,
        y_origin: (h - wall_h) / 2,
        wall_w,
        wall_h,
        row_shift: (0..p.rows).map(|r| if r % 2 == 1 { shift } else { 0 }).collect(),
        tilt_tan: if p.true_tilt_decideg == 0 { 0.0 } else { libm::tan(rad) },
    }
}

/// Pixel rows occupied by the contrast stripe, `y0..y1`.
pub fn stripe_rows(spec: &IllusionSpec, p: &ContrastStripeParams) -> (i64, i64) {
    let h = i64::from(spec.canvas_h);
    let sh = i64::from(p.stripe_height_milli) * h / 1000;
    let y0 = (h - sh) / 2;
    (y0, y0 + sh)
}

/// Linear integer ramp from `a` at x = 0 to `b` at x = w - 1.
pub fn ramp(a: u32, b: u32, x: i64, w: i64) -> u8 {
    let (a, b) = (i64::from(a), i64::from(b));
    if w <= 1 {
        return a as u8;
    }
    (a + (b - a) * x / (w - 1)) as u8
}

#[derive(Debug, Clone)]
pub struct GridLayout {
    /// Centers of the vertical lines (x) and horizontal lines (y).
    pub xs: Vec<i64>,
    pub ys: Vec<i64>,
    pub spacing_x: i64,
    pub spacing_y: i64,
}

pub fn grid_layout(spec: &IllusionSpec, p: &ScintillatingGridParams) -> GridLayout {
    let w = i64::from(spec.canvas_w);
    let h = i64::from(spec.canvas_h);
    let n = i64::from(p.grid_n);
    GridLayout {
        xs: (1..=n).map(|i| i * w / (n + 1)).collect(),
        ys: (1..=n).map(|i| i * h / (n + 1)).collect(),
        spacing_x: w / (n + 1),
        spacing_y: h / (n + 1),
    }
}

/// Columns `[c, c + line_px)` covered by a line centered at `c`.
pub fn line_span(center: i64, line_px: u32) -> (i64, i64) {
    let lp = i64::from(line_px);
    let start = center - lp / 2;
    (start, start + lp)
}

/// Half-size of a hidden stereogram shape.
pub fn shape_half_size(spec: &IllusionSpec) -> i64 {
    i64::from(spec.canvas_w.min(spec.canvas_h)) * 3 / 10
}

fn invalid(msg: impl Into<String>) -> StimulusError {
    StimulusError::InvalidSpec(msg.into())
}

fn gray(name: &str, v: u32) -> Result<(), StimulusError> {
    if v > 255 {
        return Err(invalid(format!("{name} = {v} outside 0..=255")));
    }
    Ok(())
}

fn positive(name: &str, v: u32) -> Result<(), StimulusError> {
    if v == 0 {
        return Err(invalid(format!("{name} must be positive")));
    }
    Ok(())
}

/// Checks every invariant of a spec: positive dimensions, gray ranges and
/// that all geometry lies inside the canvas.
pub fn validate(spec: &IllusionSpec) -> Result<(), StimulusError> {
    positive("canvas_w", spec.canvas_w)?;
    positive("canvas_h", spec.canvas_h)?;
    if spec.canvas_w > 8192 || spec.canvas_h > 8192 {
        return Err(invalid("canvas larger than 8192 px"));
    }
    let w = i64::from(spec.canvas_w);
    let h = i64::from(spec.canvas_h);
    match &spec.params {
        IllusionParams::MullerLyer(p) => {
            positive("shaft_len_left", p.shaft_len_left)?;
            positive("shaft_len_right", p.shaft_len_right)?;
            positive("fin_len", p.fin_len)?;
            positive("vertical_sep", p.vertical_sep)?;
            if !(100..=800).contains(&p.fin_angle_decideg) {
                return Err(invalid("fin_angle_decideg outside 100..=800"));
            }
            let (dx, dy) = muller_lyer_fin_offsets(p);
            for (len, dir) in [
                (p.shaft_len_left, p.fin_dir_left),
                (p.shaft_len_right, p.fin_dir_right),
            ] {
                if dir == FinDirection::Inward && 2 * dx >= i64::from(len) {
                    return Err(invalid("inward fins cross on a short shaft"));
                }
            }
            let figs = muller_lyer_layout(spec, p);
            for f in &figs {
                if !f.bounds().inside(w, h) {
                    return Err(invalid("Müller-Lyer figure outside canvas"));
                }
            }
            let reach = dy + 3 * STROKE_HALF + 1;
            if i64::from(p.vertical_sep) <= 2 * reach {
                return Err(invalid("vertical_sep too small, figures overlap"));
            }
        }
        IllusionParams::Ebbinghaus(p) => {
            positive("center_r_left", p.center_r_left)?;
            positive("center_r_right", p.center_r_right)?;
            positive("inducer_r_left", p.inducer_r_left)?;
            positive("inducer_r_right", p.inducer_r_right)?;
            positive("inducer_count", p.inducer_count)?;
            if p.inducer_count > 64 {
                return Err(invalid("inducer_count above 64"));
            }
            if p.ring_gap < 2 {
                return Err(invalid("ring_gap must be at least 2 px"));
            }
            let groups = ebbinghaus_layout(spec, p);
            for (side, g) in groups.iter().enumerate() {
                let mut b = g.center.bounds();
                for d in &g.inducers {
                    b = b.union(d.bounds());
                }
                if !b.inside(w, h) {
                    return Err(invalid("Ebbinghaus group outside canvas"));
                }
                let in_half = if side == 0 { b.x1 < w / 2 } else { b.x0 >= w / 2 };
                if !in_half {
                    return Err(invalid("Ebbinghaus group crosses the midline"));
                }
            }
        }
        IllusionParams::CafeWall(p) => {
            positive("tile_w", p.tile_w)?;
            positive("tile_h", p.tile_h)?;
            positive("mortar_px", p.mortar_px)?;
            positive("rows", p.rows)?;
            positive("cols", p.cols)?;
            gray("mortar_gray", p.mortar_gray)?;
            if p.row_offset_milli > 500 {
                return Err(invalid("row_offset_milli outside 0..=500"));
            }
            if p.true_tilt_decideg.abs() > 100 {
                return Err(invalid("true_tilt_decideg outside -100..=100"));
            }
            let l = cafe_wall_layout(spec, p);
            let slack = l.max_tilt_offset();
            if l.x_origin < 0 || l.y_origin - slack < 0 || l.y_origin + l.wall_h + slack > h {
                return Err(invalid("café wall outside canvas"));
            }
            if slack > i64::from(p.mortar_px) * 4 {
                return Err(invalid("tilt too steep for the wall width"));
            }
        }
        IllusionParams::ContrastStripe(p) => {
            gray("bg_gray_left", p.bg_gray_left)?;
            gray("bg_gray_right", p.bg_gray_right)?;
            gray("stripe_gray_left", p.stripe_gray_left)?;
            gray("stripe_gray_right", p.stripe_gray_right)?;
            if !(1..=1000).contains(&p.stripe_height_milli) {
                return Err(invalid("stripe_height_milli outside 1..=1000"));
            }
            let (y0, y1) = stripe_rows(spec, p);
            if y1 <= y0 {
                return Err(invalid("stripe thinner than one pixel"));
            }
        }
        IllusionParams::ScintillatingGrid(p) => {
            gray("bg_gray", p.bg_gray)?;
            gray("line_gray", p.line_gray)?;
            gray("disk_gray", p.disk_gray)?;
            positive("grid_n", p.grid_n)?;
            positive("line_px", p.line_px)?;
            positive("disk_r", p.disk_r)?;
            if p.disk_gray < u32::from(DARK_THRESHOLD) {
                return Err(invalid("disk_gray must stay above the dark threshold"));
            }
            if p.true_black_disks > 1 || p.true_black_disks > p.grid_n * p.grid_n {
                return Err(invalid("true_black_disks must be 0 or 1"));
            }
            let g = grid_layout(spec, p);
            let spacing = g.spacing_x.min(g.spacing_y);
            if i64::from(p.line_px) >= spacing || 2 * i64::from(p.disk_r) + 1 >= spacing {
                return Err(invalid("grid lines or disks wider than the grid spacing"));
            }
        }
        IllusionParams::Autostereogram(p) => {
            positive("pattern_period", p.pattern_period)?;
            positive("depth_amplitude", p.depth_amplitude)?;
            if p.pattern_period <= 2 * p.depth_amplitude {
                return Err(invalid("pattern_period must exceed 2 * depth_amplitude"));
            }
            if p.pattern_period < 8 || i64::from(p.pattern_period) * 4 > w {
                return Err(invalid("pattern_period outside 8..=canvas_w/4"));
            }
            if w / 2 - shape_half_size(spec) < i64::from(p.pattern_period) {
                return Err(invalid("hidden shape starts within the first pattern period"));
            }
        }
    }
    Ok(())
}
