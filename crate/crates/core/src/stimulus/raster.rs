//! Minimal integer rasterizer: no anti-aliasing, no floating point.

pub(crate) struct Raster {
    pub w: i64,
    pub h: i64,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(w: u32, h: u32, channels: usize, fill: &[u8]) -> Self {
        debug_assert_eq!(fill.len(), channels);
        let n = w as usize * h as usize;
        let mut data = Vec::with_capacity(n * channels);
        for _ in 0..n {
            data.extend_from_slice(fill);
        }
        Raster { w: i64::from(w), h: i64::from(h), channels, data }
    }

    #[inline]
    pub fn put(&mut self, x: i64, y: i64, color: &[u8]) {
        if x < 0 || y < 0 || x >= self.w || y >= self.h {
            return;
        }
        let i = (y * self.w + x) as usize * self.channels;
        self.data[i..i + self.channels].copy_from_slice(color);
    }

    /// Fills the inclusive rectangle, clipped to the canvas.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: &[u8]) {
        for y in y0.max(0)..=y1.min(self.h - 1) {
            for x in x0.max(0)..=x1.min(self.w - 1) {
                self.put(x, y, color);
            }
        }
    }

    /// Scanline disk: every pixel with `dx² + dy² <= r²`.
    pub fn fill_disk(&mut self, cx: i64, cy: i64, r: i64, color: &[u8]) {
        for dy in -r..=r {
            let half = (r * r - dy * dy).unsigned_abs().isqrt() as i64;
            for x in cx - half..=cx + half {
                self.put(x, cy + dy, color);
            }
        }
    }

    /// Bresenham line stamped with a square brush of the given half-width.
    pub fn thick_line(&mut self, from: (i64, i64), to: (i64, i64), half: i64, color: &[u8]) {
        let (mut x, mut y) = from;
        let dx = (to.0 - x).abs();
        let dy = -(to.1 - y).abs();
        let sx = if x < to.0 { 1 } else { -1 };
        let sy = if y < to.1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.fill_rect(x - half, y - half, x + half, y + half, color);
            if (x, y) == to {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(r: &Raster, v: u8) -> usize {
        r.data.iter().filter(|p| **p == v).count()
    }

    #[test]
    fn disk_area_matches_lattice_count() {
        for radius in [1i64, 5, 17, 40] {
            let mut r = Raster::new(128, 128, 1, &[0]);
            r.fill_disk(64, 64, radius, &[1]);
            let lattice = (-radius..=radius)
                .flat_map(|dy| (-radius..=radius).map(move |dx| (dx, dy)))
                .filter(|(dx, dy)| dx * dx + dy * dy <= radius * radius)
                .count();
            assert_eq!(count(&r, 1), lattice, "radius {radius}");
        }
    }

    #[test]
    fn line_hits_both_endpoints() {
        let mut r = Raster::new(32, 32, 1, &[0]);
        r.thick_line((2, 3), (20, 11), 0, &[9]);
        assert_eq!(r.data[(3 * 32 + 2) as usize], 9);
        assert_eq!(r.data[(11 * 32 + 20) as usize], 9);
    }

    #[test]
    fn drawing_is_clipped() {
        let mut r = Raster::new(8, 8, 3, &[0, 0, 0]);
        r.fill_rect(-5, -5, 20, 2, &[1, 2, 3]);
        r.fill_disk(0, 0, 30, &[4, 5, 6]);
        assert_eq!(r.data.len(), 8 * 8 * 3);
    }
}
