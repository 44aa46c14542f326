//! Procedural diagram rasterization and patch extraction.
//!
//! Diagrams are grayscale: white background, dark strokes. The rasterizer
//! draws the handful of primitives the synthetic templates need (segments,
//! circles, arcs, dots); loading resizes any input to the model's square
//! resolution and cuts it into non-overlapping patches, one row vector per
//! patch.

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("image {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("image size {size} is not divisible by patch size {patch}")]
    PatchMismatch { size: usize, patch: usize },
}

/// Grayscale canvas, values in `[0, 1]` where 0 is ink.
pub struct Canvas {
    pub pixels: Array2<f64>,
}

impl Canvas {
    pub fn new(size: usize) -> Self {
        Canvas { pixels: Array2::from_elem((size, size), 1.0) }
    }

    pub fn size(&self) -> usize {
        self.pixels.nrows()
    }

    fn plot(&mut self, x: i64, y: i64, ink: f64) {
        let n = self.size() as i64;
        if x >= 0 && y >= 0 && x < n && y < n {
            let p = &mut self.pixels[(y as usize, x as usize)];
            *p = p.min(1.0 - ink);
        }
    }

    /// Bresenham segment between integer endpoints.
    pub fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64) {
        let (mut x, mut y) = (x0, y0);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.plot(x, y, 1.0);
            if x == x1 && y == y1 {
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

    /// Midpoint circle outline.
    pub fn circle(&mut self, cx: i64, cy: i64, r: i64) {
        let mut x = r;
        let mut y = 0;
        let mut err = 1 - r;
        while x >= y {
            for (px, py) in [
                (cx + x, cy + y),
                (cx - x, cy + y),
                (cx + x, cy - y),
                (cx - x, cy - y),
                (cx + y, cy + x),
                (cx - y, cy + x),
                (cx + y, cy - x),
                (cx - y, cy - x),
            ] {
                self.plot(px, py, 1.0);
            }
            y += 1;
            if err < 0 {
                err += 2 * y + 1;
            } else {
                x -= 1;
                err += 2 * (y - x) + 1;
            }
        }
    }

    /// Arc between two angles (degrees, counterclockwise, y-up), drawn as
    /// short chords.
    pub fn arc(&mut self, cx: i64, cy: i64, r: i64, from_deg: f64, to_deg: f64) {
        let steps = 24;
        let (a0, a1) = (from_deg.to_radians(), to_deg.to_radians());
        let mut prev: Option<(i64, i64)> = None;
        for k in 0..=steps {
            let a = a0 + (a1 - a0) * (k as f64 / steps as f64);
            let x = cx + (r as f64 * a.cos()).round() as i64;
            let y = cy - (r as f64 * a.sin()).round() as i64;
            if let Some((px, py)) = prev {
                self.line(px, py, x, y);
            }
            prev = Some((x, y));
        }
    }

    /// Small filled dot marking a point.
    pub fn dot(&mut self, cx: i64, cy: i64, r: i64) {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    self.plot(cx + dx, cy + dy, 1.0);
                }
            }
        }
    }

    pub fn save_png(&self, path: &std::path::Path) -> Result<(), DiagramError> {
        let n = self.size() as u32;
        let mut img = image::GrayImage::new(n, n);
        for (y, row) in self.pixels.rows().into_iter().enumerate() {
            for (x, &v) in row.iter().enumerate() {
                img.put_pixel(x as u32, y as u32, image::Luma([(v.clamp(0.0, 1.0) * 255.0) as u8]));
            }
        }
        img.save(path).map_err(|e| DiagramError::Unreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// Load any image as grayscale `[0,1]`.
pub fn load_grayscale(path: &std::path::Path) -> Result<Array2<f64>, DiagramError> {
    let img = image::open(path)
        .map_err(|e| DiagramError::Unreadable { path: path.display().to_string(), reason: e.to_string() })?
        .into_luma8();
    let (w, h) = img.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        f64::from(img.get_pixel(x as u32, y as u32)[0]) / 255.0
    }))
}

/// Bilinear resize to a square target.
pub fn resize(src: &Array2<f64>, size: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    if h == size && w == size {
        return src.clone();
    }
    Array2::from_shape_fn((size, size), |(y, x)| {
        let fy = (y as f64 + 0.5) * h as f64 / size as f64 - 0.5;
        let fx = (x as f64 + 0.5) * w as f64 / size as f64 - 0.5;
        let y0 = fy.floor().clamp(0.0, (h - 1) as f64) as usize;
        let x0 = fx.floor().clamp(0.0, (w - 1) as f64) as usize;
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let ty = (fy - y0 as f64).clamp(0.0, 1.0);
        let tx = (fx - x0 as f64).clamp(0.0, 1.0);
        let top = src[(y0, x0)] * (1.0 - tx) + src[(y0, x1)] * tx;
        let bot = src[(y1, x0)] * (1.0 - tx) + src[(y1, x1)] * tx;
        top * (1.0 - ty) + bot * ty
    })
}

/// Cut a square image into non-overlapping `patch×patch` tiles, row-major,
/// each flattened to one row.
pub fn patchify(img: &Array2<f64>, patch: usize) -> Result<Array2<f64>, DiagramError> {
    let size = img.nrows();
    assert_eq!(img.ncols(), size, "patchify expects a square image");
    if size % patch != 0 {
        return Err(DiagramError::PatchMismatch { size, patch });
    }
    let grid = size / patch;
    let mut out = Array2::zeros((grid * grid, patch * patch));
    for gy in 0..grid {
        for gx in 0..grid {
            let row = gy * grid + gx;
            for py in 0..patch {
                for px in 0..patch {
                    out[(row, py * patch + px)] = img[(gy * patch + py, gx * patch + px)];
                }
            }
        }
    }
    Ok(out)
}

/// Pixel-level inverse of [`patchify`], for round-trip tests.
pub fn unpatchify(patches: &Array2<f64>, patch: usize) -> Array2<f64> {
    let grid = (patches.nrows() as f64).sqrt() as usize;
    assert_eq!(grid * grid, patches.nrows());
    let size = grid * patch;
    let mut out = Array2::zeros((size, size));
    for gy in 0..grid {
        for gx in 0..grid {
            let row = gy * grid + gx;
            for py in 0..patch {
                for px in 0..patch {
                    out[(gy * patch + py, gx * patch + px)] = patches[(row, py * patch + px)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canvas_strokes_leave_ink() {
        let mut c = Canvas::new(32);
        c.line(2, 2, 29, 29);
        c.circle(16, 16, 10);
        c.arc(16, 16, 6, 0.0, 90.0);
        c.dot(5, 25, 2);
        let ink: f64 = c.pixels.iter().map(|&v| 1.0 - v).sum();
        assert!(ink > 30.0, "expected a visible drawing, ink = {ink}");
        assert!(c.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn png_roundtrip_preserves_pixels() {
        let mut c = Canvas::new(16);
        c.line(0, 0, 15, 15);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        c.save_png(&path).unwrap();
        let back = load_grayscale(&path).unwrap();
        for (a, b) in c.pixels.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1.0 / 255.0 + 1e-9);
        }
    }

    #[test]
    fn resize_identity_and_downscale() {
        let mut c = Canvas::new(32);
        c.circle(16, 16, 12);
        assert_eq!(resize(&c.pixels, 32), c.pixels);
        let small = resize(&c.pixels, 16);
        assert_eq!(small.dim(), (16, 16));
        assert!(small.iter().any(|&v| v < 0.9), "circle survives downscale");
    }

    #[test]
    fn patchify_roundtrips_and_checks_divisibility() {
        let img = Array2::from_shape_fn((8, 8), |(y, x)| (y * 8 + x) as f64 / 64.0);
        let p = patchify(&img, 4).unwrap();
        assert_eq!(p.dim(), (4, 16));
        assert_eq!(unpatchify(&p, 4), img);
        assert!(matches!(patchify(&img, 3), Err(DiagramError::PatchMismatch { size: 8, patch: 3 })));
    }

    #[test]
    fn patch_rows_are_row_major_tiles() {
        // mark one pixel in the bottom-right tile; it must land in the last row
        let mut img = Array2::from_elem((8, 8), 1.0);
        img[(7, 7)] = 0.0;
        let p = patchify(&img, 4).unwrap();
        assert_eq!(p[(3, 15)], 0.0);
        assert_eq!(p.row(0).iter().filter(|&&v| v == 0.0).count(), 0);
    }
}
