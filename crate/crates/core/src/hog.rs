//! Histogram of oriented gradients over a detection window.

use crate::error::{Error, Result};
use crate::gradient::{orientation_deg, GradientField};
use crate::raster::PlanarImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HogConfig {
    /// Cell side in pixels.
    pub cell: usize,
    /// Block side in cells.
    pub block: usize,
    /// Unsigned orientation bins over `[0°, 180°)`.
    pub bins: usize,
    /// Block step in cells.
    pub block_stride: usize,
    /// L2-Hys clipping level.
    pub clip: f64,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self {
            cell: 8,
            block: 2,
            bins: 9,
            block_stride: 1,
            clip: 0.2,
        }
    }
}

impl HogConfig {
    fn validate(&self, w: usize, h: usize) -> Result<(usize, usize)> {
        if self.cell == 0 || self.block == 0 || self.bins == 0 || self.block_stride == 0 {
            return Err(Error::invalid("HOG cell, block, bins and stride must be positive"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::invalid("HOG clip must be positive"));
        }
        if w % self.cell != 0 || h % self.cell != 0 {
            return Err(Error::invalid(format!(
                "window {w}×{h} is not a multiple of the {} px cell",
                self.cell
            )));
        }
        let (cx, cy) = (w / self.cell, h / self.cell);
        if cx < self.block || cy < self.block {
            return Err(Error::invalid("block is larger than the window"));
        }
        Ok((cx, cy))
    }

    /// Descriptor length for a `w × h` window.
    pub fn descriptor_len(&self, w: usize, h: usize) -> Result<usize> {
        let (cx, cy) = self.validate(w, h)?;
        let bx = (cx - self.block) / self.block_stride + 1;
        let by = (cy - self.block) / self.block_stride + 1;
        Ok(bx * by * self.block * self.block * self.bins)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HogDescriptor {
    pub window_w: usize,
    pub window_h: usize,
    pub values: Vec<f64>,
}

/// Raw per-cell histograms, row-major over cells, `bins` values each. Every
/// pixel splits its magnitude between the two nearest bin centers
/// (`i · 180° / bins`), wrapping at 180°.
pub fn cell_histograms(f: &GradientField, cfg: &HogConfig) -> Result<Vec<f64>> {
    let (w, h) = (f.width(), f.height());
    let (cx, _) = cfg.validate(w, h)?;
    let cy = h / cfg.cell;
    let bw = 180.0 / cfg.bins as f64;
    let mut hist = vec![0.0; cx * cy * cfg.bins];
    for y in 0..h {
        for x in 0..w {
            let gx = f.gx.get(x, y, 0);
            let gy = f.gy.get(x, y, 0);
            let m = gx.hypot(gy);
            if m == 0.0 {
                continue;
            }
            let pos = orientation_deg(gx, gy, false) / bw;
            let b0 = pos.floor() as usize % cfg.bins;
            let frac = pos - pos.floor();
            let b1 = (b0 + 1) % cfg.bins;
            let cell = (y / cfg.cell) * cx + x / cfg.cell;
            let base = cell * cfg.bins;
            hist[base + b0] += m * (1.0 - frac);
            hist[base + b1] += m * frac;
        }
    }
    Ok(hist)
}

/// L2-normalize, clip, renormalize. All-zero input stays zero.
fn l2_hys(v: &mut [f64], clip: f64) {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n = norm(v);
    if n <= f64::MIN_POSITIVE {
        v.fill(0.0);
        return;
    }
    for a in v.iter_mut() {
        *a = (*a / n).min(clip);
    }
    let n = norm(v);
    if n > 0.0 {
        for a in v.iter_mut() {
            *a /= n;
        }
    }
}

/// Descriptor of a whole gradient field taken as one window.
pub fn hog(f: &GradientField, cfg: &HogConfig) -> Result<HogDescriptor> {
    let (w, h) = (f.width(), f.height());
    let hist = cell_histograms(f, cfg)?;
    let (cx, cy) = (w / cfg.cell, h / cfg.cell);
    let bx = (cx - cfg.block) / cfg.block_stride + 1;
    let by = (cy - cfg.block) / cfg.block_stride + 1;
    let mut values = Vec::with_capacity(bx * by * cfg.block * cfg.block * cfg.bins);
    let mut block = Vec::with_capacity(cfg.block * cfg.block * cfg.bins);
    for j in 0..by {
        for i in 0..bx {
            block.clear();
            for dy in 0..cfg.block {
                for dx in 0..cfg.block {
                    let cell = (j * cfg.block_stride + dy) * cx + i * cfg.block_stride + dx;
                    block.extend_from_slice(&hist[cell * cfg.bins..][..cfg.bins]);
                }
            }
            l2_hys(&mut block, cfg.clip);
            values.extend_from_slice(&block);
        }
    }
    Ok(HogDescriptor {
        window_w: w,
        window_h: h,
        values,
    })
}

/// Euclidean distance between two descriptors.
pub fn hog_distance(a: &HogDescriptor, b: &HogDescriptor) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::invalid(format!(
            "descriptor lengths differ: {} vs {}",
            a.values.len(),
            b.values.len()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `(scale · v)^exponent` per sample, for contrast-stretching dark inputs
/// before gradient extraction. Negative samples are treated as 0.
pub fn gamma_compress(img: &PlanarImage, scale: f64, exponent: f64) -> PlanarImage {
    img.map(|v| (scale * v).max(0.0).powf(exponent))
}

/// Renders each cell's raw histogram as a star of line segments, one per
/// bin, drawn along the edge direction (perpendicular to the gradient) with
/// brightness proportional to the bin value. White glyphs on black.
pub fn render_glyphs(f: &GradientField, cfg: &HogConfig, cell_px: usize) -> Result<PlanarImage> {
    let hist = cell_histograms(f, cfg)?;
    let (cx, cy) = (f.width() / cfg.cell, f.height() / cfg.cell);
    let cell_px = cell_px.max(3);
    let (w, h) = (cx * cell_px, cy * cell_px);
    let mut img = PlanarImage::zeros(w, h, 1);
    let max = hist.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(img);
    }
    let r = cell_px as f64 / 2.0 - 0.5;
    for j in 0..cy {
        for i in 0..cx {
            let (ox, oy) = (i as f64 * cell_px as f64 + r, j as f64 * cell_px as f64 + r);
            for b in 0..cfg.bins {
                let v = hist[(j * cx + i) * cfg.bins + b] / max;
                if v <= 0.0 {
                    continue;
                }
                let theta = (b as f64 * 180.0 / cfg.bins as f64 + 90.0).to_radians();
                let (dx, dy) = (theta.cos() * r, theta.sin() * r);
                let steps = (2.0 * r).ceil() as usize * 2;
                for s in 0..=steps {
                    let t = s as f64 / steps as f64 * 2.0 - 1.0;
                    let px = (ox + t * dx).round();
                    let py = (oy + t * dy).round();
                    if px >= 0.0 && py >= 0.0 && (px as usize) < w && (py as usize) < h {
                        let (px, py) = (px as usize, py as usize);
                        let cur = img.get(px, py, 0);
                        img.set(px, py, 0, cur.max(v));
                    }
                }
            }
        }
    }
    Ok(img)
}
