//! SIFT-style keypoints on gray and Bayer scale spaces.
//!
//! Both domains share one implementation. A Bayer scale space lives on the
//! half-resolution super-pixel lattice; detection there uses a 5×5 in-plane
//! extremum window instead of 3×3, and every location and scale is mapped
//! back to input pixels.

mod geometry;
mod matching;
mod viz;

pub use geometry::{estimate_homography, repeatability, rotation_homography, scale_homography, HomographyFit};
pub use geometry::Homography;
pub use matching::{match_descriptors, verify_matches, Match, MatchSet};
pub use viz::{keypoints_table, render_matches};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multiscale::{
    build_bayer_scale_space, build_gray_scale_space, ScaleDomain, ScaleSpace, ScaleSpaceConfig,
};
use crate::raster::{BayerImage, PlanarImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiftConfig {
    pub scale_space: ScaleSpaceConfig,
    /// Minimum |D| at the refined extremum, on the [0, 1] intensity scale.
    pub contrast_threshold: f64,
    /// Principal-curvature ratio limit `r`.
    pub edge_ratio: f64,
    pub max_refine_steps: usize,
    /// Detection border, in octave pixels.
    pub border: usize,
    pub ori_bins: usize,
    pub ori_peak_ratio: f64,
    /// Orientation window sigma relative to the keypoint scale.
    pub ori_sigma_factor: f64,
    /// Orientation window radius in units of the window sigma.
    pub ori_radius_factor: f64,
    /// Descriptor cells per side.
    pub desc_width: usize,
    pub desc_bins: usize,
    /// Descriptor cell side relative to the keypoint scale.
    pub desc_scale_factor: f64,
    pub desc_clip: f64,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            scale_space: ScaleSpaceConfig::default(),
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            max_refine_steps: 5,
            border: 5,
            ori_bins: 36,
            ori_peak_ratio: 0.8,
            ori_sigma_factor: 1.5,
            ori_radius_factor: 3.0,
            desc_width: 4,
            desc_bins: 8,
            desc_scale_factor: 3.0,
            desc_clip: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    /// Column in input-image pixels.
    pub x: f64,
    /// Row in input-image pixels.
    pub y: f64,
    pub octave: usize,
    /// Refined (fractional) level inside the octave.
    pub level: f64,
    /// Absolute sigma in input-image pixels.
    pub scale: f64,
    /// Degrees in `[0, 360)`, measured like the gradient orientation.
    pub orientation: f64,
    /// DoG value at the refined extremum.
    pub response: f64,
    /// Position inside the octave raster.
    pub ox: f64,
    pub oy: f64,
    /// Sigma in octave pixels.
    pub sigma_oct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiftDescriptor {
    pub keypoint: Keypoint,
    pub values: Vec<f64>,
}

impl SiftDescriptor {
    pub fn distance(&self, other: &SiftDescriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// In-plane half-width of the extremum window.
fn window_radius(space: &ScaleSpace) -> usize {
    match space.domain {
        ScaleDomain::Gray => 1,
        ScaleDomain::BayerSuperPixel(_) => 2,
    }
}

struct DogCube<'a> {
    levels: &'a [PlanarImage],
    w: usize,
}

impl DogCube<'_> {
    #[inline]
    fn at(&self, s: usize, x: usize, y: usize) -> f64 {
        self.levels[s].samples()[y * self.w + x]
    }
}

fn is_extremum(c: &DogCube<'_>, s: usize, x: usize, y: usize, r: isize) -> bool {
    let v = c.at(s, x, y);
    let (mut is_max, mut is_min) = (true, true);
    for ds in [s - 1, s, s + 1] {
        for dy in -r..=r {
            let yy = (y as isize + dy) as usize;
            for dx in -r..=r {
                if ds == s && dx == 0 && dy == 0 {
                    continue;
                }
                let n = c.at(ds, (x as isize + dx) as usize, yy);
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    true
}

/// Gradient, Hessian and sub-sample offset of D at `(s, x, y)`.
fn fit(c: &DogCube<'_>, s: usize, x: usize, y: usize) -> ([f64; 3], [[f64; 3]; 3], Option<[f64; 3]>) {
    let d = |ds: isize, dx: isize, dy: isize| {
        c.at(
            (s as isize + ds) as usize,
            (x as isize + dx) as usize,
            (y as isize + dy) as usize,
        )
    };
    let v = d(0, 0, 0);
    let g = [
        (d(0, 1, 0) - d(0, -1, 0)) / 2.0,
        (d(0, 0, 1) - d(0, 0, -1)) / 2.0,
        (d(1, 0, 0) - d(-1, 0, 0)) / 2.0,
    ];
    let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
    let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
    let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
    let dxy = (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1)) / 4.0;
    let dxs = (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0)) / 4.0;
    let dys = (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1)) / 4.0;
    let hm = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
    let m = nalgebra::Matrix3::from_fn(|i, j| hm[i][j]);
    let off = m
        .lu()
        .solve(&nalgebra::Vector3::new(-g[0], -g[1], -g[2]))
        .map(|o| [o[0], o[1], o[2]]);
    (g, hm, off)
}

fn refine(
    c: &DogCube<'_>,
    space: &ScaleSpace,
    cfg: &SiftConfig,
    octave: usize,
    s0: usize,
    x0: usize,
    y0: usize,
) -> Option<Keypoint> {
    let ns = space.config.s;
    let h = c.levels[0].height();
    let border = cfg.border.max(window_radius(space));
    let (mut s, mut x, mut y) = (s0, x0, y0);
    for _ in 0..cfg.max_refine_steps {
        let (g, hm, off) = fit(c, s, x, y);
        let off = off?;
        if off.iter().any(|o| !o.is_finite() || o.abs() > 1e3) {
            return None;
        }
        if off.iter().all(|o| o.abs() < 0.5) {
            let value = c.at(s, x, y) + 0.5 * (g[0] * off[0] + g[1] * off[1] + g[2] * off[2]);
            if value.abs() < cfg.contrast_threshold {
                return None;
            }
            let (dxx, dyy, dxy) = (hm[0][0], hm[1][1], hm[0][1]);
            let tr = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            let r = cfg.edge_ratio;
            if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
                return None;
            }
            let (ox, oy) = (x as f64 + off[0], y as f64 + off[1]);
            let level = s as f64 + off[2];
            let sigma_oct = space.level_sigma(level);
            let (px, py) = space.to_input_coords(octave, ox, oy);
            return Some(Keypoint {
                x: px,
                y: py,
                octave,
                level,
                scale: space.to_input_scale(octave, sigma_oct),
                orientation: 0.0,
                response: value,
                ox,
                oy,
                sigma_oct,
            });
        }
        let nx = x as isize + off[0].round() as isize;
        let ny = y as isize + off[1].round() as isize;
        let nsl = s as isize + off[2].round() as isize;
        if nsl < 1
            || nsl > ns as isize
            || nx < border as isize
            || ny < border as isize
            || nx >= (c.w - border) as isize
            || ny >= (h - border) as isize
        {
            return None;
        }
        (s, x, y) = (nsl as usize, nx as usize, ny as usize);
    }
    None
}

/// Scale-space extrema that survive refinement, contrast and edge tests.
/// Orientation is left at 0; see [`orient`].
pub fn detect(space: &ScaleSpace, cfg: &SiftConfig) -> Result<Vec<Keypoint>> {
    let ns = space.config.s;
    if space.octaves.iter().any(|o| o.dogs.len() < 3) {
        return Err(Error::invalid("detection needs at least 3 DoG levels per octave"));
    }
    let r = window_radius(space);
    let border = cfg.border.max(r);
    let prefilter = 0.5 * cfg.contrast_threshold;
    let jobs: Vec<(usize, usize)> = (0..space.octaves.len())
        .flat_map(|o| (1..=ns).map(move |s| (o, s)))
        .collect();
    let mut found: Vec<Keypoint> = jobs
        .par_iter()
        .flat_map_iter(|&(o, s)| {
            let oct = &space.octaves[o];
            let (w, h) = (oct.width(), oct.height());
            let cube = DogCube { levels: &oct.dogs, w };
            let mut out = Vec::new();
            if w <= 2 * border || h <= 2 * border {
                return out.into_iter();
            }
            for y in border..h - border {
                for x in border..w - border {
                    if cube.at(s, x, y).abs() <= prefilter || !is_extremum(&cube, s, x, y, r as isize) {
                        continue;
                    }
                    if let Some(kp) = refine(&cube, space, cfg, o, s, x, y) {
                        out.push(kp);
                    }
                }
            }
            out.into_iter()
        })
        .collect();
    // refinement can converge on the same sample from two starts
    found.sort_by(|a, b| {
        (a.octave, a.y, a.x, a.level)
            .partial_cmp(&(b.octave, b.y, b.x, b.level))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    found.dedup_by(|a, b| {
        a.octave == b.octave
            && (a.ox - b.ox).abs() < 1e-9
            && (a.oy - b.oy).abs() < 1e-9
            && (a.level - b.level).abs() < 1e-9
    });
    Ok(found)
}

fn level_image<'a>(kp: &Keypoint, space: &'a ScaleSpace) -> &'a PlanarImage {
    let oct = &space.octaves[kp.octave];
    let i = (kp.level.round().max(0.0) as usize).min(oct.gaussians.len() - 1);
    &oct.gaussians[i]
}

#[inline]
fn central_gradient(img: &PlanarImage, x: usize, y: usize) -> (f64, f64) {
    let w = img.width();
    let d = img.samples();
    (
        d[y * w + x + 1] - d[y * w + x - 1],
        d[(y + 1) * w + x] - d[(y - 1) * w + x],
    )
}

/// Dominant orientations: the histogram maximum plus every other local peak
/// reaching `ori_peak_ratio` of it. Returns one keypoint copy per peak, or
/// nothing when the keypoint sits on the image border.
pub fn orient(kp: &Keypoint, space: &ScaleSpace, cfg: &SiftConfig) -> Vec<Keypoint> {
    let img = level_image(kp, space);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (cx, cy) = (kp.ox.round() as isize, kp.oy.round() as isize);
    if cx < 1 || cy < 1 || cx >= w - 1 || cy >= h - 1 {
        return Vec::new();
    }
    let sigw = cfg.ori_sigma_factor * kp.sigma_oct;
    let rad = (cfg.ori_radius_factor * sigw).round() as isize;
    let n = cfg.ori_bins;
    let mut hist = vec![0.0; n];
    for dy in -rad..=rad {
        let py = cy + dy;
        if py < 1 || py >= h - 1 {
            continue;
        }
        for dx in -rad..=rad {
            let px = cx + dx;
            if px < 1 || px >= w - 1 || dx * dx + dy * dy > rad * rad {
                continue;
            }
            let (gx, gy) = central_gradient(img, px as usize, py as usize);
            let m = gx.hypot(gy);
            if m == 0.0 {
                continue;
            }
            let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigw * sigw)).exp();
            let a = crate::gradient::orientation_deg(gx, gy, true);
            let b = ((a / 360.0 * n as f64).round() as usize) % n;
            hist[b] += wgt * m;
        }
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let at = |k: isize| hist[(i as isize + k).rem_euclid(n as isize) as usize];
            (at(-2) + at(2) + 4.0 * (at(-1) + at(1)) + 6.0 * at(0)) / 16.0
        })
        .collect();
    let max = smooth.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..n {
        let l = smooth[(i + n - 1) % n];
        let r = smooth[(i + 1) % n];
        let c = smooth[i];
        if c > l && c > r && c >= cfg.ori_peak_ratio * max {
            let bin = i as f64 + 0.5 * (l - r) / (l - 2.0 * c + r);
            let mut a = bin * 360.0 / n as f64;
            a = a.rem_euclid(360.0);
            if a >= 360.0 {
                a = 0.0;
            }
            out.push(Keypoint {
                orientation: a,
                ..*kp
            });
        }
    }
    out
}

/// 4×4×8 histogram descriptor over the rotated, scale-normalized patch.
/// `None` when the keypoint is on the border or the patch has no gradient.
pub fn describe(kp: &Keypoint, space: &ScaleSpace, cfg: &SiftConfig) -> Option<SiftDescriptor> {
    let img = level_image(kp, space);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (cx, cy) = (kp.ox.round() as isize, kp.oy.round() as isize);
    if cx < 1 || cy < 1 || cx >= w - 1 || cy >= h - 1 {
        return None;
    }
    let d = cfg.desc_width;
    let nb = cfg.desc_bins;
    let df = d as f64;
    let hw = cfg.desc_scale_factor * kp.sigma_oct;
    let radius = (hw * std::f64::consts::SQRT_2 * (df + 1.0) * 0.5).round() as isize;
    let radius = radius.min(((w * w + h * h) as f64).sqrt() as isize);
    let (sin_o, cos_o) = kp.orientation.to_radians().sin_cos();
    let sub_x = kp.ox - cx as f64;
    let sub_y = kp.oy - cy as f64;
    let gauss = 2.0 * (0.5 * df) * (0.5 * df);
    let mut hist = vec![0.0; d * d * nb];
    for dy in -radius..=radius {
        let py = cy + dy;
        if py < 1 || py >= h - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let px = cx + dx;
            if px < 1 || px >= w - 1 {
                continue;
            }
            let (fx, fy) = (dx as f64 - sub_x, dy as f64 - sub_y);
            let u = (fx * cos_o + fy * sin_o) / hw;
            let v = (-fx * sin_o + fy * cos_o) / hw;
            let cbin = u + 0.5 * df - 0.5;
            let rbin = v + 0.5 * df - 0.5;
            if cbin <= -1.0 || rbin <= -1.0 || cbin >= df || rbin >= df {
                continue;
            }
            let (gx, gy) = central_gradient(img, px as usize, py as usize);
            let m = gx.hypot(gy);
            if m == 0.0 {
                continue;
            }
            let rel = (gy.atan2(gx) - kp.orientation.to_radians()).rem_euclid(std::f64::consts::TAU);
            let obin = rel / std::f64::consts::TAU * nb as f64;
            let wgt = m * (-(u * u + v * v) / gauss).exp();
            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            for (ri, wr) in [(r0 as isize, 1.0 - fr), (r0 as isize + 1, fr)] {
                if ri < 0 || ri >= d as isize {
                    continue;
                }
                for (ci, wc) in [(c0 as isize, 1.0 - fc), (c0 as isize + 1, fc)] {
                    if ci < 0 || ci >= d as isize {
                        continue;
                    }
                    for (oi, wo) in [(o0 as usize % nb, 1.0 - fo), ((o0 as usize + 1) % nb, fo)] {
                        hist[(ri as usize * d + ci as usize) * nb + oi] += wgt * wr * wc * wo;
                    }
                }
            }
        }
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return None;
    }
    for v in hist.iter_mut() {
        *v = (*v / norm).min(cfg.desc_clip);
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in hist.iter_mut() {
        *v /= norm;
    }
    Some(SiftDescriptor {
        keypoint: *kp,
        values: hist,
    })
}

/// Detected and oriented keypoints.
pub fn oriented_keypoints(space: &ScaleSpace, cfg: &SiftConfig) -> Result<Vec<Keypoint>> {
    let kps = detect(space, cfg)?;
    Ok(kps.par_iter().flat_map_iter(|k| orient(k, space, cfg)).collect())
}

/// Detect, orient and describe.
pub fn extract(space: &ScaleSpace, cfg: &SiftConfig) -> Result<Vec<SiftDescriptor>> {
    let kps = oriented_keypoints(space, cfg)?;
    Ok(kps.par_iter().filter_map(|k| describe(k, space, cfg)).collect())
}

/// Scale space of a single-channel image with `cfg.scale_space`.
pub fn gray_space(img: &PlanarImage, cfg: &SiftConfig) -> Result<ScaleSpace> {
    build_gray_scale_space(img, &cfg.scale_space)
}

/// Scale space of a mosaic with `cfg.scale_space`.
pub fn bayer_space(img: &BayerImage, cfg: &SiftConfig) -> Result<ScaleSpace> {
    build_bayer_scale_space(img, &cfg.scale_space)
}

#[cfg(test)]
mod tests;
