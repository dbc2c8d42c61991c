//! Gaussian blur, bilinear resize and DoG scale spaces.
//!
//! Mosaics are never filtered as a plain raster here. Blur and resize act on
//! the four super-pixel planes independently and reassemble the result, so
//! the CFA layout survives every operation. Bayer scale spaces live on the
//! super-pixel lattice.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradient::reflect;
use crate::raster::{superpixel_view, BayerImage, CfaPattern, PlanarImage, GRAY_WEIGHTS};

/// `σ = 0.3·((a − 1)·0.5 − 1) + 0.8` for an odd kernel size `a`.
pub fn sigma_for_kernel(a: usize) -> Result<f64> {
    if a == 0 || a % 2 == 0 {
        return Err(Error::invalid(format!("kernel size must be odd, got {a}")));
    }
    Ok(0.3 * ((a as f64 - 1.0) * 0.5 - 1.0) + 0.8)
}

/// Separable, normalized Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::invalid(format!("kernel size must be odd, got {size}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("kernel sigma must be positive, got {sigma}")));
        }
        let r = (size / 2) as f64;
        let raw: Vec<f64> = (0..size)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        Ok(Self {
            sigma,
            taps: raw.into_iter().map(|t| t / sum).collect(),
        })
    }

    /// Size `a` with the sigma given by [`sigma_for_kernel`].
    pub fn from_size(size: usize) -> Result<Self> {
        Self::new(size, sigma_for_kernel(size)?)
    }

    /// Kernel covering ±4σ.
    pub fn for_sigma(sigma: f64) -> Result<Self> {
        let r = (4.0 * sigma).ceil().max(1.0) as usize;
        Self::new(2 * r + 1, sigma)
    }

    pub fn size(&self) -> usize {
        self.taps.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Dense `size × size` weights, row-major.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.size();
        let mut w = Vec::with_capacity(n * n);
        for a in &self.taps {
            for b in &self.taps {
                w.push(a * b);
            }
        }
        w
    }
}

fn convolve_rows(src: &[f64], dst: &mut [f64], w: usize, taps: &[f64]) {
    let r = (taps.len() / 2) as isize;
    dst.par_chunks_mut(w)
        .zip(src.par_chunks(w))
        .for_each(|(out, row)| {
            for (x, o) in out.iter_mut().enumerate() {
                let xi = x as isize;
                *o = if xi >= r && xi + r < w as isize {
                    let start = (xi - r) as usize;
                    taps.iter().zip(&row[start..]).map(|(k, v)| k * v).sum()
                } else {
                    taps.iter()
                        .enumerate()
                        .map(|(j, k)| k * row[reflect(xi + j as isize - r, w)])
                        .sum()
                };
            }
        });
}

fn convolve_cols(src: &[f64], dst: &mut [f64], w: usize, h: usize, taps: &[f64]) {
    let r = (taps.len() / 2) as isize;
    dst.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        out.fill(0.0);
        for (j, k) in taps.iter().enumerate() {
            let sy = reflect(y as isize + j as isize - r, h);
            let row = &src[sy * w..][..w];
            for (o, v) in out.iter_mut().zip(row) {
                *o += k * v;
            }
        }
    });
}

/// Separable Gaussian blur of every channel with reflect-101 borders.
pub fn blur(img: &PlanarImage, kernel: &GaussianKernel) -> PlanarImage {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(img.samples().len());
    let mut tmp = vec![0.0; w * h];
    for c in 0..img.channels() {
        convolve_rows(img.plane(c), &mut tmp, w, kernel.taps());
        let start = out.len();
        out.resize(start + w * h, 0.0);
        convolve_cols(&tmp, &mut out[start..], w, h, kernel.taps());
    }
    PlanarImage::from_raw(w, h, img.channels(), out)
}

/// Blurs the four super-pixel planes independently.
pub fn blur_bayer(img: &BayerImage, kernel: &GaussianKernel) -> Result<BayerImage> {
    let view = superpixel_view(img)?;
    Ok(view.map_planes(|p| blur(p, kernel))?.reassemble())
}

fn scaled_dim(n: usize, scale: f64) -> Result<usize> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let m = (n as f64 * scale).round() as usize;
    if m == 0 {
        return Err(Error::Degenerate(format!("{n} px scaled by {scale} is empty")));
    }
    Ok(m)
}

/// Bilinear resize by `scale` (output dimensions rounded).
pub fn resize(img: &PlanarImage, scale: f64) -> Result<PlanarImage> {
    let ow = scaled_dim(img.width(), scale)?;
    let oh = scaled_dim(img.height(), scale)?;
    resize_to(img, ow, oh)
}

fn axis_map(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let ratio = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|d| {
            let s = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (n_in - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear resize to an explicit size using pixel-center alignment,
/// `src = (dst + 0.5) · in/out − 0.5`, clamped to the image.
pub fn resize_to(img: &PlanarImage, ow: usize, oh: usize) -> Result<PlanarImage> {
    if ow == 0 || oh == 0 {
        return Err(Error::Degenerate("resize target is empty".into()));
    }
    let (w, h) = (img.width(), img.height());
    let xs = axis_map(w, ow);
    let ys = axis_map(h, oh);
    let mut out = vec![0.0; ow * oh * img.channels()];
    out.par_chunks_mut(ow).enumerate().for_each(|(row, dst)| {
        let (c, y) = (row / oh, row % oh);
        let plane = img.plane(c);
        let (y0, y1, fy) = ys[y];
        let (r0, r1) = (&plane[y0 * w..][..w], &plane[y1 * w..][..w]);
        for (o, &(x0, x1, fx)) in dst.iter_mut().zip(&xs) {
            let top = r0[x0] + fx * (r0[x1] - r0[x0]);
            let bot = r1[x0] + fx * (r1[x1] - r1[x0]);
            *o = top + fy * (bot - top);
        }
    });
    Ok(PlanarImage::from_raw(ow, oh, img.channels(), out))
}

/// Resizes each super-pixel plane by `scale`; the result is a mosaic of
/// twice the plane size in each direction.
pub fn resize_bayer(img: &BayerImage, scale: f64) -> Result<BayerImage> {
    let view = superpixel_view(img)?;
    let ow = scaled_dim(view.sp_width(), scale)?;
    let oh = scaled_dim(view.sp_height(), scale)?;
    let planes = view.planes().iter().map(|p| resize_to(p, ow, oh)).collect::<Result<Vec<_>>>()?;
    let planes: [PlanarImage; 4] = planes.try_into().expect("four planes");
    Ok(crate::raster::SuperPixelView::from_planes(view.pattern(), planes)?.reassemble())
}

/// What a scale space was built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleDomain {
    Gray,
    /// Levels are super-pixel luminance on the half-resolution lattice.
    BayerSuperPixel(CfaPattern),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleSpaceConfig {
    /// Scales per octave.
    pub s: usize,
    pub octaves: usize,
    /// Absolute sigma of level 0, in pixels of the octave.
    pub base_sigma: f64,
    /// Blur assumed already present in the input, in pixels.
    pub assumed_blur: f64,
}

impl Default for ScaleSpaceConfig {
    fn default() -> Self {
        Self {
            s: 3,
            octaves: 4,
            base_sigma: 1.6,
            assumed_blur: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Octave {
    /// `s + 3` Gaussian levels.
    pub gaussians: Vec<PlanarImage>,
    /// `s + 2` DoG levels, `dogs[i] = gaussians[i + 1] − gaussians[i]`.
    pub dogs: Vec<PlanarImage>,
}

impl Octave {
    pub fn width(&self) -> usize {
        self.gaussians[0].width()
    }

    pub fn height(&self) -> usize {
        self.gaussians[0].height()
    }
}

#[derive(Clone, Debug)]
pub struct ScaleSpace {
    pub domain: ScaleDomain,
    pub config: ScaleSpaceConfig,
    pub octaves: Vec<Octave>,
}

impl ScaleSpace {
    /// `2^(1/s)`.
    pub fn level_factor(&self) -> f64 {
        2f64.powf(1.0 / self.config.s as f64)
    }

    /// Absolute sigma of `level` in pixels of its own octave.
    pub fn level_sigma(&self, level: f64) -> f64 {
        self.config.base_sigma * self.level_factor().powf(level)
    }

    /// Input pixels per sample of octave 0.
    pub fn unit(&self) -> f64 {
        match self.domain {
            ScaleDomain::Gray => 1.0,
            ScaleDomain::BayerSuperPixel(_) => 2.0,
        }
    }

    /// Converts a sigma in pixels of `octave` to input pixels.
    pub fn to_input_scale(&self, octave: usize, sigma: f64) -> f64 {
        sigma * (1usize << octave) as f64 * self.unit()
    }

    /// Maps octave-local pixel coordinates back to the input image.
    pub fn to_input_coords(&self, octave: usize, x: f64, y: f64) -> (f64, f64) {
        let k = (1usize << octave) as f64;
        match self.domain {
            // every second sample keeps sample 0 in place
            ScaleDomain::Gray => (k * x, k * y),
            // bilinear halving with pixel-center alignment, then the
            // super-pixel center at (2x + 0.5, 2y + 0.5)
            ScaleDomain::BayerSuperPixel(_) => {
                let off = (k - 1.0) / 2.0;
                (2.0 * (k * x + off) + 0.5, 2.0 * (k * y + off) + 0.5)
            }
        }
    }

    pub fn dog_count(&self) -> usize {
        self.config.s + 2
    }
}

fn validate(cfg: &ScaleSpaceConfig, w: usize, h: usize) -> Result<()> {
    if cfg.s == 0 || cfg.octaves == 0 {
        return Err(Error::invalid("scale space needs s ≥ 1 and at least one octave"));
    }
    if !(cfg.base_sigma > cfg.assumed_blur && cfg.assumed_blur >= 0.0) {
        return Err(Error::invalid("base sigma must exceed the assumed input blur"));
    }
    let shrink = 1usize << (cfg.octaves - 1);
    if w.min(h) / shrink < 8 {
        return Err(Error::invalid(format!(
            "{w}×{h} is too small for {} octaves",
            cfg.octaves
        )));
    }
    Ok(())
}

fn ladder(
    first: PlanarImage,
    cfg: &ScaleSpaceConfig,
    sigma_unit: f64,
    blur_step: &dyn Fn(&PlanarImage, f64) -> Result<PlanarImage>,
) -> Result<Octave> {
    let l = 2f64.powf(1.0 / cfg.s as f64);
    let mut gaussians = Vec::with_capacity(cfg.s + 3);
    gaussians.push(first);
    for i in 1..cfg.s + 3 {
        let prev = cfg.base_sigma * l.powi(i as i32 - 1);
        let next = prev * l;
        let inc = (next * next - prev * prev).sqrt() / sigma_unit;
        let g = blur_step(&gaussians[i - 1], inc)?;
        gaussians.push(g);
    }
    let dogs = gaussians
        .windows(2)
        .map(|p| p[1].zip_map(&p[0], |a, b| a - b))
        .collect::<Result<Vec<_>>>()?;
    Ok(Octave { gaussians, dogs })
}

/// Gaussian/DoG pyramid of a single-channel image.
pub fn build_gray_scale_space(img: &PlanarImage, cfg: &ScaleSpaceConfig) -> Result<ScaleSpace> {
    img.expect_channels(1)?;
    validate(cfg, img.width(), img.height())?;
    let step = |g: &PlanarImage, sigma: f64| Ok(blur(g, &GaussianKernel::for_sigma(sigma)?));
    let init = (cfg.base_sigma.powi(2) - cfg.assumed_blur.powi(2)).sqrt();
    let mut base = step(img, init)?;
    let mut octaves = Vec::with_capacity(cfg.octaves);
    for o in 0..cfg.octaves {
        let oct = ladder(base, cfg, 1.0, &step)?;
        if o + 1 < cfg.octaves {
            let src = &oct.gaussians[cfg.s];
            let (w, h) = (src.width().div_ceil(2), src.height().div_ceil(2));
            base = PlanarImage::from_fn(w, h, |x, y| src.get(2 * x, 2 * y, 0));
        } else {
            base = PlanarImage::zeros(1, 1, 1);
        }
        octaves.push(oct);
    }
    Ok(ScaleSpace {
        domain: ScaleDomain::Gray,
        config: *cfg,
        octaves,
    })
}

/// BT.601 luminance of each 2×2 super-pixel, on the half-resolution
/// lattice. The two green samples share the green weight.
pub fn superpixel_luma(img: &BayerImage) -> Result<PlanarImage> {
    let view = superpixel_view(img)?;
    let [wr, wg, wb] = GRAY_WEIGHTS;
    let [r, g1, g2, b] = view.planes();
    let (r, g1, g2, b) = (r.samples(), g1.samples(), g2.samples(), b.samples());
    let data = (0..r.len())
        .map(|i| wr * r[i] + 0.5 * wg * (g1[i] + g2[i]) + wb * b[i])
        .collect();
    Ok(PlanarImage::from_raw(view.sp_width(), view.sp_height(), 1, data))
}

/// Pyramid over a mosaic, built on the super-pixel lattice: levels hold
/// [`superpixel_luma`] at half resolution and sigmas are in lattice units.
/// Octaves are halved with the super-pixel bilinear resize.
pub fn build_bayer_scale_space(img: &BayerImage, cfg: &ScaleSpaceConfig) -> Result<ScaleSpace> {
    let luma = superpixel_luma(img)?;
    validate(cfg, luma.width(), luma.height())?;
    let step = |g: &PlanarImage, sigma: f64| Ok(blur(g, &GaussianKernel::for_sigma(sigma)?));
    let init = (cfg.base_sigma.powi(2) - cfg.assumed_blur.powi(2)).sqrt();
    let mut base = step(&luma, init)?;
    let mut octaves = Vec::with_capacity(cfg.octaves);
    for o in 0..cfg.octaves {
        let oct = ladder(base, cfg, 1.0, &step)?;
        if o + 1 < cfg.octaves {
            base = resize(&oct.gaussians[cfg.s], 0.5)?;
        } else {
            base = PlanarImage::zeros(1, 1, 1);
        }
        octaves.push(oct);
    }
    Ok(ScaleSpace {
        domain: ScaleDomain::BayerSuperPixel(img.pattern()),
        config: *cfg,
        octaves,
    })
}

pub enum ScaleInput<'a> {
    Gray(&'a PlanarImage),
    Bayer(&'a BayerImage),
}

pub fn build_scale_space(input: ScaleInput<'_>, cfg: &ScaleSpaceConfig) -> Result<ScaleSpace> {
    match input {
        ScaleInput::Gray(g) => build_gray_scale_space(g, cfg),
        ScaleInput::Bayer(b) => build_bayer_scale_space(b, cfg),
    }
}
