//! Full-reference quality metrics: GMS/GMSM/GMSD, MSE/PSNR, SSIM.

use crate::error::{Error, Result};
use crate::raster::PlanarImage;

/// Stabilizing constant of the gradient magnitude similarity.
pub const GMS_C: f64 = 0.0026;

#[derive(Clone, Debug)]
pub struct GmsResult {
    pub gms_map: PlanarImage,
    /// Mean of the map.
    pub gmsm: f64,
    /// Population standard deviation of the map.
    pub gmsd: f64,
}

/// Gradient magnitude similarity between two magnitude maps.
pub fn gms(m1: &PlanarImage, m2: &PlanarImage, c: f64) -> Result<GmsResult> {
    m1.expect_channels(1)?;
    if !(c > 0.0) {
        return Err(Error::invalid("GMS constant must be positive"));
    }
    let gms_map = m1.zip_map(m2, |a, b| (2.0 * a * b + c) / (a * a + b * b + c))?;
    let (gmsm, gmsd) = mean_std(gms_map.samples());
    Ok(GmsResult {
        gms_map,
        gmsm,
        gmsd,
    })
}

/// Shorthand for `gms(m1, m2, GMS_C)?.gmsd`.
pub fn gmsd(m1: &PlanarImage, m2: &PlanarImage) -> Result<f64> {
    Ok(gms(m1, m2, GMS_C)?.gmsd)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn peak(bit_depth: u32) -> Result<f64> {
    if bit_depth == 0 || bit_depth > 32 {
        return Err(Error::invalid(format!("bit depth {bit_depth} out of range")));
    }
    Ok(2f64.powi(bit_depth as i32) - 1.0)
}

/// Mean squared error on the `2^n − 1` scale.
pub fn mse(i1: &PlanarImage, i2: &PlanarImage, bit_depth: u32) -> Result<f64> {
    i1.same_shape(i2)?;
    let p = peak(bit_depth)?;
    let sum: f64 = i1
        .samples()
        .iter()
        .zip(i2.samples())
        .map(|(a, b)| {
            let d = (a - b) * p;
            d * d
        })
        .sum();
    Ok(sum / i1.samples().len() as f64)
}

/// Peak signal-to-noise ratio in dB. Identical inputs give `f64::INFINITY`.
pub fn psnr(i1: &PlanarImage, i2: &PlanarImage, bit_depth: u32) -> Result<f64> {
    let e = mse(i1, i2, bit_depth)?;
    let p = peak(bit_depth)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (p * p / e).log10()
    })
}

/// PSNR computed per channel and averaged.
pub fn psnr_per_channel(i1: &PlanarImage, i2: &PlanarImage, bit_depth: u32) -> Result<f64> {
    i1.same_shape(i2)?;
    let mut acc = 0.0;
    for c in 0..i1.channels() {
        acc += psnr(&i1.channel_image(c), &i2.channel_image(c), bit_depth)?;
    }
    Ok(acc / i1.channels() as f64)
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Clone, Debug)]
pub struct SsimResult {
    /// SSIM over the positions where the window fits entirely inside the
    /// image, i.e. `(w − 10) × (h − 10)`.
    pub ssim_map: PlanarImage,
    pub mssim: f64,
}

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let taps: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable correlation over the valid region only.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &data[y * w..][..w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (j, kj) in k.iter().enumerate() {
            let src = &tmp[(y + j) * ow..][..ow];
            let dst = &mut out[y * ow..][..ow];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kj * s;
            }
        }
    }
    out
}

/// Windowed SSIM of two single-channel images with dynamic range 1.
pub fn ssim(i1: &PlanarImage, i2: &PlanarImage) -> Result<SsimResult> {
    i1.expect_channels(1)?;
    i1.same_shape(i2)?;
    let (w, h) = (i1.width(), i1.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    let k = ssim_window();
    let (a, b) = (i1.samples(), i2.samples());
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    };
    let mu1 = filter_valid(a, w, h, &k);
    let mu2 = filter_valid(b, w, h, &k);
    let s11 = filter_valid(&prod(&|x, _| x * x), w, h, &k);
    let s22 = filter_valid(&prod(&|_, y| y * y), w, h, &k);
    let s12 = filter_valid(&prod(&|x, y| x * y), w, h, &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let map: Vec<f64> = (0..mu1.len())
        .map(|i| {
            let (m1, m2) = (mu1[i], mu2[i]);
            let v1 = s11[i] - m1 * m1;
            let v2 = s22[i] - m2 * m2;
            let cov = s12[i] - m1 * m2;
            ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2)) / ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2))
        })
        .collect();
    let mssim = map.iter().sum::<f64>() / map.len() as f64;
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    Ok(SsimResult {
        ssim_map: PlanarImage::from_raw(ow, oh, 1, map),
        mssim,
    })
}

/// Mean SSIM, averaged over channels for color inputs.
pub fn mssim(i1: &PlanarImage, i2: &PlanarImage) -> Result<f64> {
    i1.same_shape(i2)?;
    if i1.channels() == 1 {
        return Ok(ssim(i1, i2)?.mssim);
    }
    let mut acc = 0.0;
    for c in 0..i1.channels() {
        acc += ssim(&i1.channel_image(c), &i2.channel_image(c))?.mssim;
    }
    Ok(acc / i1.channels() as f64)
}

/// Histogram over `[min, max]` of the image with `bins` equal-width bins.
/// A constant image puts everything in bin 0.
pub fn gray_histogram(img: &PlanarImage, bins: usize) -> Vec<u64> {
    let bins = bins.max(1);
    let mut counts = vec![0u64; bins];
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    for &v in img.samples() {
        let b = if span > 0.0 {
            (((v - lo) / span) * bins as f64) as usize
        } else {
            0
        };
        counts[b.min(bins - 1)] += 1;
    }
    counts
}
