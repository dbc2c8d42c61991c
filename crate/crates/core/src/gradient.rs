//! First-order differential operators.
//!
//! The same code path serves gray images, single color channels and raw
//! mosaics: a mosaic is simply handed over as a [`PlaneRef`]. Both templates
//! have zero weight on the immediate horizontal (resp. vertical) neighbours of
//! the center column (resp. row) pair they subtract, so every difference is
//! taken between samples of the same CFA color.
//!
//! Borders use reflect-101 mirroring (`-1 → 1`), which keeps the CFA parity
//! of mirrored taps intact.

use crate::error::{Error, Result};
use crate::quality::gray_histogram;
use crate::raster::{PlanarImage, PlaneRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradientOperator {
    /// `[-1 0 1]` and its transpose.
    CentralDifference,
    /// `[-1 0 1; -2 0 2; -1 0 1]` and its transpose, unnormalized.
    Sobel,
}

impl std::str::FromStr for GradientOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "central" | "central-difference" | "cd" => Ok(Self::CentralDifference),
            "sobel" => Ok(Self::Sobel),
            other => Err(Error::invalid(format!("unknown gradient operator '{other}'"))),
        }
    }
}

/// Horizontal and vertical derivative rasters. `gy` is positive where
/// intensity grows downwards (row index increasing).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub gx: PlanarImage,
    pub gy: PlanarImage,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.gx.width()
    }

    pub fn height(&self) -> usize {
        self.gx.height()
    }

    pub fn from_parts(gx: PlanarImage, gy: PlanarImage) -> Result<Self> {
        gx.expect_channels(1)?;
        gx.same_shape(&gy)?;
        Ok(Self { gx, gy })
    }

    pub fn scaled(&self, k: f64) -> GradientField {
        GradientField {
            gx: self.gx.map(|v| v * k),
            gy: self.gy.map(|v| v * k),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<GradientField> {
        Ok(GradientField {
            gx: self.gx.crop(x0, y0, w, h)?,
            gy: self.gy.crop(x0, y0, w, h)?,
        })
    }
}

/// Reflect-101 index into `0..n` (`-1 → 1`, `n → n − 2`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

pub fn gradients(src: PlaneRef<'_>, op: GradientOperator) -> Result<GradientField> {
    let (w, h) = (src.width, src.height);
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let d = src.data;
    for y in 0..h {
        let ym = reflect(y as isize - 1, h);
        let yp = reflect(y as isize + 1, h);
        let (rm, r0, rp) = (&d[ym * w..][..w], &d[y * w..][..w], &d[yp * w..][..w]);
        for x in 0..w {
            let xm = reflect(x as isize - 1, w);
            let xp = reflect(x as isize + 1, w);
            let i = y * w + x;
            match op {
                GradientOperator::CentralDifference => {
                    gx[i] = r0[xp] - r0[xm];
                    gy[i] = rp[x] - rm[x];
                }
                GradientOperator::Sobel => {
                    gx[i] = (rm[xp] + 2.0 * r0[xp] + rp[xp]) - (rm[xm] + 2.0 * r0[xm] + rp[xm]);
                    gy[i] = (rp[xm] + 2.0 * rp[x] + rp[xp]) - (rm[xm] + 2.0 * rm[x] + rm[xp]);
                }
            }
        }
    }
    Ok(GradientField {
        gx: PlanarImage::from_raw(w, h, 1, gx),
        gy: PlanarImage::from_raw(w, h, 1, gy),
    })
}

/// `sqrt(gx² + gy²)` per pixel.
pub fn magnitude(f: &GradientField) -> PlanarImage {
    f.gx
        .zip_map(&f.gy, f64::hypot)
        .expect("gradient components share a shape")
}

/// Orientation in degrees: `[0, 360)` when `signed`, folded to `[0, 180)`
/// otherwise.
pub fn orientation(f: &GradientField, signed: bool) -> PlanarImage {
    f.gx
        .zip_map(&f.gy, |gx, gy| orientation_deg(gx, gy, signed))
        .expect("gradient components share a shape")
}

#[inline]
pub fn orientation_deg(gx: f64, gy: f64, signed: bool) -> f64 {
    let mut a = gy.atan2(gx).to_degrees();
    if a < 0.0 {
        a += 360.0;
    }
    let period = if signed { 360.0 } else { 180.0 };
    let a = a % period;
    // -0.0 and rounding right below the period both fold to 0
    if a >= period || a == 0.0 {
        0.0
    } else {
        a
    }
}

/// How a 3-channel image is reduced before differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorGradientMode {
    /// Differentiate the BT.601 gray conversion.
    Gray,
    /// Differentiate one channel.
    Channel(usize),
    /// Per pixel, keep the channel gradient with the largest magnitude.
    MaxChannel,
}

pub fn color_gradients(
    img: &PlanarImage,
    op: GradientOperator,
    mode: ColorGradientMode,
) -> Result<GradientField> {
    match mode {
        ColorGradientMode::Gray => {
            if img.channels() == 1 {
                return gradients(img.view(0), op);
            }
            let gray = crate::raster::rgb_to_gray(img)?;
            gradients(gray.view(0), op)
        }
        ColorGradientMode::Channel(c) => {
            if c >= img.channels() {
                return Err(Error::invalid(format!("channel {c} out of range")));
            }
            gradients(img.view(c), op)
        }
        ColorGradientMode::MaxChannel => {
            let fields = (0..img.channels())
                .map(|c| gradients(img.view(c), op))
                .collect::<Result<Vec<_>>>()?;
            let (w, h) = (img.width(), img.height());
            let mut gx = vec![0.0; w * h];
            let mut gy = vec![0.0; w * h];
            for i in 0..w * h {
                let best = fields
                    .iter()
                    .max_by(|a, b| {
                        let ma = a.gx.samples()[i].hypot(a.gy.samples()[i]);
                        let mb = b.gx.samples()[i].hypot(b.gy.samples()[i]);
                        ma.total_cmp(&mb)
                    })
                    .expect("at least one channel");
                gx[i] = best.gx.samples()[i];
                gy[i] = best.gy.samples()[i];
            }
            Ok(GradientField {
                gx: PlanarImage::from_raw(w, h, 1, gx),
                gy: PlanarImage::from_raw(w, h, 1, gy),
            })
        }
    }
}

/// Difference images and their gradient magnitudes for a color image.
#[derive(Clone, Debug)]
pub struct DifferenceDiagnostics {
    /// `G − R`
    pub diff_gr: PlanarImage,
    /// `G − B`
    pub diff_gb: PlanarImage,
    /// Central-difference magnitude of `G − R`.
    pub grad_gr: PlanarImage,
    /// Central-difference magnitude of `G − B`.
    pub grad_gb: PlanarImage,
    pub hist_diff_gr: Vec<u64>,
    pub hist_diff_gb: Vec<u64>,
    pub hist_grad_gr: Vec<u64>,
    pub hist_grad_gb: Vec<u64>,
}

pub fn channel_difference_diagnostics(img: &PlanarImage) -> Result<DifferenceDiagnostics> {
    img.expect_channels(3)?;
    let g = img.channel_image(1);
    let diff_gr = g.zip_map(&img.channel_image(0), |g, r| g - r)?;
    let diff_gb = g.zip_map(&img.channel_image(2), |g, b| g - b)?;
    let grad_gr = magnitude(&gradients(diff_gr.view(0), GradientOperator::CentralDifference)?);
    let grad_gb = magnitude(&gradients(diff_gb.view(0), GradientOperator::CentralDifference)?);
    Ok(DifferenceDiagnostics {
        hist_diff_gr: gray_histogram(&diff_gr, 256),
        hist_diff_gb: gray_histogram(&diff_gb, 256),
        hist_grad_gr: gray_histogram(&grad_gr, 256),
        hist_grad_gb: gray_histogram(&grad_gb, 256),
        diff_gr,
        diff_gb,
        grad_gr,
        grad_gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{make_fig5_scene, mosaic, rgb_to_gray, CfaPattern, Fig5Case};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_plane(w: usize, h: usize, seed: u64) -> PlanarImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        PlanarImage::from_fn(w, h, |_, _| rng.random())
    }

    #[test]
    fn reflect_101() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(3, 5), 3);
    }

    #[test]
    fn constant_image_has_zero_gradient_everywhere() {
        let img = PlanarImage::filled(6, 5, &[0.37]);
        for op in [GradientOperator::CentralDifference, GradientOperator::Sobel] {
            let f = gradients(img.view(0), op).unwrap();
            assert!(f.gx.samples().iter().chain(f.gy.samples()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn column_ramp() {
        let step = 1.0 / 255.0;
        let img = PlanarImage::from_fn(8, 6, |x, _| x as f64 * step);
        let f = gradients(img.view(0), GradientOperator::CentralDifference).unwrap();
        for y in 0..6 {
            for x in 1..7 {
                assert!((f.gx.get(x, y, 0) - 2.0 * step).abs() < 1e-15);
                assert_eq!(f.gy.get(x, y, 0), 0.0);
            }
        }
    }

    #[test]
    fn too_small_is_rejected() {
        let img = PlanarImage::zeros(2, 5, 1);
        assert!(matches!(
            gradients(img.view(0), GradientOperator::Sobel),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn sobel_matches_direct_template_evaluation() {
        let img = random_plane(5, 5, 42);
        let f = gradients(img.view(0), GradientOperator::Sobel).unwrap();
        let i = |x: usize, y: usize| img.get(x, y, 0);
        for y in 1..4 {
            for x in 1..4 {
                let gx = i(x + 1, y - 1) + 2.0 * i(x + 1, y) + i(x + 1, y + 1)
                    - i(x - 1, y - 1)
                    - 2.0 * i(x - 1, y)
                    - i(x - 1, y + 1);
                let gy = i(x - 1, y + 1) + 2.0 * i(x, y + 1) + i(x + 1, y + 1)
                    - i(x - 1, y - 1)
                    - 2.0 * i(x, y - 1)
                    - i(x + 1, y - 1);
                assert!((f.gx.get(x, y, 0) - gx).abs() < 1e-14);
                assert!((f.gy.get(x, y, 0) - gy).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn central_taps_on_a_mosaic_stay_on_one_color() {
        // Only one channel is nonzero: gradients at sites of the other colors
        // that share neither row nor column parity with it must vanish.
        let img = PlanarImage::from_rgb_fn(8, 8, |x, y| [0.0, 0.0, ((x * 7 + y * 3) % 5) as f64 / 5.0]);
        let b = mosaic(&img, CfaPattern::Rggb).unwrap();
        let f = gradients(b.view(), GradientOperator::CentralDifference).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                if y % 2 == 0 {
                    // R/G rows: horizontal neighbours are R or G, never B
                    assert_eq!(f.gx.get(x, y, 0), 0.0);
                }
                if x % 2 == 0 {
                    assert_eq!(f.gy.get(x, y, 0), 0.0);
                }
            }
        }
    }

    #[test]
    fn gray_equal_mosaic_matches_gray_bit_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let img = PlanarImage::from_rgb_fn(10, 8, |_, _| {
            let v: f64 = rng.random();
            [v, v, v]
        });
        let b = mosaic(&img, CfaPattern::Bggr).unwrap();
        let gray = img.channel_image(1);
        for op in [GradientOperator::CentralDifference, GradientOperator::Sobel] {
            let fb = gradients(b.view(), op).unwrap();
            let fg = gradients(gray.view(0), op).unwrap();
            assert_eq!(magnitude(&fb), magnitude(&fg));
        }
    }

    #[test]
    fn magnitude_examples() {
        let gx = PlanarImage::filled(1, 1, &[3.0 / 255.0]);
        let gy = PlanarImage::filled(1, 1, &[4.0 / 255.0]);
        let m = magnitude(&GradientField::from_parts(gx, gy).unwrap());
        assert!((m.samples()[0] - 5.0 / 255.0).abs() < 1e-16);
        let z = PlanarImage::zeros(2, 2, 1);
        let f = GradientField::from_parts(z.clone(), z).unwrap();
        assert!(magnitude(&f).samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn magnitude_matches_elementwise_oracle() {
        let gx = random_plane(6, 4, 1).map(|v| v - 0.5);
        let gy = random_plane(6, 4, 2).map(|v| v - 0.5);
        let m = magnitude(&GradientField::from_parts(gx.clone(), gy.clone()).unwrap());
        for i in 0..24 {
            let (a, b) = (gx.samples()[i], gy.samples()[i]);
            assert!((m.samples()[i] - (a * a + b * b).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn orientation_examples() {
        assert_eq!(orientation_deg(1.0, 0.0, true), 0.0);
        assert!((orientation_deg(0.0, 1.0, true) - 90.0).abs() < 1e-12);
        let a190 = 190f64.to_radians();
        assert!((orientation_deg(a190.cos(), a190.sin(), false) - 10.0).abs() < 1e-9);
        assert!((orientation_deg(a190.cos(), a190.sin(), true) - 190.0).abs() < 1e-9);
        assert_eq!(orientation_deg(-1.0, 0.0, false), 0.0);
        assert_eq!(orientation_deg(-1.0, -0.0, false), 0.0);
    }

    #[test]
    fn max_channel_picks_strongest() {
        let img = PlanarImage::from_rgb_fn(5, 5, |x, _| [0.0, x as f64 * 0.1, 0.05 * x as f64]);
        let f = color_gradients(
            &img,
            GradientOperator::CentralDifference,
            ColorGradientMode::MaxChannel,
        )
        .unwrap();
        assert!((f.gx.get(2, 2, 0) - 0.2).abs() < 1e-12);
        let g = color_gradients(&img, GradientOperator::CentralDifference, ColorGradientMode::Gray)
            .unwrap();
        let gray = rgb_to_gray(&img).unwrap();
        assert_eq!(
            g,
            gradients(gray.view(0), GradientOperator::CentralDifference).unwrap()
        );
    }

    #[test]
    fn fig5_difference_gradients() {
        for case in Fig5Case::ALL {
            let d = channel_difference_diagnostics(&case.scene(32).unwrap()).unwrap();
            let max_gr = d.grad_gr.min_max().1;
            let max_gb = d.grad_gb.min_max().1;
            match case {
                Fig5Case::SignFlip => {
                    let d = channel_difference_diagnostics(&case.scene(32).unwrap()).unwrap();
                    assert!((d.grad_gr.get(8, 16, 0) - 1.0).abs() < 1e-12);
                    assert!((d.grad_gb.get(16, 8, 0) - 1.0).abs() < 1e-12);
                    assert!(max_gr <= 2f64.sqrt() + 1e-12 && max_gb <= 2f64.sqrt() + 1e-12);
                }
                Fig5Case::SameSignDifference => {
                    // small but nonzero: |(0.45 - 0.8) - (0.22 - 0.6)| = 0.03,
                    // reaching 0.03·√2 at the square's corners
                    let d = channel_difference_diagnostics(&case.scene(32).unwrap()).unwrap();
                    assert!((d.grad_gb.get(8, 16, 0) - 0.03).abs() < 1e-12);
                    assert!((d.grad_gr.get(8, 16, 0) - 0.03).abs() < 1e-12);
                    assert!(max_gr <= 0.03 * 2f64.sqrt() + 1e-12);
                    assert!(max_gb <= 0.03 * 2f64.sqrt() + 1e-12);
                }
                _ => {
                    assert!(max_gr <= 1e-12 && max_gb <= 1e-12, "{case:?}");
                }
            }
        }
        let d = channel_difference_diagnostics(
            &make_fig5_scene([0.2, 0.5, 0.2], [0.7, 1.0, 0.7], 16).unwrap(),
        )
        .unwrap();
        assert!(d.diff_gr.samples().iter().all(|&v| (v - 0.3).abs() < 1e-12));
        assert_eq!(d.hist_diff_gr.iter().sum::<u64>(), 256);
    }

    proptest! {
        #[test]
        fn homogeneity(seed in any::<u64>(), k in -4.0f64..4.0) {
            let img = random_plane(7, 6, seed);
            let scaled = img.map(|v| v * k);
            for op in [GradientOperator::CentralDifference, GradientOperator::Sobel] {
                let a = gradients(scaled.view(0), op).unwrap();
                let b = gradients(img.view(0), op).unwrap().scaled(k);
                for (u, v) in a.gx.samples().iter().zip(b.gx.samples()) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
                for (u, v) in a.gy.samples().iter().zip(b.gy.samples()) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn horizontal_flip_negates_gx(seed in any::<u64>()) {
            let (w, h) = (7, 5);
            let img = random_plane(w, h, seed);
            let flipped = PlanarImage::from_fn(w, h, |x, y| img.get(w - 1 - x, y, 0));
            for op in [GradientOperator::CentralDifference, GradientOperator::Sobel] {
                let a = gradients(img.view(0), op).unwrap();
                let b = gradients(flipped.view(0), op).unwrap();
                for y in 0..h {
                    for x in 0..w {
                        prop_assert!((b.gx.get(x, y, 0) + a.gx.get(w - 1 - x, y, 0)).abs() < 1e-12);
                        prop_assert!((b.gy.get(x, y, 0) - a.gy.get(w - 1 - x, y, 0)).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
