//! Keypoint tables and match drawings.

use super::{Keypoint, Match, SiftDescriptor};
use crate::error::Result;
use crate::raster::{CsvTable, PlanarImage};

pub fn keypoints_table(kps: &[Keypoint]) -> CsvTable {
    let mut t = CsvTable::new(["x", "y", "scale", "orientation", "response"]);
    for k in kps {
        t.push([
            format!("{:.4}", k.x),
            format!("{:.4}", k.y),
            format!("{:.4}", k.scale),
            format!("{:.3}", k.orientation),
            format!("{:.6}", k.response),
        ]);
    }
    t
}

fn to_rgb(img: &PlanarImage) -> Result<PlanarImage> {
    if img.channels() == 3 {
        return Ok(img.clone());
    }
    img.expect_channels(1)?;
    PlanarImage::from_planes(&[img.clone(), img.clone(), img.clone()])
}

fn draw_line(img: &mut PlanarImage, a: (f64, f64), b: (f64, f64), color: [f64; 3]) {
    let n = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for s in 0..=n {
        let t = s as f64 / n as f64;
        let x = (a.0 + t * (b.0 - a.0)).round();
        let y = (a.1 + t * (b.1 - a.1)).round();
        if x >= 0.0 && y >= 0.0 && (x as usize) < img.width() && (y as usize) < img.height() {
            for (c, v) in color.iter().enumerate() {
                img.set(x as usize, y as usize, c, *v);
            }
        }
    }
}

fn draw_circle(img: &mut PlanarImage, c: (f64, f64), r: f64, color: [f64; 3]) {
    let n = ((r * 8.0).ceil() as usize).max(8);
    let mut prev = (c.0 + r, c.1);
    for s in 1..=n {
        let a = s as f64 / n as f64 * std::f64::consts::TAU;
        let p = (c.0 + r * a.cos(), c.1 + r * a.sin());
        draw_line(img, prev, p, color);
        prev = p;
    }
}

/// Places both images side by side and joins matched keypoints with lines.
/// Circles show keypoint scale.
pub fn render_matches(
    img1: &PlanarImage,
    img2: &PlanarImage,
    d1: &[SiftDescriptor],
    d2: &[SiftDescriptor],
    matches: &[Match],
) -> Result<PlanarImage> {
    let (a, b) = (to_rgb(img1)?, to_rgb(img2)?);
    let w = a.width() + b.width();
    let h = a.height().max(b.height());
    let mut out = PlanarImage::from_rgb_fn(w, h, |x, y| {
        let pick = |img: &PlanarImage, x: usize| {
            if y < img.height() {
                [img.get(x, y, 0), img.get(x, y, 1), img.get(x, y, 2)]
            } else {
                [0.0; 3]
            }
        };
        if x < a.width() {
            pick(&a, x)
        } else {
            pick(&b, x - a.width())
        }
    });
    let off = a.width() as f64;
    for m in matches {
        let (k1, k2) = (&d1[m.i1].keypoint, &d2[m.i2].keypoint);
        draw_circle(&mut out, (k1.x, k1.y), k1.scale, [1.0, 1.0, 0.0]);
        draw_circle(&mut out, (k2.x + off, k2.y), k2.scale, [1.0, 1.0, 0.0]);
        draw_line(&mut out, (k1.x, k1.y), (k2.x + off, k2.y), [0.0, 1.0, 0.0]);
    }
    Ok(out)
}
