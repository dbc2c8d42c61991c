//! Reference demosaicing interpolators.
//!
//! Every method keeps the sampled channel untouched at each CFA site and
//! clamps the interpolated ones to `[0, 1]`. Borders are mirrored with
//! reflect-101, which preserves CFA parity of every tap.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradient::{gradients, magnitude, reflect, GradientOperator};
use crate::quality::{gmsd, mssim, psnr_per_channel};
use crate::raster::{mosaic, rgb_to_gray, BayerImage, CfaPattern, Channel, PlanarImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DemosaicMethod {
    /// Each 2×2 tile replicates its own R, G and B samples.
    NearestNeighbor,
    Bilinear,
    /// Catmull–Rom cubic along the lattice of each channel.
    Bicubic,
    /// Hamilton–Adams: gradient-directed G, then R/B from color differences.
    AdaptiveColorPlane,
    /// Malvar–He–Cutler gradient-corrected 5×5 linear filters.
    Hybrid,
}

impl DemosaicMethod {
    pub const ALL: [DemosaicMethod; 5] = [
        DemosaicMethod::NearestNeighbor,
        DemosaicMethod::Bilinear,
        DemosaicMethod::Bicubic,
        DemosaicMethod::AdaptiveColorPlane,
        DemosaicMethod::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemosaicMethod::NearestNeighbor => "nearest",
            DemosaicMethod::Bilinear => "bilinear",
            DemosaicMethod::Bicubic => "bicubic",
            DemosaicMethod::AdaptiveColorPlane => "acpi",
            DemosaicMethod::Hybrid => "malvar",
        }
    }
}

impl std::fmt::Display for DemosaicMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DemosaicMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" | "nn" | "nearest-neighbor" => Ok(Self::NearestNeighbor),
            "bilinear" | "linear" => Ok(Self::Bilinear),
            "bicubic" | "cubic" => Ok(Self::Bicubic),
            "acpi" | "adaptive" | "hamilton-adams" | "ha" => Ok(Self::AdaptiveColorPlane),
            "malvar" | "hybrid" | "mhc" => Ok(Self::Hybrid),
            other => Err(Error::invalid(format!("unknown demosaic method '{other}'"))),
        }
    }
}

/// Sparse kernel taps `(dx, dy, weight)`.
type Taps = Vec<(isize, isize, f64)>;

/// Kernels for the three interpolation situations. The "horizontal" case is
/// a G site whose left/right neighbours carry the wanted color; the vertical
/// case uses its transpose.
struct KernelSet {
    g_at_rb: Taps,
    rb_at_g_horizontal: Taps,
    rb_at_opposite: Taps,
}

fn transpose(t: &Taps) -> Taps {
    t.iter().map(|&(dx, dy, w)| (dy, dx, w)).collect()
}

fn scaled(t: &[(isize, isize, f64)], k: f64) -> Taps {
    t.iter().map(|&(dx, dy, w)| (dx, dy, w * k)).collect()
}

fn bilinear_kernels() -> KernelSet {
    KernelSet {
        g_at_rb: scaled(&[(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0)], 0.25),
        rb_at_g_horizontal: scaled(&[(-1, 0, 1.0), (1, 0, 1.0)], 0.5),
        rb_at_opposite: scaled(&[(-1, -1, 1.0), (1, -1, 1.0), (-1, 1, 1.0), (1, 1, 1.0)], 0.25),
    }
}

const CATMULL_ROM_HALF: [(isize, f64); 4] = [(-3, -1.0 / 16.0), (-1, 9.0 / 16.0), (1, 9.0 / 16.0), (3, -1.0 / 16.0)];

fn bicubic_kernels() -> KernelSet {
    let row: Taps = CATMULL_ROM_HALF.iter().map(|&(d, w)| (d, 0, w)).collect();
    let mut g = scaled(&row, 0.5);
    g.extend(scaled(&transpose(&row), 0.5));
    let mut diag = Vec::new();
    for &(dx, wx) in &CATMULL_ROM_HALF {
        for &(dy, wy) in &CATMULL_ROM_HALF {
            diag.push((dx, dy, wx * wy));
        }
    }
    KernelSet {
        g_at_rb: g,
        rb_at_g_horizontal: row,
        rb_at_opposite: diag,
    }
}

fn malvar_kernels() -> KernelSet {
    let g = [
        (0, -2, -1.0),
        (0, -1, 2.0),
        (-2, 0, -1.0),
        (-1, 0, 2.0),
        (0, 0, 4.0),
        (1, 0, 2.0),
        (2, 0, -1.0),
        (0, 1, 2.0),
        (0, 2, -1.0),
    ];
    let horizontal = [
        (0, -2, 0.5),
        (-1, -1, -1.0),
        (1, -1, -1.0),
        (-2, 0, -1.0),
        (-1, 0, 4.0),
        (0, 0, 5.0),
        (1, 0, 4.0),
        (2, 0, -1.0),
        (-1, 1, -1.0),
        (1, 1, -1.0),
        (0, 2, 0.5),
    ];
    let opposite = [
        (0, -2, -1.5),
        (-1, -1, 2.0),
        (1, -1, 2.0),
        (-2, 0, -1.5),
        (0, 0, 6.0),
        (2, 0, -1.5),
        (-1, 1, 2.0),
        (1, 1, 2.0),
        (0, 2, -1.5),
    ];
    KernelSet {
        g_at_rb: scaled(&g, 0.125),
        rb_at_g_horizontal: scaled(&horizontal, 0.125),
        rb_at_opposite: scaled(&opposite, 0.125),
    }
}

/// Read-only mosaic accessor with reflect-101 borders.
struct Mosaic<'a> {
    w: usize,
    h: usize,
    pattern: CfaPattern,
    data: &'a [f64],
}

impl Mosaic<'_> {
    #[inline]
    fn at(&self, x: usize, y: usize, dx: isize, dy: isize) -> f64 {
        let xx = reflect(x as isize + dx, self.w);
        let yy = reflect(y as isize + dy, self.h);
        self.data[yy * self.w + xx]
    }

    #[inline]
    fn channel(&self, x: usize, y: usize) -> Channel {
        self.pattern.channel_at(y, x)
    }

    fn apply(&self, taps: &Taps, x: usize, y: usize) -> f64 {
        taps.iter().map(|&(dx, dy, w)| w * self.at(x, y, dx, dy)).sum()
    }
}

fn check_input(img: &BayerImage) -> Result<()> {
    img.require_even()?;
    if img.width() < 4 || img.height() < 4 {
        return Err(Error::TooSmall {
            width: img.width(),
            height: img.height(),
            min: 4,
        });
    }
    Ok(())
}

/// Reconstructs a 3-channel image from a mosaic.
pub fn demosaic(img: &BayerImage, method: DemosaicMethod) -> Result<PlanarImage> {
    check_input(img)?;
    let m = Mosaic {
        w: img.width(),
        h: img.height(),
        pattern: img.pattern(),
        data: img.samples(),
    };
    Ok(match method {
        DemosaicMethod::NearestNeighbor => nearest(&m),
        DemosaicMethod::Bilinear => by_kernels(&m, &bilinear_kernels()),
        DemosaicMethod::Bicubic => by_kernels(&m, &bicubic_kernels()),
        DemosaicMethod::Hybrid => by_kernels(&m, &malvar_kernels()),
        DemosaicMethod::AdaptiveColorPlane => hamilton_adams(&m),
    })
}

fn fill_planes(m: &Mosaic<'_>, f: impl Fn(usize, usize, usize) -> f64 + Sync) -> PlanarImage {
    let (w, h) = (m.w, m.h);
    let mut data = vec![0.0; 3 * w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
        let (c, y) = (row / h, row % h);
        for (x, o) in out.iter_mut().enumerate() {
            *o = f(x, y, c);
        }
    });
    PlanarImage::from_raw(w, h, 3, data)
}

fn nearest(m: &Mosaic<'_>) -> PlanarImage {
    fill_planes(m, |x, y, c| {
        if m.channel(x, y).index() == c {
            return m.at(x, y, 0, 0);
        }
        let (tx, ty) = (x & !1, y & !1);
        if c == Channel::Green.index() {
            // the green sharing this row inside the tile
            let other = if x == tx { tx + 1 } else { tx };
            m.data[y * m.w + other]
        } else {
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                if m.channel(tx + dx, ty + dy).index() == c {
                    return m.data[(ty + dy) * m.w + tx + dx];
                }
            }
            unreachable!("every tile holds each color")
        }
    })
}

fn by_kernels(m: &Mosaic<'_>, k: &KernelSet) -> PlanarImage {
    let vertical = transpose(&k.rb_at_g_horizontal);
    fill_planes(m, |x, y, c| {
        let site = m.channel(x, y);
        if site.index() == c {
            return m.at(x, y, 0, 0);
        }
        let taps = if c == Channel::Green.index() {
            &k.g_at_rb
        } else if site == Channel::Green {
            let neighbour = m.pattern.channel_at(y, (x + 1) % 2);
            if neighbour.index() == c {
                &k.rb_at_g_horizontal
            } else {
                &vertical
            }
        } else {
            &k.rb_at_opposite
        };
        m.apply(taps, x, y).clamp(0.0, 1.0)
    })
}

fn hamilton_adams(m: &Mosaic<'_>) -> PlanarImage {
    let (w, h) = (m.w, m.h);
    // Pass 1: full-resolution green.
    let mut green = vec![0.0; w * h];
    green.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        for (x, o) in out.iter_mut().enumerate() {
            if m.channel(x, y) == Channel::Green {
                *o = m.at(x, y, 0, 0);
                continue;
            }
            let c = m.at(x, y, 0, 0);
            let (gl, gr) = (m.at(x, y, -1, 0), m.at(x, y, 1, 0));
            let (gu, gd) = (m.at(x, y, 0, -1), m.at(x, y, 0, 1));
            let lap_h = 2.0 * c - m.at(x, y, -2, 0) - m.at(x, y, 2, 0);
            let lap_v = 2.0 * c - m.at(x, y, 0, -2) - m.at(x, y, 0, 2);
            let dh = (gl - gr).abs() + lap_h.abs();
            let dv = (gu - gd).abs() + lap_v.abs();
            let eh = 0.5 * (gl + gr) + 0.25 * lap_h;
            let ev = 0.5 * (gu + gd) + 0.25 * lap_v;
            let g = if dh < dv {
                eh
            } else if dv < dh {
                ev
            } else {
                0.5 * (eh + ev)
            };
            *o = g.clamp(0.0, 1.0);
        }
    });
    let g = Mosaic {
        w,
        h,
        pattern: m.pattern,
        data: &green,
    };
    // Pass 2: red and blue from color differences against the green plane.
    fill_planes(m, |x, y, c| {
        let site = m.channel(x, y);
        if c == Channel::Green.index() {
            return green[y * w + x];
        }
        if site.index() == c {
            return m.at(x, y, 0, 0);
        }
        let g0 = g.at(x, y, 0, 0);
        let diff = |dx: isize, dy: isize| m.at(x, y, dx, dy) - g.at(x, y, dx, dy);
        let v = if site == Channel::Green {
            if m.pattern.channel_at(y, (x + 1) % 2).index() == c {
                g0 + 0.5 * (diff(-1, 0) + diff(1, 0))
            } else {
                g0 + 0.5 * (diff(0, -1) + diff(0, 1))
            }
        } else {
            let dn = (m.at(x, y, -1, -1) - m.at(x, y, 1, 1)).abs()
                + (2.0 * g0 - g.at(x, y, -1, -1) - g.at(x, y, 1, 1)).abs();
            let dp = (m.at(x, y, 1, -1) - m.at(x, y, -1, 1)).abs()
                + (2.0 * g0 - g.at(x, y, 1, -1) - g.at(x, y, -1, 1)).abs();
            let en = g0 + 0.5 * (diff(-1, -1) + diff(1, 1));
            let ep = g0 + 0.5 * (diff(1, -1) + diff(-1, 1));
            if dn < dp {
                en
            } else if dp < dn {
                ep
            } else {
                0.5 * (en + ep)
            }
        };
        v.clamp(0.0, 1.0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemosaicQuality {
    /// Mean SSIM averaged over the three channels.
    pub mssim: f64,
    /// 8-bit PSNR averaged over the three channels.
    pub psnr: f64,
    /// GMSD between central-difference magnitudes of the gray conversions.
    pub gmsd: f64,
}

/// Mosaics `truth` under `pattern`, demosaics it and scores the result.
pub fn demosaic_quality(
    truth: &PlanarImage,
    method: DemosaicMethod,
    pattern: CfaPattern,
) -> Result<DemosaicQuality> {
    truth.expect_channels(3)?;
    let recon = demosaic(&mosaic(truth, pattern)?, method)?;
    let g1 = rgb_to_gray(truth)?;
    let g2 = rgb_to_gray(&recon)?;
    let op = GradientOperator::CentralDifference;
    Ok(DemosaicQuality {
        mssim: mssim(truth, &recon)?,
        psnr: psnr_per_channel(truth, &recon, 8)?,
        gmsd: gmsd(
            &magnitude(&gradients(g1.view(0), op)?),
            &magnitude(&gradients(g2.view(0), op)?),
        )?,
    })
}
