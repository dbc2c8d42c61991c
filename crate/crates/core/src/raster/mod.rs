//! Raster types, CFA bookkeeping and the conversions between color, gray and
//! Bayer representations.
//!
//! All samples are `f64` intensities normalized to `[0, 1]`. A [`BayerImage`]
//! always holds exactly one sample per site; which color that sample belongs
//! to is decided by its [`CfaPattern`] and the site parity.

mod io;
mod scene;

pub use io::{
    load_bayer, load_image, load_planar, read_float_dump, save_bayer, save_csv, save_image,
    write_float_dump, CsvTable, LoadedImage, SaveOptions,
};
pub use scene::{make_fig5_scene, Fig5Case};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights (R, G, B).
pub const GRAY_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Color channel index into a 3-channel [`PlanarImage`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Red = 0,
    Green = 1,
    Blue = 2,
}

impl Channel {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// The four 2×2-periodic Bayer arrangements, named by their top-left tile
/// read in row-major order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CfaPattern {
    Rggb,
    Grbg,
    Gbrg,
    Bggr,
}

impl CfaPattern {
    pub const ALL: [CfaPattern; 4] = [
        CfaPattern::Rggb,
        CfaPattern::Grbg,
        CfaPattern::Gbrg,
        CfaPattern::Bggr,
    ];

    fn tile(self) -> [[Channel; 2]; 2] {
        use Channel::*;
        match self {
            CfaPattern::Rggb => [[Red, Green], [Green, Blue]],
            CfaPattern::Grbg => [[Green, Red], [Blue, Green]],
            CfaPattern::Gbrg => [[Green, Blue], [Red, Green]],
            CfaPattern::Bggr => [[Blue, Green], [Green, Red]],
        }
    }

    /// Channel sampled at `(row, col)`.
    #[inline]
    pub fn channel_at(self, row: usize, col: usize) -> Channel {
        self.tile()[row & 1][col & 1]
    }

    /// Tile offset `(row, col)` of a super-pixel plane.
    pub fn plane_offset(self, plane: SuperPixelPlane) -> (usize, usize) {
        let tile = self.tile();
        let find = |ch: Channel, skip_first: bool| {
            let mut seen = false;
            for r in 0..2 {
                for c in 0..2 {
                    if tile[r][c] == ch {
                        if skip_first && !seen {
                            seen = true;
                            continue;
                        }
                        return (r, c);
                    }
                }
            }
            unreachable!("every tile holds R, B and two G samples")
        };
        match plane {
            SuperPixelPlane::R => find(Channel::Red, false),
            SuperPixelPlane::G1 => find(Channel::Green, false),
            SuperPixelPlane::G2 => find(Channel::Green, true),
            SuperPixelPlane::B => find(Channel::Blue, false),
        }
    }

    /// Pattern seen after dropping `dr` rows and `dc` columns from the top-left.
    pub fn shifted(self, dr: usize, dc: usize) -> CfaPattern {
        let t = self.tile();
        let tl = [
            t[dr & 1][dc & 1],
            t[dr & 1][(dc + 1) & 1],
            t[(dr + 1) & 1][dc & 1],
        ];
        *CfaPattern::ALL
            .iter()
            .find(|p| {
                let q = p.tile();
                q[0][0] == tl[0] && q[0][1] == tl[1] && q[1][0] == tl[2]
            })
            .expect("shifted tile is a valid Bayer arrangement")
    }

    pub fn name(self) -> &'static str {
        match self {
            CfaPattern::Rggb => "rggb",
            CfaPattern::Grbg => "grbg",
            CfaPattern::Gbrg => "gbrg",
            CfaPattern::Bggr => "bggr",
        }
    }
}

impl fmt::Display for CfaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CfaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rggb" => Ok(CfaPattern::Rggb),
            "grbg" => Ok(CfaPattern::Grbg),
            "gbrg" => Ok(CfaPattern::Gbrg),
            "bggr" => Ok(CfaPattern::Bggr),
            other => Err(Error::invalid(format!("unknown CFA pattern '{other}'"))),
        }
    }
}

/// One of the four co-registered planes of a super-pixel view. `G1` is the
/// green sample that comes first in row-major order inside the tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SuperPixelPlane {
    R,
    G1,
    G2,
    B,
}

impl SuperPixelPlane {
    pub const ALL: [SuperPixelPlane; 4] = [
        SuperPixelPlane::R,
        SuperPixelPlane::G1,
        SuperPixelPlane::G2,
        SuperPixelPlane::B,
    ];

    pub fn channel(self) -> Channel {
        match self {
            SuperPixelPlane::R => Channel::Red,
            SuperPixelPlane::G1 | SuperPixelPlane::G2 => Channel::Green,
            SuperPixelPlane::B => Channel::Blue,
        }
    }
}

/// Borrowed single-channel raster. This is the common input of the gradient
/// operators: a gray image and a Bayer mosaic look the same through it.
#[derive(Clone, Copy, Debug)]
pub struct PlaneRef<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [f64],
}

impl<'a> PlaneRef<'a> {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// One- or three-channel float raster, channel-planar and row-major.
///
/// Values are normally in `[0, 1]`; difference images and gradient
/// components may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PlanarImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::ChannelCount {
                expected: 3,
                actual: channels,
            });
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::SampleOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, value: &[f64]) -> Self {
        let mut img = Self::zeros(width, height, value.len());
        for (c, &v) in value.iter().enumerate() {
            img.plane_mut(c).fill(v);
        }
        img
    }

    /// Single-channel image from a per-pixel function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    /// Three-channel image from a per-pixel function returning `[r, g, b]`.
    pub fn from_rgb_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let n = width * height;
        let mut data = vec![0.0; 3 * n];
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for c in 0..3 {
                    data[c * n + y * width + x] = px[c];
                }
            }
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    /// Stacks single-channel planes of equal size into one image.
    pub fn from_planes(planes: &[PlanarImage]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::invalid("no planes"))?;
        let (w, h) = (first.width, first.height);
        let mut data = Vec::with_capacity(w * h * planes.len());
        for p in planes {
            p.expect_channels(1)?;
            if p.width != w || p.height != h {
                return Err(Error::DimensionMismatch(w, h, p.width, p.height));
            }
            data.extend_from_slice(&p.data);
        }
        Self::new(w, h, planes.len(), data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Copy of channel `c` as a single-channel image.
    pub fn channel_image(&self, c: usize) -> PlanarImage {
        PlanarImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    pub fn view(&self, c: usize) -> PlaneRef<'_> {
        PlaneRef {
            width: self.width,
            height: self.height,
            data: self.plane(c),
        }
    }

    /// Single-channel view; errors for 3-channel images.
    pub fn as_plane(&self) -> Result<PlaneRef<'_>> {
        self.expect_channels(1)?;
        Ok(self.view(0))
    }

    pub fn expect_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelCount {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &PlanarImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        if self.channels != other.channels {
            return Err(Error::ChannelCount {
                expected: self.channels,
                actual: other.channels,
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PlanarImage {
        PlanarImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &PlanarImage, f: impl Fn(f64, f64) -> f64) -> Result<PlanarImage> {
        self.same_shape(other)?;
        Ok(PlanarImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Rectangular crop; `(x0, y0)` is the top-left corner.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<PlanarImage> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut out = PlanarImage::zeros(w, h, self.channels);
        for c in 0..self.channels {
            for y in 0..h {
                let src = &self.plane(c)[(y0 + y) * self.width + x0..][..w];
                out.plane_mut(c)[y * w..(y + 1) * w].copy_from_slice(src);
            }
        }
        Ok(out)
    }

    /// Drops a trailing row/column so both dimensions are even.
    pub fn crop_even(&self) -> PlanarImage {
        let (w, h) = (self.width & !1, self.height & !1);
        if w == self.width && h == self.height {
            return self.clone();
        }
        self.crop(0, 0, w, h).expect("even crop lies inside the image")
    }

    pub fn clamp01(&self) -> PlanarImage {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }
}

/// Single-channel CFA mosaic with normalized samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BayerImage {
    width: usize,
    height: usize,
    pattern: CfaPattern,
    data: Vec<f64>,
}

impl BayerImage {
    pub fn new(width: usize, height: usize, pattern: CfaPattern, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::SampleOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            pattern,
            data,
        })
    }

    pub(crate) fn from_raw(width: usize, height: usize, pattern: CfaPattern, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            pattern,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pattern(&self) -> CfaPattern {
        self.pattern
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn view(&self) -> PlaneRef<'_> {
        PlaneRef {
            width: self.width,
            height: self.height,
            data: &self.data,
        }
    }

    /// The mosaic as an ordinary single-channel raster.
    pub fn to_planar(&self) -> PlanarImage {
        PlanarImage::from_raw(self.width, self.height, 1, self.data.clone())
    }

    pub fn has_even_dims(&self) -> bool {
        self.width % 2 == 0 && self.height % 2 == 0
    }

    pub(crate) fn require_even(&self) -> Result<()> {
        require_even(self.width, self.height)
    }

    /// Color rendering of the mosaic: each sample placed in its own channel,
    /// the two missing channels left at zero.
    pub fn to_color_mosaic(&self) -> PlanarImage {
        let mut out = PlanarImage::zeros(self.width, self.height, 3);
        for y in 0..self.height {
            for x in 0..self.width {
                let c = self.pattern.channel_at(y, x).index();
                out.set(x, y, c, self.get(x, y));
            }
        }
        out
    }
}

pub(crate) fn require_even(width: usize, height: usize) -> Result<()> {
    if width % 2 != 0 || height % 2 != 0 {
        return Err(Error::OddDimensions { width, height });
    }
    Ok(())
}

/// Weighted gray conversion with [`GRAY_WEIGHTS`].
///
/// Evaluated as `g + wr·(r − g) + wb·(b − g)`, which equals the weighted sum
/// because the weights add up to one and returns neutral pixels unchanged
/// to the bit.
pub fn rgb_to_gray(img: &PlanarImage) -> Result<PlanarImage> {
    img.expect_channels(3)?;
    let [wr, _, wb] = GRAY_WEIGHTS;
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..r.len())
        .map(|i| g[i] + wr * (r[i] - g[i]) + wb * (b[i] - g[i]))
        .collect();
    Ok(PlanarImage::from_raw(img.width, img.height, 1, data))
}

pub fn rgb_to_gray_weighted(img: &PlanarImage, weights: [f64; 3]) -> Result<PlanarImage> {
    img.expect_channels(3)?;
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..r.len())
        .map(|i| weights[0] * r[i] + weights[1] * g[i] + weights[2] * b[i])
        .collect();
    Ok(PlanarImage::from_raw(img.width, img.height, 1, data))
}

/// Samples a color image through a CFA: each site keeps only the channel the
/// pattern assigns to it.
pub fn mosaic(img: &PlanarImage, pattern: CfaPattern) -> Result<BayerImage> {
    img.expect_channels(3)?;
    require_even(img.width, img.height)?;
    let mut data = Vec::with_capacity(img.width * img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            data.push(img.get(x, y, pattern.channel_at(y, x).index()));
        }
    }
    BayerImage::new(img.width, img.height, pattern, data)
}

/// The four same-color sub-images of a mosaic, one sample per 2×2 tile.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperPixelView {
    pattern: CfaPattern,
    planes: [PlanarImage; 4],
}

impl SuperPixelView {
    /// Builds a view from four planes of equal size, ordered R, G1, G2, B.
    pub fn from_planes(pattern: CfaPattern, planes: [PlanarImage; 4]) -> Result<Self> {
        let (w, h) = (planes[0].width, planes[0].height);
        for p in &planes {
            p.expect_channels(1)?;
            if p.width != w || p.height != h {
                return Err(Error::DimensionMismatch(w, h, p.width, p.height));
            }
        }
        Ok(Self { pattern, planes })
    }

    pub fn pattern(&self) -> CfaPattern {
        self.pattern
    }

    pub fn sp_width(&self) -> usize {
        self.planes[0].width
    }

    pub fn sp_height(&self) -> usize {
        self.planes[0].height
    }

    pub fn plane(&self, p: SuperPixelPlane) -> &PlanarImage {
        &self.planes[p as usize]
    }

    pub fn planes(&self) -> &[PlanarImage; 4] {
        &self.planes
    }

    pub fn map_planes(&self, mut f: impl FnMut(&PlanarImage) -> PlanarImage) -> Result<Self> {
        let planes = [
            f(&self.planes[0]),
            f(&self.planes[1]),
            f(&self.planes[2]),
            f(&self.planes[3]),
        ];
        Self::from_planes(self.pattern, planes)
    }

    /// Interleaves the planes back into a mosaic under the view's pattern.
    pub fn reassemble(&self) -> BayerImage {
        let (sw, sh) = (self.sp_width(), self.sp_height());
        let (w, h) = (2 * sw, 2 * sh);
        let mut data = vec![0.0; w * h];
        for p in SuperPixelPlane::ALL {
            let (dr, dc) = self.pattern.plane_offset(p);
            let plane = self.plane(p).plane(0);
            for v in 0..sh {
                for u in 0..sw {
                    data[(2 * v + dr) * w + 2 * u + dc] = plane[v * sw + u];
                }
            }
        }
        BayerImage::from_raw(w, h, self.pattern, data)
    }
}

pub fn superpixel_view(img: &BayerImage) -> Result<SuperPixelView> {
    img.require_even()?;
    let (sw, sh) = (img.width / 2, img.height / 2);
    let extract = |p: SuperPixelPlane| {
        let (dr, dc) = img.pattern.plane_offset(p);
        PlanarImage::from_fn(sw, sh, |u, v| img.get(2 * u + dc, 2 * v + dr))
    };
    Ok(SuperPixelView {
        pattern: img.pattern,
        planes: [
            extract(SuperPixelPlane::R),
            extract(SuperPixelPlane::G1),
            extract(SuperPixelPlane::G2),
            extract(SuperPixelPlane::B),
        ],
    })
}

/// Bilinear sample of a plane at continuous pixel-center coordinates.
/// Taps outside the raster contribute `outside`.
pub(crate) fn bilinear_sample(
    data: &[f64],
    width: usize,
    height: usize,
    x: f64,
    y: f64,
    outside: f64,
) -> f64 {
    let x = snap(x);
    let y = snap(y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let tap = |xi: i64, yi: i64| {
        if xi < 0 || yi < 0 || xi >= width as i64 || yi >= height as i64 {
            outside
        } else {
            data[yi as usize * width + xi as usize]
        }
    };
    let mut acc = 0.0;
    let w00 = (1.0 - fx) * (1.0 - fy);
    if w00 != 0.0 {
        acc += w00 * tap(x0, y0);
    }
    if fx != 0.0 {
        acc += fx * (1.0 - fy) * tap(x0 + 1, y0);
    }
    if fy != 0.0 {
        acc += (1.0 - fx) * fy * tap(x0, y0 + 1);
    }
    if fx != 0.0 && fy != 0.0 {
        acc += fx * fy * tap(x0 + 1, y0 + 1);
    }
    acc
}

// Coordinates produced by trigonometry land a few ulps off integers at right
// angles; snapping keeps those rotations exact permutations.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Rotates a single plane about its center. A point `p` of the input lands at
/// `R(θ)·(p − c) + c` with `x' = x·cosθ − y·sinθ`, `y' = x·sinθ + y·cosθ`
/// (the row-vector convention of [`crate::sift::rotation_homography`]).
/// Out-of-frame samples are zero.
pub fn rotate_plane(img: &PlanarImage, theta_deg: f64) -> Result<PlanarImage> {
    img.expect_channels(1)?;
    Ok(rotate_channels(img, theta_deg))
}

/// Rotates every channel of an image about its center (see [`rotate_plane`]).
pub fn rotate_image(img: &PlanarImage, theta_deg: f64) -> PlanarImage {
    rotate_channels(img, theta_deg)
}

fn rotate_channels(img: &PlanarImage, theta_deg: f64) -> PlanarImage {
    let (w, h) = (img.width, img.height);
    let theta = theta_deg.to_radians();
    let (s, c) = theta.sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = PlanarImage::zeros(w, h, img.channels);
    for ch in 0..img.channels {
        let src = img.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let sx = dx * c + dy * s + cx;
                let sy = -dx * s + dy * c + cy;
                dst[y * w + x] = bilinear_sample(src, w, h, sx, sy, 0.0);
            }
        }
    }
    out
}

/// Rotates a mosaic by rotating each super-pixel plane about its own center
/// and re-interleaving, so the CFA phase is preserved.
pub fn rotate_bayer(img: &BayerImage, theta_deg: f64) -> Result<BayerImage> {
    let view = superpixel_view(img)?;
    Ok(view
        .map_planes(|p| rotate_channels(p, theta_deg))?
        .reassemble())
}
