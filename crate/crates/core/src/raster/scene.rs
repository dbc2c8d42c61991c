//! Synthetic two-color scenes for probing the color-difference assumption.

use super::PlanarImage;
use crate::error::{Error, Result};

/// The four background/foreground color pairs of the synthetic edge study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fig5Case {
    /// Black square background, white foreground: R = G = B everywhere.
    GrayEqual,
    /// R = B in both colors, constant G − R offset.
    ConstantDifference,
    /// Color difference changes across the edge but keeps its sign.
    SameSignDifference,
    /// Color difference flips sign across the edge.
    SignFlip,
}

impl Fig5Case {
    pub const ALL: [Fig5Case; 4] = [
        Fig5Case::GrayEqual,
        Fig5Case::ConstantDifference,
        Fig5Case::SameSignDifference,
        Fig5Case::SignFlip,
    ];

    /// `(background, foreground)` colors.
    pub fn colors(self) -> ([f64; 3], [f64; 3]) {
        match self {
            Fig5Case::GrayEqual => ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
            Fig5Case::ConstantDifference => ([0.2, 0.5, 0.2], [0.7, 1.0, 0.7]),
            Fig5Case::SameSignDifference => ([0.9, 0.45, 0.8], [0.7, 0.22, 0.6]),
            Fig5Case::SignFlip => ([0.0, 0.5, 1.0], [1.0, 0.5, 0.0]),
        }
    }

    pub fn scene(self, size: usize) -> Result<PlanarImage> {
        let (bg, fg) = self.colors();
        make_fig5_scene(bg, fg, size)
    }
}

/// `size`×`size` image with a centered square of side `size / 2` in `fg` on a
/// uniform `bg`.
pub fn make_fig5_scene(bg: [f64; 3], fg: [f64; 3], size: usize) -> Result<PlanarImage> {
    if bg.iter().chain(&fg).any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("scene colors must lie in [0, 1]"));
    }
    if size < 2 {
        return Err(Error::invalid("scene size must be at least 2"));
    }
    let side = size / 2;
    let lo = (size - side) / 2;
    let hi = lo + side;
    Ok(PlanarImage::from_rgb_fn(size, size, |x, y| {
        if (lo..hi).contains(&x) && (lo..hi).contains(&y) {
            fg
        } else {
            bg
        }
    }))
}
