//! Gradient-based feature extraction straight from raw Bayer CFA mosaics.
//!
//! A central-difference (or Sobel) template always subtracts samples of the
//! same CFA color, so convolving it with an undemosaiced mosaic yields
//! gradients that track those of the fully rendered gray image wherever the
//! local color difference is slowly varying. This crate implements that
//! pipeline together with the tooling needed to check it:
//!
//! - [`raster`]: images, CFA patterns, super-pixel views, I/O
//! - [`demosaic`]: reference interpolators for the demosaic-first path
//! - [`gradient`]: central-difference and Sobel operators on any plane
//! - [`quality`]: GMS/GMSD, MSE/PSNR, SSIM
//! - [`multiscale`]: Gaussian blur, resize and DoG scale spaces for gray
//!   images and, via super-pixels, for mosaics
//! - [`hog`], [`sift`]: descriptors, matching, repeatability
//! - [`noise`]: signal-dependent Gaussian noise injection
//! - [`pipeline`], [`experiments`]: benchmark and evaluation drivers

pub mod alloc;
pub mod demosaic;
pub mod error;
pub mod experiments;
pub mod gradient;
pub mod hog;
pub mod multiscale;
pub mod noise;
pub mod pipeline;
pub mod quality;
pub mod raster;
pub mod sift;

pub use error::{Error, Result};
pub use raster::{BayerImage, CfaPattern, Channel, PlanarImage, PlaneRef};
