//! Signal-dependent Gaussian noise, `out = clamp(y + η)`, `η ~ N(0, a·y + b)`.
//!
//! Each raster row draws from its own ChaCha stream keyed by the seed, so
//! results do not depend on how rows are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{BayerImage, PlanarImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    /// Signal-dependent variance gain.
    pub a: f64,
    /// Variance floor.
    pub b: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoisePreset {
    Light,
    Mid,
    Heavy,
}

impl NoisePreset {
    pub fn params(self, seed: u64) -> NoiseParams {
        let (a, b) = match self {
            NoisePreset::Light => (9.63e-4, 3.43e-5),
            NoisePreset::Mid => (4.80e-3, 2.00e-4),
            NoisePreset::Heavy => (3.59e-2, 3.40e-3),
        };
        NoiseParams { a, b, seed }
    }
}

impl std::str::FromStr for NoisePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "light" => Ok(Self::Light),
            "mid" => Ok(Self::Mid),
            "heavy" => Ok(Self::Heavy),
            other => Err(Error::invalid(format!("unknown noise preset '{other}'"))),
        }
    }
}

impl NoiseParams {
    pub fn new(a: f64, b: f64, seed: u64) -> Result<Self> {
        let p = Self { a, b, seed };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite() && self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::invalid(format!(
                "noise parameters must be finite and nonnegative (a={}, b={})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// Noise variance at intensity `y`.
    pub fn variance(&self, y: f64) -> f64 {
        self.a * y + self.b
    }
}

fn apply(samples: &[f64], row_len: usize, p: &NoiseParams) -> Result<Vec<f64>> {
    p.validate()?;
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::SampleOutOfRange { index, value });
    }
    let mut out = samples.to_vec();
    if p.a == 0.0 && p.b == 0.0 {
        return Ok(out);
    }
    out.par_chunks_mut(row_len.max(1))
        .enumerate()
        .for_each(|(row, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(row as u64);
            for v in chunk.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = (*v + z * p.variance(*v).sqrt()).clamp(0.0, 1.0);
            }
        });
    Ok(out)
}

pub fn add_noise(img: &PlanarImage, p: &NoiseParams) -> Result<PlanarImage> {
    let data = apply(img.samples(), img.width(), p)?;
    PlanarImage::new(img.width(), img.height(), img.channels(), data)
}

pub fn add_noise_bayer(img: &BayerImage, p: &NoiseParams) -> Result<BayerImage> {
    let data = apply(img.samples(), img.width(), p)?;
    BayerImage::new(img.width(), img.height(), img.pattern(), data)
}
