//! Bayer-direct versus demosaic-first gradient pipelines and their
//! benchmark.

use std::time::Instant;

use crate::alloc::{is_tracking, measure};
use crate::demosaic::{demosaic, DemosaicMethod};
use crate::error::{Error, Result};
use crate::gradient::{gradients, magnitude, GradientOperator};
use crate::multiscale::{blur, blur_bayer, resize, resize_bayer, GaussianKernel};
use crate::raster::{rgb_to_gray, BayerImage, PlanarImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineVariant {
    /// Super-pixel blur and resize on the mosaic, gradients on the mosaic.
    Pipeline1,
    /// Demosaic, per-channel blur and resize, gray conversion, gradients.
    Pipeline2(DemosaicMethod),
}

impl PipelineVariant {
    pub fn name(&self) -> String {
        match self {
            PipelineVariant::Pipeline1 => "pipeline1".into(),
            PipelineVariant::Pipeline2(m) => format!("pipeline2-{m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineSpec {
    pub variant: PipelineVariant,
    /// Kernel size on the super-pixel lattice. The demosaic-first path uses
    /// `2a + 1` on full-resolution pixels to cover the same area.
    pub blur_kernel: usize,
    pub resize_scale: f64,
    pub operator: GradientOperator,
}

impl PipelineSpec {
    pub fn new(variant: PipelineVariant) -> Self {
        Self {
            variant,
            blur_kernel: 3,
            resize_scale: 0.5,
            operator: GradientOperator::CentralDifference,
        }
    }
}

/// Runs one pipeline and returns the final gradient magnitude map.
pub fn run_pipeline(img: &BayerImage, spec: &PipelineSpec) -> Result<PlanarImage> {
    img.require_even()?;
    match spec.variant {
        PipelineVariant::Pipeline1 => {
            let k = GaussianKernel::from_size(spec.blur_kernel)?;
            let blurred = blur_bayer(img, &k)?;
            let small = resize_bayer(&blurred, spec.resize_scale)?;
            Ok(magnitude(&gradients(small.view(), spec.operator)?))
        }
        PipelineVariant::Pipeline2(method) => {
            let k = GaussianKernel::from_size(2 * spec.blur_kernel + 1)?;
            let rgb = demosaic(img, method)?;
            let blurred = blur(&rgb, &k);
            let small = resize(&blurred, spec.resize_scale)?;
            let gray = rgb_to_gray(&small)?;
            Ok(magnitude(&gradients(gray.view(0), spec.operator)?))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub name: String,
    /// Median wall time over the timed runs.
    pub wall_time_ms: f64,
    /// Peak bytes allocated by one run beyond what existed before it. Zero
    /// when the tracking allocator is not installed.
    pub peak_alloc_bytes: usize,
    pub time_ratio: f64,
    /// NaN when allocations are not being tracked.
    pub memory_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times every spec on a single worker thread (`runs` ≥ 5, one untimed
/// warm-up each) and normalizes by the first spec.
pub fn bench(img: &BayerImage, specs: &[PipelineSpec], runs: usize) -> Result<BenchReport> {
    if runs < 5 {
        return Err(Error::invalid("benchmarks need at least 5 runs"));
    }
    if specs.is_empty() {
        return Err(Error::invalid("no pipelines to benchmark"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let (tracking, raw) = pool.install(|| -> Result<(bool, Vec<(String, f64, usize)>)> {
        let tracking = is_tracking();
        if !tracking {
            log::warn!("allocation tracking is not installed; memory columns are empty");
        }
        let mut out = Vec::new();
        for spec in specs {
            let (warm, peak) = measure(|| run_pipeline(img, spec));
            warm?;
            let mut times = Vec::with_capacity(runs);
            for _ in 0..runs {
                let t = Instant::now();
                let r = run_pipeline(img, spec)?;
                times.push(t.elapsed().as_secs_f64() * 1e3);
                drop(r);
            }
            out.push((spec.variant.name(), median(times), peak));
        }
        Ok((tracking, out))
    })?;
    let (t0, m0) = (raw[0].1, raw[0].2.max(1) as f64);
    Ok(BenchReport {
        rows: raw
            .into_iter()
            .map(|(name, ms, bytes)| BenchRow {
                name,
                wall_time_ms: ms,
                peak_alloc_bytes: bytes,
                time_ratio: ms / t0,
                memory_ratio: if tracking {
                    bytes.max(1) as f64 / m0
                } else {
                    f64::NAN
                },
            })
            .collect(),
    })
}
