//! Dataset-level experiment drivers. Each experiment produces a CSV with one
//! row per image and a final `mean` row; some also write PNG figures.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::demosaic::{demosaic_quality, DemosaicMethod};
use crate::error::{Error, Result};
use crate::gradient::{
    channel_difference_diagnostics, gradients, magnitude, GradientOperator,
};
use crate::multiscale::{
    blur, blur_bayer, resize_bayer, resize_to, sigma_for_kernel, GaussianKernel,
};
use crate::noise::{add_noise, add_noise_bayer, NoiseParams};
use crate::pipeline::{bench, PipelineSpec, PipelineVariant};
use crate::quality::{gms, mse, mssim, psnr, GMS_C};
use crate::raster::{
    load_planar, mosaic, rgb_to_gray, rotate_bayer, rotate_image, save_csv, save_image,
    BayerImage, CfaPattern, CsvTable, PlanarImage, SaveOptions,
};
use crate::sift::{detect, repeatability, rotation_homography, scale_homography, Homography};
use crate::sift::{bayer_space, gray_space, SiftConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Table2,
    Table3,
    Table5,
    Table6,
    Fig6,
    Fig16,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Table2,
        Experiment::Table3,
        Experiment::Table5,
        Experiment::Table6,
        Experiment::Fig6,
        Experiment::Fig16,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::Table5 => "table5",
            Experiment::Table6 => "table6",
            Experiment::Fig6 => "fig6",
            Experiment::Fig16 => "fig16",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    pub pattern: CfaPattern,
    pub operator: GradientOperator,
    /// Applied before the color/Bayer split: to linear RGB on the color path
    /// and to the mosaic on the Bayer path.
    pub noise: Option<NoiseParams>,
    pub bench_runs: usize,
    pub sift: SiftConfig,
    /// Repeatability tolerance in pixels.
    pub repeat_tolerance: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            pattern: CfaPattern::Rggb,
            operator: GradientOperator::CentralDifference,
            noise: None,
            bench_runs: 5,
            sift: SiftConfig::default(),
            repeat_tolerance: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatasetImage {
    pub name: String,
    pub image: PlanarImage,
}

fn is_image_path(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pgm" | "pnm"))
        .unwrap_or(false)
}

/// Loads every RGB image in `dir` (sorted by file name) and crops it to even
/// dimensions. Unreadable or non-RGB files are skipped with a warning.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetImage>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        match load_planar(&p).and_then(|img| img.expect_channels(3).map(|_| img)) {
            Ok(img) => out.push(DatasetImage {
                name: p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                image: img.crop_even(),
            }),
            Err(e) => log::warn!("skipping {}: {e}", p.display()),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset(dir.to_path_buf()));
    }
    Ok(out)
}

fn noisy_branches(
    img: &PlanarImage,
    pattern: CfaPattern,
    noise: Option<&NoiseParams>,
) -> Result<(PlanarImage, BayerImage)> {
    let bayer = mosaic(img, pattern)?;
    match noise {
        None => Ok((img.clone(), bayer)),
        Some(p) => Ok((add_noise(img, p)?, add_noise_bayer(&bayer, p)?)),
    }
}

/// Gray-path versus Bayer-path gradient magnitude comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientEquivalence {
    pub gmsd: f64,
    pub gmsm: f64,
    pub psnr: f64,
    pub mssim: f64,
}

/// Gradient magnitude maps of the gray conversion and of the mosaic.
pub fn gradient_maps(
    color: &PlanarImage,
    bayer: &BayerImage,
    op: GradientOperator,
) -> Result<(PlanarImage, PlanarImage)> {
    let gray = rgb_to_gray(color)?;
    Ok((
        magnitude(&gradients(gray.view(0), op)?),
        magnitude(&gradients(bayer.view(), op)?),
    ))
}

pub fn gradient_equivalence(
    img: &PlanarImage,
    pattern: CfaPattern,
    op: GradientOperator,
) -> Result<GradientEquivalence> {
    let (m_gray, m_bayer) = gradient_maps(img, &mosaic(img, pattern)?, op)?;
    score_maps(&m_gray, &m_bayer)
}

fn score_maps(m_gray: &PlanarImage, m_bayer: &PlanarImage) -> Result<GradientEquivalence> {
    let g = gms(m_gray, m_bayer, GMS_C)?;
    Ok(GradientEquivalence {
        gmsd: g.gmsd,
        gmsm: g.gmsm,
        psnr: psnr(&m_gray.clamp01(), &m_bayer.clamp01(), 8)?,
        mssim: mssim(m_gray, m_bayer)?,
    })
}

/// One Bayer-versus-color blur/resize pairing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiscaleSetting {
    /// Kernel on the super-pixel lattice.
    pub bayer_kernel: Option<usize>,
    /// Kernel on the full-resolution color image.
    pub color_kernel: Option<usize>,
    pub scale: Option<f64>,
}

impl MultiscaleSetting {
    pub fn blur(bayer: usize, color: usize) -> Self {
        Self {
            bayer_kernel: Some(bayer),
            color_kernel: Some(color),
            scale: None,
        }
    }

    pub fn resize(scale: f64) -> Self {
        Self {
            bayer_kernel: None,
            color_kernel: None,
            scale: Some(scale),
        }
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let (Some(b), Some(c)) = (self.bayer_kernel, self.color_kernel) {
            parts.push(format!("blur{b}x{c}"));
        }
        if let Some(s) = self.scale {
            parts.push(format!("scale{s}"));
        }
        parts.join("_")
    }
}

/// The blur, resize and blur-then-resize pairings compared in the multiscale
/// table.
pub fn table5_settings() -> Vec<MultiscaleSetting> {
    let mut v: Vec<_> = [3, 5, 7, 9]
        .into_iter()
        .map(|c| MultiscaleSetting::blur(3, c))
        .collect();
    v.push(MultiscaleSetting::resize(0.5));
    v.push(MultiscaleSetting::resize(2.0));
    for s in [0.5, 2.0] {
        v.push(MultiscaleSetting {
            scale: Some(s),
            ..MultiscaleSetting::blur(3, 7)
        });
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiscaleScore {
    pub mssim: f64,
    /// MSE on the 8-bit scale.
    pub mse: f64,
    pub psnr: f64,
}

/// Runs a setting on both paths and compares the results as mosaics: the
/// Bayer path operates on super-pixel planes, the color path operates on the
/// RGB image and is then sampled with the same pattern.
pub fn multiscale_equivalence(
    img: &PlanarImage,
    pattern: CfaPattern,
    setting: &MultiscaleSetting,
) -> Result<MultiscaleScore> {
    let mut bayer = mosaic(img, pattern)?;
    let mut color = img.clone();
    if let Some(a) = setting.bayer_kernel {
        bayer = blur_bayer(&bayer, &GaussianKernel::from_size(a)?)?;
    }
    if let Some(a) = setting.color_kernel {
        color = blur(&color, &GaussianKernel::from_size(a)?);
    }
    if let Some(s) = setting.scale {
        bayer = resize_bayer(&bayer, s)?;
        color = resize_to(&color, bayer.width(), bayer.height())?;
    }
    let (b, c) = (bayer.to_planar(), mosaic(&color.clamp01(), pattern)?.to_planar());
    Ok(MultiscaleScore {
        mssim: mssim(&c, &b)?,
        mse: mse(&c, &b, 8)?,
        psnr: psnr(&c, &b, 8)?,
    })
}

/// A geometric or photometric change for the repeatability sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform {
    /// Gaussian blur with kernel size `a` on the color image; the Bayer path
    /// blurs super-pixel planes with half the sigma (one plane sample spans
    /// two pixels).
    Blur(usize),
    Scale(f64),
    RotateDeg(f64),
}

impl Transform {
    pub fn label(&self) -> String {
        match self {
            Transform::Blur(a) => format!("blur{a}"),
            Transform::Scale(s) => format!("scale{s}"),
            Transform::RotateDeg(d) => format!("rot{d}"),
        }
    }
}

pub fn fig16_transforms() -> Vec<Transform> {
    let mut v: Vec<_> = [3, 5, 7, 9].into_iter().map(Transform::Blur).collect();
    v.extend([0.5, 2.0].map(Transform::Scale));
    v.extend([10.0, 20.0, 30.0].map(Transform::RotateDeg));
    v
}

/// Applies `t` on both paths and returns the transformed color image, the
/// transformed mosaic and the image-1 → image-2 homography.
pub fn apply_transform(
    color: &PlanarImage,
    bayer: &BayerImage,
    t: Transform,
) -> Result<(PlanarImage, BayerImage, Homography)> {
    match t {
        Transform::Blur(a) => {
            let sigma = sigma_for_kernel(a)?;
            let c = blur(color, &GaussianKernel::from_size(a)?);
            let b = blur_bayer(bayer, &GaussianKernel::for_sigma(0.5 * sigma)?)?;
            Ok((c, b, Homography::identity()))
        }
        Transform::Scale(s) => {
            let b = resize_bayer(bayer, s)?;
            let c = resize_to(color, b.width(), b.height())?;
            Ok((c, b, scale_homography(s)?))
        }
        Transform::RotateDeg(d) => {
            let center = (
                (color.width() as f64 - 1.0) / 2.0,
                (color.height() as f64 - 1.0) / 2.0,
            );
            Ok((
                rotate_image(color, d),
                rotate_bayer(bayer, d)?,
                rotation_homography(d, center),
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepeatabilityPair {
    pub color: f64,
    pub bayer: f64,
}

/// Keypoint repeatability under `t` for the gray path and the Bayer path.
pub fn repeatability_pair(
    img: &PlanarImage,
    t: Transform,
    opts: &ExperimentOptions,
) -> Result<RepeatabilityPair> {
    let cfg = &opts.sift;
    let (color, bayer) = noisy_branches(img, opts.pattern, opts.noise.as_ref())?;
    let (color2, bayer2, h) = apply_transform(&color, &bayer, t)?;
    let gray_kps = |c: &PlanarImage| -> Result<_> { detect(&gray_space(&rgb_to_gray(c)?, cfg)?, cfg) };
    let bayer_kps = |b: &BayerImage| -> Result<_> { detect(&bayer_space(b, cfg)?, cfg) };
    let tol = opts.repeat_tolerance;
    Ok(RepeatabilityPair {
        color: repeatability(&gray_kps(&color)?, &gray_kps(&color2)?, &h, tol)?,
        bayer: repeatability(&bayer_kps(&bayer)?, &bayer_kps(&bayer2)?, &h, tol)?,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Appends the column-wise mean of `rows` as a row named `mean`.
fn finish(header: Vec<String>, rows: Vec<(String, Vec<f64>)>) -> CsvTable {
    let mut t = CsvTable::new(header);
    let n = rows.len() as f64;
    let width = rows.first().map_or(0, |r| r.1.len());
    let mut sums = vec![0.0; width];
    for (name, vals) in &rows {
        for (s, v) in sums.iter_mut().zip(vals) {
            *s += v;
        }
        t.push(std::iter::once(name.clone()).chain(vals.iter().map(|&v| fmt(v))));
    }
    t.push(std::iter::once("mean".to_string()).chain(sums.iter().map(|s| fmt(s / n))));
    t
}

fn header(cols: impl IntoIterator<Item = String>) -> Vec<String> {
    std::iter::once("image".to_string()).chain(cols).collect()
}

fn per_image<F>(data: &[DatasetImage], f: F) -> Result<Vec<(String, Vec<f64>)>>
where
    F: Fn(&DatasetImage) -> Result<Vec<f64>> + Sync,
{
    data.par_iter()
        .map(|d| f(d).map(|v| (d.name.clone(), v)))
        .collect()
}

fn table2(data: &[DatasetImage], opts: &ExperimentOptions) -> Result<CsvTable> {
    let rows = per_image(data, |d| {
        let (color, bayer) = noisy_branches(&d.image, opts.pattern, opts.noise.as_ref())?;
        let mut v = Vec::new();
        for op in [GradientOperator::CentralDifference, GradientOperator::Sobel] {
            let (a, b) = gradient_maps(&color, &bayer, op)?;
            let s = score_maps(&a, &b)?;
            v.extend([s.gmsd, s.gmsm, s.psnr, s.mssim]);
        }
        Ok(v)
    })?;
    let cols = ["central", "sobel"]
        .iter()
        .flat_map(|op| ["gmsd", "gmsm", "psnr", "mssim"].map(|m| format!("{m}_{op}")))
        .collect::<Vec<_>>();
    Ok(finish(header(cols), rows))
}

fn table3(data: &[DatasetImage], opts: &ExperimentOptions) -> Result<CsvTable> {
    let rows = per_image(data, |d| {
        let mut v = Vec::new();
        for m in DemosaicMethod::ALL {
            let q = demosaic_quality(&d.image, m, opts.pattern)?;
            v.extend([q.psnr, q.mssim, q.gmsd]);
        }
        Ok(v)
    })?;
    let cols = DemosaicMethod::ALL
        .iter()
        .flat_map(|m| ["psnr", "mssim", "gmsd"].map(|k| format!("{k}_{m}")))
        .collect::<Vec<_>>();
    Ok(finish(header(cols), rows))
}

fn table5(data: &[DatasetImage], opts: &ExperimentOptions) -> Result<CsvTable> {
    let settings = table5_settings();
    let rows = per_image(data, |d| {
        let mut v = Vec::new();
        for s in &settings {
            let r = multiscale_equivalence(&d.image, opts.pattern, s)?;
            v.extend([r.mssim, r.mse, r.psnr]);
        }
        Ok(v)
    })?;
    let cols = settings
        .iter()
        .flat_map(|s| ["mssim", "mse", "psnr"].map(|k| format!("{k}_{}", s.label())))
        .collect::<Vec<_>>();
    Ok(finish(header(cols), rows))
}

/// Pipelines compared by the benchmark: the Bayer-direct path first, then
/// the demosaic-first path for every method.
pub fn bench_specs(operator: GradientOperator) -> Vec<PipelineSpec> {
    std::iter::once(PipelineVariant::Pipeline1)
        .chain(DemosaicMethod::ALL.map(PipelineVariant::Pipeline2))
        .map(|v| PipelineSpec {
            operator,
            ..PipelineSpec::new(v)
        })
        .collect()
}

fn table6(data: &[DatasetImage], opts: &ExperimentOptions) -> Result<CsvTable> {
    let specs = bench_specs(opts.operator);
    let mut rows = Vec::new();
    // serial on purpose: timings must not compete for cores
    for d in data {
        let b = mosaic(&d.image, opts.pattern)?;
        let r = bench(&b, &specs, opts.bench_runs)?;
        let v = r
            .rows
            .iter()
            .flat_map(|row| {
                [
                    row.wall_time_ms,
                    row.peak_alloc_bytes as f64,
                    row.time_ratio,
                    row.memory_ratio,
                ]
            })
            .collect();
        rows.push((d.name.clone(), v));
    }
    let cols = specs
        .iter()
        .flat_map(|s| {
            let n = s.variant.name();
            ["time_ms", "peak_bytes", "time_ratio", "memory_ratio"].map(|k| format!("{k}_{n}"))
        })
        .collect::<Vec<_>>();
    Ok(finish(header(cols), rows))
}

fn histogram_table(d: &crate::gradient::DifferenceDiagnostics) -> CsvTable {
    let mut t = CsvTable::new(["bin", "diff_gr", "diff_gb", "grad_gr", "grad_gb"]);
    for i in 0..d.hist_diff_gr.len() {
        t.push([
            i.to_string(),
            d.hist_diff_gr[i].to_string(),
            d.hist_diff_gb[i].to_string(),
            d.hist_grad_gr[i].to_string(),
            d.hist_grad_gb[i].to_string(),
        ]);
    }
    t
}

fn fig6(data: &[DatasetImage], out: &Path, opts: &ExperimentOptions) -> Result<CsvTable> {
    let inverse = SaveOptions {
        inverse: true,
        gain: Some(4.0),
        ..SaveOptions::default()
    };
    let rows = per_image(data, |d| {
        let (color, bayer) = noisy_branches(&d.image, opts.pattern, opts.noise.as_ref())?;
        let (m_gray, m_bayer) = gradient_maps(&color, &bayer, GradientOperator::CentralDifference)?;
        let (s_gray, s_bayer) = gradient_maps(&color, &bayer, GradientOperator::Sobel)?;
        let central = score_maps(&m_gray, &m_bayer)?;
        let sobel = score_maps(&s_gray, &s_bayer)?;
        let diag = channel_difference_diagnostics(&color)?;
        let file = |suffix: &str| out.join(format!("{}_{suffix}", d.name));
        save_image(file("gray_grad.png"), &m_gray, inverse)?;
        save_image(file("bayer_grad.png"), &m_bayer, inverse)?;
        let shifted = SaveOptions::default();
        save_image(file("diff_gr.png"), &diag.diff_gr.map(|v| 0.5 + 0.5 * v), shifted)?;
        save_image(file("diff_gb.png"), &diag.diff_gb.map(|v| 0.5 + 0.5 * v), shifted)?;
        save_image(file("grad_gr.png"), &diag.grad_gr, inverse)?;
        save_image(file("grad_gb.png"), &diag.grad_gb, inverse)?;
        save_csv(file("hist.csv"), &histogram_table(&diag))?;
        Ok(vec![
            central.gmsd,
            sobel.gmsd,
            diag.grad_gr.mean(),
            diag.grad_gb.mean(),
            diag.grad_gr.min_max().1,
            diag.grad_gb.min_max().1,
        ])
    })?;
    let cols = [
        "gmsd_central",
        "gmsd_sobel",
        "mean_grad_gr",
        "mean_grad_gb",
        "max_grad_gr",
        "max_grad_gb",
    ]
    .map(String::from);
    Ok(finish(header(cols), rows))
}

fn fig16(data: &[DatasetImage], opts: &ExperimentOptions) -> Result<CsvTable> {
    let transforms = fig16_transforms();
    let rows = per_image(data, |d| {
        let mut v = Vec::new();
        for &t in &transforms {
            let r = repeatability_pair(&d.image, t, opts)?;
            v.extend([r.color, r.bayer]);
        }
        Ok(v)
    })?;
    let cols = transforms
        .iter()
        .flat_map(|t| ["color", "bayer"].map(|k| format!("rep_{k}_{}", t.label())))
        .collect::<Vec<_>>();
    Ok(finish(header(cols), rows))
}

/// Runs `exp` on an already loaded dataset and returns its table without
/// touching the file system (figures need `out_dir`).
pub fn run_experiment(
    exp: Experiment,
    data: &[DatasetImage],
    out_dir: &Path,
    opts: &ExperimentOptions,
) -> Result<CsvTable> {
    if data.is_empty() {
        return Err(Error::EmptyDataset(out_dir.to_path_buf()));
    }
    match exp {
        Experiment::Table2 => table2(data, opts),
        Experiment::Table3 => table3(data, opts),
        Experiment::Table5 => table5(data, opts),
        Experiment::Table6 => table6(data, opts),
        Experiment::Fig6 => fig6(data, out_dir, opts),
        Experiment::Fig16 => fig16(data, opts),
    }
}

/// Loads `dataset_dir`, runs `exp` and writes `<out_dir>/<exp>.csv`.
pub fn run_table(
    exp: Experiment,
    dataset_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    opts: &ExperimentOptions,
) -> Result<CsvTable> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let data = load_dataset(dataset_dir)?;
    log::info!("{exp}: {} images", data.len());
    let table = run_experiment(exp, &data, out_dir, opts)?;
    save_csv(out_dir.join(format!("{exp}.csv")), &table)?;
    Ok(table)
}
