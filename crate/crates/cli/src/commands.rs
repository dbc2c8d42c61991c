//! Subcommand bodies. Each writes its artifacts under `settings.out` and
//! prints tables to stdout.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bayerfeat::demosaic::{demosaic, DemosaicMethod};
use bayerfeat::experiments::{
    gradient_equivalence, repeatability_pair, run_table, Experiment, ExperimentOptions, Transform,
};
use bayerfeat::gradient::{color_gradients, gradients, magnitude, ColorGradientMode, GradientField};
use bayerfeat::hog::{gamma_compress, hog, render_glyphs, HogConfig};
use bayerfeat::multiscale::{build_scale_space, ScaleInput, ScaleSpace};
use bayerfeat::noise::{add_noise, add_noise_bayer, NoiseParams, NoisePreset};
use bayerfeat::pipeline::bench;
use bayerfeat::quality::{gmsd, mssim, psnr_per_channel};
use bayerfeat::raster::{
    load_image, mosaic, rgb_to_gray, save_bayer, save_csv, save_image, write_float_dump, CsvTable,
    LoadedImage, SaveOptions,
};
use bayerfeat::sift::{
    extract, keypoints_table, match_descriptors, oriented_keypoints, render_matches, SiftDescriptor,
};
use bayerfeat::{BayerImage, PlanarImage};

use crate::config::{usage, Settings};

/// A decoded input: a declared mosaic, a gray image or an RGB image.
pub enum Input {
    Bayer(BayerImage),
    Gray(PlanarImage),
    Rgb(PlanarImage),
}

impl Input {
    /// Single-channel files count as mosaics when a pattern was named (flag,
    /// config or `.cfa` sidecar); otherwise they are gray images.
    pub fn load(path: &Path, s: &Settings) -> Result<Self> {
        let loaded = load_image(path, None).with_context(|| format!("loading {}", path.display()))?;
        Ok(match loaded {
            LoadedImage::Bayer(b) => Input::Bayer(b),
            LoadedImage::Planar(p) if p.channels() == 3 => Input::Rgb(p),
            LoadedImage::Planar(p) => match s.pattern {
                Some(pattern) => Input::Bayer(raw_mosaic(p, pattern)?),
                None => Input::Gray(p),
            },
        })
    }

    /// The mosaic for this input: RGB is sampled through the pattern and a
    /// gray image is read as raw mosaic samples.
    pub fn to_bayer(&self, s: &Settings) -> Result<BayerImage> {
        match self {
            Input::Bayer(b) => Ok(b.clone()),
            Input::Rgb(p) => Ok(mosaic(&p.crop_even(), s.pattern_or_default())?),
            Input::Gray(p) => {
                log::warn!("reading a gray image as a {} mosaic", s.pattern_or_default());
                raw_mosaic(p.clone(), s.pattern_or_default())
            }
        }
    }

    /// Something to look at: the image itself or the mosaic samples.
    pub fn display(&self) -> PlanarImage {
        match self {
            Input::Bayer(b) => b.to_planar(),
            Input::Gray(p) | Input::Rgb(p) => p.clone(),
        }
    }
}

fn raw_mosaic(p: PlanarImage, pattern: bayerfeat::CfaPattern) -> Result<BayerImage> {
    let p = p.crop_even();
    let (w, h) = (p.width(), p.height());
    Ok(BayerImage::new(w, h, pattern, p.into_samples())?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn out_file(s: &Settings, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    Ok(s.out.join(name))
}

fn emit(s: &Settings, name: &str, table: &CsvTable) -> Result<()> {
    let path = out_file(s, name)?;
    save_csv(&path, table)?;
    print!("{}", table.to_csv_string()?);
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Which path `grad`, `pyramid`, `hog` and `sift` take for RGB inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PathChoice {
    /// Mosaics stay mosaics, color images go through gray.
    Auto,
    Gray,
    Bayer,
    /// Per pixel, the color channel with the largest gradient.
    Max,
}

/// Where the features of an input are computed.
enum Route<'a> {
    Bayer,
    Gray(&'a PlanarImage),
    Max(&'a PlanarImage),
}

fn route(path: PathChoice, img: &Input) -> Result<Route<'_>> {
    match (path, img) {
        (PathChoice::Bayer, _) | (PathChoice::Auto, Input::Bayer(_)) => Ok(Route::Bayer),
        (PathChoice::Max, Input::Rgb(p)) => Ok(Route::Max(p)),
        (PathChoice::Max, _) => Err(usage("--path max needs an RGB input")),
        (_, Input::Bayer(_)) => Err(usage("a mosaic input has no gray path; use --path bayer")),
        (_, Input::Gray(p) | Input::Rgb(p)) => Ok(Route::Gray(p)),
    }
}

/// Gradients along `path`, optionally after `(2v)^0.5` contrast stretching.
fn gradient_field(img: &Input, path: PathChoice, gamma: bool, s: &Settings) -> Result<GradientField> {
    let g = |p: PlanarImage| if gamma { gamma_compress(&p, 2.0, 0.5) } else { p };
    let op = s.operator;
    Ok(match route(path, img)? {
        // mosaic samples as a plain raster: taps two apart stay same-color
        Route::Bayer => gradients(g(img.to_bayer(s)?.to_planar()).view(0), op)?,
        Route::Gray(p) => gradients(g(gray_of(p)?).view(0), op)?,
        Route::Max(p) => color_gradients(&g(p.clone()), op, ColorGradientMode::MaxChannel)?,
    })
}

fn scale_space(img: &Input, path: PathChoice, s: &Settings) -> Result<ScaleSpace> {
    let cfg = s.sift.scale_space;
    Ok(match route(path, img)? {
        Route::Bayer => build_scale_space(ScaleInput::Bayer(&img.to_bayer(s)?), &cfg)?,
        Route::Gray(p) => build_scale_space(ScaleInput::Gray(&gray_of(p)?), &cfg)?,
        Route::Max(_) => return Err(usage("--path max is not defined for scale spaces")),
    })
}

pub fn demosaic_cmd(input: &Path, methods: &[DemosaicMethod], s: &Settings) -> Result<()> {
    let img = Input::load(input, s)?;
    let bayer = img.to_bayer(s)?;
    let truth = match &img {
        Input::Rgb(p) => Some(p.crop_even()),
        _ => None,
    };
    let mut table = CsvTable::new(["image", "method", "psnr_db", "mssim"]);
    for &m in methods {
        let rgb = demosaic(&bayer, m)?;
        save_image(out_file(s, &format!("{}_{m}.png", stem(input)))?, &rgb, SaveOptions::default())?;
        if let Some(t) = &truth {
            table.push([
                stem(input),
                m.to_string(),
                format!("{:.4}", psnr_per_channel(t, &rgb, 8)?),
                format!("{:.6}", mssim(t, &rgb)?),
            ]);
        }
    }
    if truth.is_some() {
        emit(s, &format!("{}_demosaic.csv", stem(input)), &table)?;
    }
    Ok(())
}

pub fn grad_cmd(input: &Path, path: PathChoice, gain: f64, dump: bool, s: &Settings) -> Result<()> {
    let img = Input::load(input, s)?;
    let m = magnitude(&gradient_field(&img, path, false, s)?);
    let name = stem(input);
    let opts = SaveOptions {
        inverse: true,
        gain: Some(gain),
        ..SaveOptions::default()
    };
    save_image(out_file(s, &format!("{name}_grad.png"))?, &m, opts)?;
    if dump {
        write_float_dump(out_file(s, &format!("{name}_grad.f32"))?, &m)?;
    }
    let (lo, hi) = m.min_max();
    println!("{name}: {}x{} magnitude range [{lo:.6}, {hi:.6}]", m.width(), m.height());
    Ok(())
}

fn gray_of(p: &PlanarImage) -> Result<PlanarImage> {
    Ok(if p.channels() == 3 { rgb_to_gray(p)? } else { p.clone() })
}

pub fn compare_cmd(a: &Path, b: Option<&Path>, s: &Settings) -> Result<()> {
    let mut table = CsvTable::new(["image", "mssim", "psnr_db", "gmsd"]);
    match b {
        // gray path versus Bayer path of one color image, on gradient maps
        None => {
            let img = match Input::load(a, s)? {
                Input::Rgb(p) => p.crop_even(),
                _ => return Err(usage("compare with one input needs an RGB image")),
            };
            let r = gradient_equivalence(&img, s.pattern_or_default(), s.operator)?;
            table.push([
                stem(a),
                format!("{:.6}", r.mssim),
                format!("{:.4}", r.psnr),
                format!("{:.6}", r.gmsd),
            ]);
        }
        Some(b) => {
            let (x, y) = (Input::load(a, s)?.display(), Input::load(b, s)?.display());
            let (gx, gy) = (gray_of(&x)?, gray_of(&y)?);
            let mx = magnitude(&gradients(gx.view(0), s.operator)?);
            let my = magnitude(&gradients(gy.view(0), s.operator)?);
            table.push([
                format!("{}:{}", stem(a), stem(b)),
                format!("{:.6}", mssim(&x, &y)?),
                format!("{:.4}", psnr_per_channel(&x, &y, 8)?),
                format!("{:.6}", gmsd(&mx, &my)?),
            ]);
        }
    }
    emit(s, &format!("{}_compare.csv", stem(a)), &table)
}

pub fn pyramid_cmd(input: &Path, path: PathChoice, dog: bool, s: &Settings) -> Result<()> {
    let img = Input::load(input, s)?;
    let space = scale_space(&img, path, s)?;
    let dir = format!("{}_pyramid", stem(input));
    let mut table = CsvTable::new(["octave", "level", "sigma", "width", "height", "file"]);
    for (o, oct) in space.octaves.iter().enumerate() {
        let levels: Vec<(usize, PlanarImage)> = if dog {
            // DoG values are small and signed: center on mid-gray
            oct.dogs.iter().map(|d| d.map(|v| 0.5 + 8.0 * v)).enumerate().collect()
        } else {
            oct.gaussians.iter().cloned().enumerate().collect()
        };
        for (l, level) in levels {
            let file = format!("{dir}/o{o}_l{l}.png");
            out_file(s, &dir)?;
            save_image(s.out.join(&file), &level, SaveOptions::default())?;
            table.push([
                o.to_string(),
                l.to_string(),
                format!("{:.4}", space.to_input_scale(o, space.level_sigma(l as f64))),
                level.width().to_string(),
                level.height().to_string(),
                file,
            ]);
        }
    }
    emit(s, &format!("{}_pyramid.csv", stem(input)), &table)
}

pub struct HogWindow {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

pub fn hog_cmd(input: &Path, path: PathChoice, win: &HogWindow, gamma: bool, s: &Settings) -> Result<()> {
    let img = Input::load(input, s)?;
    let field = gradient_field(&img, path, gamma, s)?;
    let window = field
        .crop(win.x, win.y, win.width, win.height)
        .map_err(|e| usage(e.to_string()))?;
    let cfg = HogConfig::default();
    let d = hog(&window, &cfg).map_err(|e| usage(e.to_string()))?;
    let mut table = CsvTable::new(
        ["image", "x", "y"]
            .into_iter()
            .map(String::from)
            .chain((0..d.values.len()).map(|i| format!("v{i}"))),
    );
    table.push(
        [stem(input), win.x.to_string(), win.y.to_string()]
            .into_iter()
            .chain(d.values.iter().map(|v| format!("{v:.6}"))),
    );
    let name = stem(input);
    save_csv(out_file(s, &format!("{name}_hog.csv"))?, &table)?;
    let glyphs = render_glyphs(&window, &cfg, 16)?;
    save_image(out_file(s, &format!("{name}_hog.png"))?, &glyphs, SaveOptions::default())?;
    println!("{name}: {} values for a {}x{} window", d.values.len(), win.width, win.height);
    Ok(())
}

fn sift_descriptors(img: &Input, path: PathChoice, s: &Settings) -> Result<Vec<SiftDescriptor>> {
    Ok(extract(&scale_space(img, path, s)?, &s.sift)?)
}

pub fn sift_detect(input: &Path, path: PathChoice, s: &Settings) -> Result<()> {
    let img = Input::load(input, s)?;
    let kps = oriented_keypoints(&scale_space(&img, path, s)?, &s.sift)?;
    let path = out_file(s, &format!("{}_keypoints.csv", stem(input)))?;
    save_csv(&path, &keypoints_table(&kps))?;
    println!("{}: {} keypoints -> {}", stem(input), kps.len(), path.display());
    Ok(())
}

pub fn sift_match(a: &Path, b: &Path, path: PathChoice, s: &Settings) -> Result<()> {
    let (ia, ib) = (Input::load(a, s)?, Input::load(b, s)?);
    let (da, db) = (sift_descriptors(&ia, path, s)?, sift_descriptors(&ib, path, s)?);
    let set = match_descriptors(&da, &db, s.ratio);
    let mut table = CsvTable::new(["i1", "i2", "x1", "y1", "x2", "y2", "distance"]);
    for m in &set.pairs {
        let (k1, k2) = (&da[m.i1].keypoint, &db[m.i2].keypoint);
        table.push([
            m.i1.to_string(),
            m.i2.to_string(),
            format!("{:.3}", k1.x),
            format!("{:.3}", k1.y),
            format!("{:.3}", k2.x),
            format!("{:.3}", k2.y),
            format!("{:.6}", m.distance),
        ]);
    }
    let name = format!("{}_{}", stem(a), stem(b));
    save_csv(out_file(s, &format!("{name}_matches.csv"))?, &table)?;
    let vis = render_matches(&ia.display(), &ib.display(), &da, &db, &set.pairs)?;
    save_image(out_file(s, &format!("{name}_matches.png"))?, &vis, SaveOptions::default())?;
    println!(
        "{name}: {} and {} descriptors, {} matches",
        set.n1,
        set.n2,
        set.pairs.len()
    );
    Ok(())
}

/// Parses `blur<k>`, `scale<s>` or `rot<deg>`.
pub fn parse_transform(t: &str) -> Result<Transform> {
    let bad = || usage(format!("unknown transform '{t}' (use blurK, scaleS or rotDEG)"));
    if let Some(k) = t.strip_prefix("blur") {
        return Ok(Transform::Blur(k.parse().map_err(|_| bad())?));
    }
    if let Some(v) = t.strip_prefix("scale") {
        return Ok(Transform::Scale(v.parse().map_err(|_| bad())?));
    }
    if let Some(v) = t.strip_prefix("rot") {
        return Ok(Transform::RotateDeg(v.parse().map_err(|_| bad())?));
    }
    Err(bad())
}

fn experiment_options(s: &Settings) -> ExperimentOptions {
    ExperimentOptions {
        pattern: s.pattern_or_default(),
        operator: s.operator,
        noise: s.noise.map(|p| p.params(s.seed)),
        bench_runs: s.runs,
        sift: s.sift,
        repeat_tolerance: s.tolerance,
    }
}

pub fn sift_repeat(input: &Path, transforms: &[String], s: &Settings) -> Result<()> {
    let img = match Input::load(input, s)? {
        Input::Rgb(p) => p.crop_even(),
        _ => return Err(usage("repeatability needs an RGB input")),
    };
    let opts = experiment_options(s);
    let mut table = CsvTable::new(["image", "transform", "rep_color", "rep_bayer"]);
    for t in transforms {
        let tr = parse_transform(t)?;
        let r = repeatability_pair(&img, tr, &opts)?;
        table.push([
            stem(input),
            tr.label(),
            format!("{:.6}", r.color),
            format!("{:.6}", r.bayer),
        ]);
    }
    emit(s, &format!("{}_repeat.csv", stem(input)), &table)
}

pub fn noise_cmd(
    input: &Path,
    preset: Option<NoisePreset>,
    a: Option<f64>,
    b: Option<f64>,
    bayer: bool,
    s: &Settings,
) -> Result<()> {
    let params = match (preset.or(s.noise), a, b) {
        (_, Some(a), Some(b)) => NoiseParams::new(a, b, s.seed).map_err(|e| usage(e.to_string()))?,
        (Some(p), None, None) => p.params(s.seed),
        (None, None, None) => return Err(usage("give --preset or both --a and --b")),
        _ => return Err(usage("--a and --b go together")),
    };
    let name = stem(input);
    let img = Input::load(input, s)?;
    let img = if bayer { Input::Bayer(img.to_bayer(s)?) } else { img };
    match img {
        Input::Bayer(bay) => {
            let noisy = add_noise_bayer(&bay, &params)?;
            save_bayer(out_file(s, &format!("{name}_noisy.png"))?, &noisy, true)?;
        }
        Input::Gray(p) | Input::Rgb(p) => {
            let noisy = add_noise(&p, &params)?;
            let opts = SaveOptions {
                sixteen_bit: true,
                ..SaveOptions::default()
            };
            save_image(out_file(s, &format!("{name}_noisy.png"))?, &noisy, opts)?;
        }
    }
    println!("{name}: a = {:e}, b = {:e}, seed = {}", params.a, params.b, params.seed);
    Ok(())
}

pub fn bench_cmd(input: &Path, s: &Settings) -> Result<()> {
    let bayer = Input::load(input, s)?.to_bayer(s)?;
    let specs = bayerfeat::experiments::bench_specs(s.operator);
    let report = bench(&bayer, &specs, s.runs).map_err(|e| usage(e.to_string()))?;
    let mut table = CsvTable::new([
        "pipeline",
        "wall_time_ms",
        "peak_alloc_bytes",
        "time_ratio",
        "memory_ratio",
    ]);
    for r in &report.rows {
        table.push([
            r.name.clone(),
            format!("{:.4}", r.wall_time_ms),
            r.peak_alloc_bytes.to_string(),
            format!("{:.4}", r.time_ratio),
            format!("{:.4}", r.memory_ratio),
        ]);
    }
    emit(s, &format!("{}_bench.csv", stem(input)), &table)
}

pub fn table_cmd(exp: Experiment, dataset: &Path, s: &Settings) -> Result<()> {
    let opts = experiment_options(s);
    let table = run_table(exp, dataset, &s.out, &opts)?;
    print!("{}", table.to_csv_string()?);
    log::info!("wrote {}", s.out.join(format!("{exp}.csv")).display());
    Ok(())
}
