//! `bayerfeat` command-line front end.
//!
//! Exit codes: 0 ok, 1 usage, 2 I/O, 3 invariant violation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bayerfeat::alloc::TrackingAllocator;
use bayerfeat::demosaic::DemosaicMethod;
use bayerfeat::experiments::Experiment;
use bayerfeat::gradient::GradientOperator;
use bayerfeat::noise::NoisePreset;
use bayerfeat::CfaPattern;
use clap::{Args, Parser, Subcommand};

use commands::{HogWindow, PathChoice};
use config::{Overrides, Settings, UsageError};

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

#[derive(Parser, Debug)]
#[command(name = "bayerfeat", version, about = "Gradient, HOG and SIFT features straight from Bayer mosaics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// CFA layout of mosaic inputs, and of the mosaic made from RGB inputs.
    #[arg(long, global = true)]
    pattern: Option<CfaPattern>,
    /// Gradient operator: central or sobel.
    #[arg(long, global = true)]
    operator: Option<GradientOperator>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-image parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reconstruct RGB from a mosaic (RGB inputs are mosaicked first and scored).
    Demosaic {
        input: PathBuf,
        /// Method name, or `all`.
        #[arg(long, default_value = "bilinear")]
        method: String,
    },
    /// Gradient magnitude map.
    Grad {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        path: PathChoice,
        /// Multiplier applied before the inverse-video PNG is written.
        #[arg(long, default_value_t = 4.0)]
        gain: f64,
        /// Also write the raw magnitudes as a float dump.
        #[arg(long)]
        dump: bool,
    },
    /// One-row CSV of mssim, psnr_db and gmsd. With one RGB input, compares
    /// its gray-path and Bayer-path gradient maps; with two, the images.
    Compare {
        input: PathBuf,
        other: Option<PathBuf>,
    },
    /// Gaussian (or DoG) pyramid levels and a manifest CSV.
    Pyramid {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        path: PathChoice,
        #[arg(long)]
        octaves: Option<usize>,
        /// Scales per octave.
        #[arg(long)]
        scales: Option<usize>,
        #[arg(long)]
        dog: bool,
    },
    /// HOG descriptor of one window plus a glyph rendering.
    Hog {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        path: PathChoice,
        #[arg(long, default_value_t = 0)]
        x: usize,
        #[arg(long, default_value_t = 0)]
        y: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        /// Apply `(2v)^0.5` before differentiating (dark, low-bit inputs).
        #[arg(long)]
        gamma: bool,
    },
    /// Keypoint detection, matching and repeatability.
    Sift {
        #[command(subcommand)]
        verb: SiftVerb,
    },
    /// Signal-dependent Gaussian noise.
    Noise {
        input: PathBuf,
        #[arg(long)]
        preset: Option<NoisePreset>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Mosaic the input first and write a mosaic with a `.cfa` sidecar.
        #[arg(long)]
        bayer: bool,
    },
    /// Time and peak allocation of the Bayer-direct and demosaic-first pipelines.
    Bench {
        input: PathBuf,
        /// Timed runs per pipeline (at least 5).
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Reproduce one evaluation table over a directory of RGB images.
    Table {
        /// table2, table3, table5, table6, fig6 or fig16.
        experiment: Experiment,
        #[arg(long)]
        dataset: PathBuf,
        /// Add noise before the color/Bayer split.
        #[arg(long)]
        noise: Option<NoisePreset>,
        #[arg(long)]
        runs: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum SiftVerb {
    /// Oriented keypoints as CSV.
    Detect {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        path: PathChoice,
    },
    /// Descriptor matches between two images, as CSV and a side-by-side PNG.
    Match {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        path: PathChoice,
        /// Nearest/second-nearest distance ratio.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Color versus Bayer repeatability under transforms such as blur5,
    /// scale0.5 or rot20.
    Repeat {
        input: PathBuf,
        #[arg(long = "transform", required = true)]
        transforms: Vec<String>,
        /// Match radius in pixels.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

fn methods(spec: &str) -> Result<Vec<DemosaicMethod>> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(DemosaicMethod::ALL.to_vec());
    }
    spec.split(',')
        .map(|m| m.trim().parse().map_err(|e: bayerfeat::Error| config::usage(e.to_string())))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let flags = Overrides {
        pattern: c.pattern,
        operator: c.operator,
        out: c.out.clone(),
        seed: c.seed,
        jobs: c.jobs,
    };
    let mut s = Settings::load(c.config.as_deref(), &flags)?;
    if let Some(j) = s.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| config::usage(e.to_string()))?;
    }
    match cli.cmd {
        Command::Demosaic { input, method } => commands::demosaic_cmd(&input, &methods(&method)?, &s),
        Command::Grad {
            input,
            path,
            gain,
            dump,
        } => commands::grad_cmd(&input, path, gain, dump, &s),
        Command::Compare { input, other } => commands::compare_cmd(&input, other.as_deref(), &s),
        Command::Pyramid {
            input,
            path,
            octaves,
            scales,
            dog,
        } => {
            if let Some(o) = octaves {
                s.sift.scale_space.octaves = o;
            }
            if let Some(k) = scales {
                s.sift.scale_space.s = k;
            }
            commands::pyramid_cmd(&input, path, dog, &s)
        }
        Command::Hog {
            input,
            path,
            x,
            y,
            width,
            height,
            gamma,
        } => commands::hog_cmd(
            &input,
            path,
            &HogWindow {
                x,
                y,
                width,
                height,
            },
            gamma,
            &s,
        ),
        Command::Sift { verb } => match verb {
            SiftVerb::Detect { input, path } => commands::sift_detect(&input, path, &s),
            SiftVerb::Match {
                first,
                second,
                path,
                ratio,
            } => {
                if let Some(r) = ratio {
                    s.ratio = r;
                }
                commands::sift_match(&first, &second, path, &s)
            }
            SiftVerb::Repeat {
                input,
                transforms,
                tolerance,
            } => {
                if let Some(t) = tolerance {
                    s.tolerance = t;
                }
                commands::sift_repeat(&input, &transforms, &s)
            }
        },
        Command::Noise {
            input,
            preset,
            a,
            b,
            bayer,
        } => commands::noise_cmd(&input, preset, a, b, bayer, &s),
        Command::Bench { input, runs } => {
            if let Some(r) = runs {
                s.runs = r;
            }
            commands::bench_cmd(&input, &s)
        }
        Command::Table {
            experiment,
            dataset,
            noise,
            runs,
        } => {
            if noise.is_some() {
                s.noise = noise;
            }
            if let Some(r) = runs {
                s.runs = r;
            }
            commands::table_cmd(experiment, &dataset, &s)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match e.downcast_ref::<bayerfeat::Error>() {
        Some(
            bayerfeat::Error::Io(_)
            | bayerfeat::Error::Decode { .. }
            | bayerfeat::Error::UnsupportedFormat(_)
            | bayerfeat::Error::EmptyDataset(_),
        ) => 2,
        Some(bayerfeat::Error::InvalidParameter(_)) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
