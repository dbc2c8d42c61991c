//! Flat `key = value` config files and their merge with command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bayerfeat::gradient::GradientOperator;
use bayerfeat::noise::NoisePreset;
use bayerfeat::sift::SiftConfig;
use bayerfeat::CfaPattern;

/// Bad flags, bad config lines or bad parameter values. Maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const KEYS: &[&str] = &[
    "pattern",
    "operator",
    "out",
    "seed",
    "jobs",
    "runs",
    "octaves",
    "scales",
    "contrast_threshold",
    "edge_ratio",
    "tolerance",
    "ratio",
    "noise",
];

/// Parses config text. Later lines override earlier ones; text after `#` is
/// a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key = value", n + 1)))?;
        let key = k.trim().to_ascii_lowercase().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(UsageError(format!("config line {}: unknown key '{key}'", n + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Options shared by every subcommand after merging flags over the config
/// file.
#[derive(Clone, Debug)]
pub struct Settings {
    /// `None` when neither flag nor config named a pattern.
    pub pattern: Option<CfaPattern>,
    pub operator: GradientOperator,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub runs: usize,
    pub tolerance: f64,
    pub ratio: f64,
    pub noise: Option<NoisePreset>,
    pub sift: SiftConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            pattern: None,
            operator: GradientOperator::CentralDifference,
            out: PathBuf::from("out"),
            seed: 0,
            jobs: None,
            runs: 5,
            tolerance: 3.0,
            ratio: 0.8,
            noise: None,
            sift: SiftConfig::default(),
        }
    }
}

/// Command-line values for the shared options; `None` defers to the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub pattern: Option<CfaPattern>,
    pub operator: Option<GradientOperator>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    v.parse()
        .map_err(|e| UsageError(format!("config key '{key}': {e}")))
}

impl Settings {
    pub fn pattern_or_default(&self) -> CfaPattern {
        self.pattern.unwrap_or(CfaPattern::Rggb)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, UsageError> {
        let mut s = Settings::default();
        for (k, v) in map {
            match k.as_str() {
                "pattern" => s.pattern = Some(value(k, v)?),
                "operator" => s.operator = value(k, v)?,
                "out" => s.out = PathBuf::from(v),
                "seed" => s.seed = value(k, v)?,
                "jobs" => s.jobs = Some(value(k, v)?),
                "runs" => s.runs = value(k, v)?,
                "octaves" => s.sift.scale_space.octaves = value(k, v)?,
                "scales" => s.sift.scale_space.s = value(k, v)?,
                "contrast_threshold" => s.sift.contrast_threshold = value(k, v)?,
                "edge_ratio" => s.sift.edge_ratio = value(k, v)?,
                "tolerance" => s.tolerance = value(k, v)?,
                "ratio" => s.ratio = value(k, v)?,
                "noise" => s.noise = Some(value(k, v)?),
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        Ok(s)
    }

    pub fn load(config: Option<&Path>, flags: &Overrides) -> anyhow::Result<Self> {
        let mut s = match config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", p.display())))?;
                Settings::from_map(&parse_config(&text)?)?
            }
            None => Settings::default(),
        };
        if let Some(p) = flags.pattern {
            s.pattern = Some(p);
        }
        if let Some(o) = flags.operator {
            s.operator = o;
        }
        if let Some(o) = &flags.out {
            s.out = o.clone();
        }
        if let Some(seed) = flags.seed {
            s.seed = seed;
        }
        if let Some(j) = flags.jobs {
            s.jobs = Some(j);
        }
        if s.jobs == Some(0) {
            return Err(usage("--jobs must be at least 1"));
        }
        Ok(s)
    }
}
