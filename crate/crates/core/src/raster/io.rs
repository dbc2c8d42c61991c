//! PNG/PNM image I/O, CSV tables and raw float dumps.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};

use super::{require_even, BayerImage, CfaPattern, PlanarImage};
use crate::error::{Error, Result};

/// An image as decoded from disk: either plain gray/RGB or a declared mosaic.
#[derive(Clone, Debug)]
pub enum LoadedImage {
    Planar(PlanarImage),
    Bayer(BayerImage),
}

/// Loads an image; when `pattern` is given (or a `.cfa` sidecar exists next
/// to the file) the data is interpreted as a Bayer mosaic.
pub fn load_image(path: impl AsRef<Path>, pattern: Option<CfaPattern>) -> Result<LoadedImage> {
    let path = path.as_ref();
    let pattern = match pattern {
        Some(p) => Some(p),
        None => read_sidecar(path)?,
    };
    match pattern {
        Some(p) => Ok(LoadedImage::Bayer(load_bayer(path, Some(p))?)),
        None => Ok(LoadedImage::Planar(load_planar(path)?)),
    }
}

/// Loads a gray or RGB image. 8- and 16-bit samples map to `[0, 1]` by
/// dividing by `2^n − 1`; alpha is discarded.
pub fn load_planar(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => planar_from(w, h, 1, buf.as_raw(), 255.0),
        DynamicImage::ImageLumaA8(_) => {
            let buf = img.to_luma8();
            planar_from(w, h, 1, buf.as_raw(), 255.0)
        }
        DynamicImage::ImageRgb8(buf) => planar_from(w, h, 3, buf.as_raw(), 255.0),
        DynamicImage::ImageRgba8(_) => {
            let buf = img.to_rgb8();
            planar_from(w, h, 3, buf.as_raw(), 255.0)
        }
        DynamicImage::ImageLuma16(buf) => planar_from(w, h, 1, buf.as_raw(), 65535.0),
        DynamicImage::ImageLumaA16(_) => {
            let buf = img.to_luma16();
            planar_from(w, h, 1, buf.as_raw(), 65535.0)
        }
        DynamicImage::ImageRgb16(buf) => planar_from(w, h, 3, buf.as_raw(), 65535.0),
        DynamicImage::ImageRgba16(_) => {
            let buf = img.to_rgb16();
            planar_from(w, h, 3, buf.as_raw(), 65535.0)
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: sample type {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Loads a single-channel file as a mosaic. Without an explicit pattern the
/// `<file>.cfa` sidecar must name one.
pub fn load_bayer(path: impl AsRef<Path>, pattern: Option<CfaPattern>) -> Result<BayerImage> {
    let path = path.as_ref();
    let pattern = match pattern {
        Some(p) => p,
        None => read_sidecar(path)?.ok_or_else(|| {
            Error::invalid(format!(
                "{}: no CFA pattern given and no .cfa sidecar found",
                path.display()
            ))
        })?,
    };
    let img = load_planar(path)?;
    if img.channels() != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            actual: img.channels(),
        });
    }
    require_even(img.width(), img.height())?;
    let (w, h) = (img.width(), img.height());
    BayerImage::new(w, h, pattern, img.into_samples())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".cfa");
    PathBuf::from(s)
}

fn read_sidecar(path: &Path) -> Result<Option<CfaPattern>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&side)?;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let value = match line.split_once('=') {
            Some((k, v)) if k.trim() == "pattern" => v.trim(),
            Some(_) => continue,
            None => line,
        };
        return value.parse().map(Some);
    }
    Err(Error::invalid(format!("{}: no pattern entry", side.display())))
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let file = File::open(path)?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(Error::Io)?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: {:?}",
                path.display(),
                other
            )))
        }
        None => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: unrecognized signature",
                path.display()
            )))
        }
    }
    reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => {
            Error::UnsupportedFormat(format!("{}: {u}", path.display()))
        }
        image::ImageError::IoError(io) => Error::Decode {
            path: path.to_owned(),
            reason: io.to_string(),
        },
        other => Error::Decode {
            path: path.to_owned(),
            reason: other.to_string(),
        },
    })
}

fn planar_from<T: Copy + Into<f64>>(
    w: usize,
    h: usize,
    channels: usize,
    raw: &[T],
    max: f64,
) -> Result<PlanarImage> {
    let n = w * h;
    let mut data = vec![0.0; n * channels];
    for (i, px) in raw.chunks_exact(channels).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * n + i] = v.into() / max;
        }
    }
    PlanarImage::new(w, h, channels, data)
}

/// Encoding options for [`save_image`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SaveOptions {
    /// Write `1 − v` (gradient maps are conventionally shown this way).
    pub inverse: bool,
    /// 16-bit samples instead of 8-bit.
    pub sixteen_bit: bool,
    /// Multiply before clamping; gradient magnitudes are usually small.
    pub gain: Option<f64>,
}

/// Writes a 1- or 3-channel image as PNG, PGM or PPM depending on the file
/// extension. Samples are clamped to `[0, 1]`.
pub fn save_image(path: impl AsRef<Path>, img: &PlanarImage, opts: SaveOptions) -> Result<()> {
    let path = path.as_ref();
    let format = output_format(path)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let n = img.width() * img.height();
    let gain = opts.gain.unwrap_or(1.0);
    let value = |c: usize, i: usize| {
        let v = (img.plane(c)[i] * gain).clamp(0.0, 1.0);
        if opts.inverse {
            1.0 - v
        } else {
            v
        }
    };
    let dynimg = match (img.channels(), opts.sixteen_bit) {
        (1, false) => {
            let raw: Vec<u8> = (0..n).map(|i| (value(0, i) * 255.0).round() as u8).collect();
            DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, raw).expect("buffer size"))
        }
        (1, true) => {
            let raw: Vec<u16> = (0..n)
                .map(|i| (value(0, i) * 65535.0).round() as u16)
                .collect();
            DynamicImage::ImageLuma16(image::ImageBuffer::from_raw(w, h, raw).expect("buffer size"))
        }
        (3, false) => {
            let raw: Vec<u8> = (0..n)
                .flat_map(|i| (0..3).map(move |c| (c, i)))
                .map(|(c, i)| (value(c, i) * 255.0).round() as u8)
                .collect();
            DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, raw).expect("buffer size"))
        }
        (3, true) => {
            let raw: Vec<u16> = (0..n)
                .flat_map(|i| (0..3).map(move |c| (c, i)))
                .map(|(c, i)| (value(c, i) * 65535.0).round() as u16)
                .collect();
            DynamicImage::ImageRgb16(image::ImageBuffer::from_raw(w, h, raw).expect("buffer size"))
        }
        (c, _) => {
            return Err(Error::ChannelCount {
                expected: 3,
                actual: c,
            })
        }
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    dynimg.save_with_format(path, format).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Decode {
            path: path.to_owned(),
            reason: other.to_string(),
        },
    })
}

/// Writes a mosaic as a single-channel image plus its `.cfa` sidecar.
pub fn save_bayer(path: impl AsRef<Path>, img: &BayerImage, sixteen_bit: bool) -> Result<()> {
    let path = path.as_ref();
    save_image(
        path,
        &img.to_planar(),
        SaveOptions {
            sixteen_bit,
            ..Default::default()
        },
    )?;
    fs::write(sidecar_path(path), format!("pattern = {}\n", img.pattern()))?;
    Ok(())
}

fn output_format(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "pgm" | "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: output extension must be png, pgm or ppm",
            path.display()
        ))),
    }
}

/// A table with a header row; cells are kept as text.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_owned).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

pub fn save_csv(path: impl AsRef<Path>, table: &CsvTable) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, table.to_csv_string()?)?;
    Ok(())
}

/// Raw dump of a single-channel raster: `u32` width, `u32` height, then
/// row-major `f32` samples, all little-endian.
pub fn write_float_dump(path: impl AsRef<Path>, img: &PlanarImage) -> Result<()> {
    img.expect_channels(1)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(img.width() as u32).to_le_bytes())?;
    w.write_all(&(img.height() as u32).to_le_bytes())?;
    for &v in img.samples() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_float_dump(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let truncated = || Error::Decode {
        path: path.to_owned(),
        reason: "truncated float dump".into(),
    };
    if bytes.len() < 8 {
        return Err(truncated());
    }
    let w = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let h = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() != 4 * w * h {
        return Err(truncated());
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    PlanarImage::new(w, h, 1, data)
}
