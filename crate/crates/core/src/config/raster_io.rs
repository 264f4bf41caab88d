//! Raster files.
//!
//! Height maps use a 16-line ASCII header followed by row-major `f32`
//! little-endian samples:
//!
//! ```text
//! TACSIM-RASTER
//! version 1
//! width 320
//! height 240
//! pitch 0.06
//! units mm
//! dtype f32le
//! order row-major
//! #
//! ...                (padded with `#` lines to 16 lines)
//! ```
//!
//! They can also be exchanged as 16-bit grayscale PNG with a caller-declared
//! mm-per-level scale. Tactile images are 8-bit RGB PNG.

use std::io::Write;
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::raster::{HeightMap, TactileImage};

pub const RASTER_MAGIC: &str = "TACSIM-RASTER";
pub const RASTER_VERSION: u32 = 1;
pub const HEADER_LINES: usize = 16;
/// Upper bound on samples accepted from a file.
pub const MAX_SAMPLES: usize = 1 << 28;

pub fn encode_raster(hm: &HeightMap) -> Vec<u8> {
    let mut lines = vec![
        RASTER_MAGIC.to_string(),
        format!("version {RASTER_VERSION}"),
        format!("width {}", hm.width()),
        format!("height {}", hm.height()),
        format!("pitch {}", hm.pitch()),
        "units mm".to_string(),
        "dtype f32le".to_string(),
        "order row-major".to_string(),
    ];
    while lines.len() < HEADER_LINES {
        lines.push("#".to_string());
    }
    let mut out = Vec::with_capacity(hm.data().len() * 4 + 256);
    for l in lines {
        out.extend_from_slice(l.as_bytes());
        out.push(b'\n');
    }
    for v in hm.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn header_value<'a>(line: &'a str, key: &str, index: usize) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| Error::Parse { line: index + 1, message: format!("expected `{key} <value>`, found `{line}`") })
}

pub fn decode_raster(bytes: &[u8]) -> Result<HeightMap> {
    let mut pos = 0;
    let mut lines = Vec::with_capacity(HEADER_LINES);
    for i in 0..HEADER_LINES {
        let end = bytes[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::Format(format!("truncated header: {i} of {HEADER_LINES} lines")))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::Parse { line: i + 1, message: "header is not UTF-8".into() })?;
        lines.push(line);
        pos += end + 1;
    }
    if lines[0] != RASTER_MAGIC {
        return Err(Error::Format(format!("bad magic `{}`, expected `{RASTER_MAGIC}`", lines[0])));
    }
    let version: u32 = header_value(lines[1], "version", 1)?
        .parse()
        .map_err(|_| Error::Parse { line: 2, message: "version is not an integer".into() })?;
    if version != RASTER_VERSION {
        return Err(Error::Format(format!("unsupported raster version {version}")));
    }
    let parse_usize = |i: usize, key: &str| -> Result<usize> {
        header_value(lines[i], key, i)?
            .parse()
            .map_err(|_| Error::Parse { line: i + 1, message: format!("{key} is not a non-negative integer") })
    };
    let width = parse_usize(2, "width")?;
    let height = parse_usize(3, "height")?;
    let pitch: f64 = header_value(lines[4], "pitch", 4)?
        .parse()
        .map_err(|_| Error::Parse { line: 5, message: "pitch is not a number".into() })?;
    if header_value(lines[5], "units", 5)? != "mm" {
        return Err(Error::Format("only mm units are supported".into()));
    }
    if header_value(lines[6], "dtype", 6)? != "f32le" {
        return Err(Error::Format("only f32le samples are supported".into()));
    }
    if header_value(lines[7], "order", 7)? != "row-major" {
        return Err(Error::Format("only row-major order is supported".into()));
    }
    let samples = width
        .checked_mul(height)
        .filter(|n| *n <= MAX_SAMPLES)
        .ok_or_else(|| Error::Format(format!("raster dimensions {width}x{height} overflow")))?;
    let body = &bytes[pos..];
    if body.len() != samples * 4 {
        return Err(Error::Format(format!(
            "expected {} data bytes for {width}x{height}, found {}",
            samples * 4,
            body.len()
        )));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    HeightMap::from_vec(width, height, pitch, data)
}

pub fn write_raster(hm: &HeightMap, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_raster(hm))?;
    Ok(())
}

pub fn read_raster(path: &Path) -> Result<HeightMap> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::MissingFile { path: path.to_path_buf(), what: "height-map raster".into() }
        }
        _ => Error::Io(e),
    })?;
    decode_raster(&bytes)
}

/// Writes a 16-bit grayscale PNG with `scale` mm per level.
pub fn write_height_png(hm: &HeightMap, path: &Path, scale: f64) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("PNG scale must be > 0 mm/level, got {scale}")));
    }
    let mut levels = Vec::with_capacity(hm.data().len());
    for v in hm.data() {
        let l = (*v as f64 / scale).round();
        if l > u16::MAX as f64 {
            return Err(Error::invalid(format!("height {v} mm exceeds the 16-bit range at {scale} mm/level")));
        }
        levels.push(l as u16);
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(hm.width() as u32, hm.height() as u32, levels)
        .ok_or_else(|| Error::Format("buffer size mismatch".into()))?;
    buf.save(path)?;
    Ok(())
}

/// Reads a grayscale PNG as heights `level * scale` mm.
pub fn read_height_png(path: &Path, scale: f64, pitch: f64) -> Result<HeightMap> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("PNG scale must be > 0 mm/level, got {scale}")));
    }
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|l| (l as f64 * scale) as f32).collect();
    HeightMap::from_vec(w as usize, h as usize, pitch, data)
}

pub fn write_image_png(img: &TactileImage, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
            .ok_or_else(|| Error::Format("buffer size mismatch".into()))?;
    buf.save(path)?;
    Ok(())
}

pub fn read_image_png(path: &Path) -> Result<TactileImage> {
    if !path.is_file() {
        return Err(Error::MissingFile { path: path.to_path_buf(), what: "image".into() });
    }
    let img = image::open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    TactileImage::from_vec(w as usize, h as usize, img.into_raw())
}
