//! Displacement tables: one line per marker, `index x0 y0 dx dy` in mm.

use std::path::Path;

use crate::error::{Error, Result};
use crate::marker::{DisplacementField, Vec2};

pub const TABLE_HEADER: &str = "# index x0_mm y0_mm dx_mm dy_mm";

pub fn format_displacement_table(initial: &[Vec2], field: &DisplacementField) -> Result<String> {
    if initial.len() != field.len() {
        return Err(Error::LengthMismatch { left: initial.len(), right: field.len() });
    }
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for (i, (m, d)) in initial.iter().zip(&field.vectors).enumerate() {
        s.push_str(&format!("{i} {} {} {} {}\n", m.0, m.1, d.0, d.1));
    }
    Ok(s)
}

pub fn parse_displacement_table(text: &str) -> Result<(Vec<Vec2>, DisplacementField)> {
    let mut initial = Vec::new();
    let mut vectors = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(Error::Parse { line: n + 1, message: format!("expected 5 columns, found {}", parts.len()) });
        }
        let index: usize =
            parts[0].parse().map_err(|_| Error::Parse { line: n + 1, message: "index is not an integer".into() })?;
        if index != initial.len() {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected index {}, found {index}", initial.len()),
            });
        }
        let mut v = [0.0f64; 4];
        for (k, p) in parts[1..].iter().enumerate() {
            v[k] = p.parse().map_err(|_| Error::Parse { line: n + 1, message: format!("`{p}` is not a number") })?;
            if !v[k].is_finite() {
                return Err(Error::Parse { line: n + 1, message: "non-finite value".into() });
            }
        }
        initial.push((v[0], v[1]));
        vectors.push((v[2], v[3]));
    }
    Ok((initial, DisplacementField { vectors }))
}

pub fn write_displacement_table(initial: &[Vec2], field: &DisplacementField, path: &Path) -> Result<()> {
    std::fs::write(path, format_displacement_table(initial, field)?)?;
    Ok(())
}

pub fn read_displacement_table(path: &Path) -> Result<(Vec<Vec2>, DisplacementField)> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::MissingFile { path: path.to_path_buf(), what: "displacement table".into() }
        }
        _ => Error::Io(e),
    })?;
    parse_displacement_table(&text)
}
