//! Landmark text files: one `model_index x y z` line per correspondence.
//! Mask / index-list files hold one vertex index per line. `#` starts a
//! comment in both.

use std::fmt::Write as _;
use std::path::Path;

use mlwave_core::geom::Vec3;
use mlwave_core::scan::LandmarkSet;

use crate::error::Error;

pub fn write_landmarks(path: &Path, landmarks: &LandmarkSet) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# model_index x y z");
    for (v, p) in landmarks.iter() {
        let _ = writeln!(out, "{v} {} {} {}", p.x, p.y, p.z);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_landmarks(path: &Path) -> Result<LandmarkSet, Error> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
    let mut indices = Vec::new();
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(Error::format(
                &p,
                format!("line {}: expected 'model_index x y z'", lineno + 1),
            ));
        }
        let idx: usize = tokens[0].parse().map_err(|_| {
            Error::format(&p, format!("line {}: bad vertex index", lineno + 1))
        })?;
        let coord = |i: usize| -> Result<f64, Error> {
            tokens[i]
                .parse()
                .map_err(|_| Error::format(&p, format!("line {}: bad coordinate", lineno + 1)))
        };
        indices.push(idx);
        points.push(Vec3::new(coord(1)?, coord(2)?, coord(3)?));
    }
    LandmarkSet::new(indices, points).map_err(Error::from)
}

/// Mask / landmark-vertex lists: one index per line.
pub fn write_index_list(path: &Path, indices: &[usize]) -> Result<(), Error> {
    let mut out = String::new();
    for v in indices {
        let _ = writeln!(out, "{v}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_index_list(path: &Path) -> Result<Vec<usize>, Error> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse().map_err(|_| {
            Error::format(&p, format!("line {}: bad vertex index", lineno + 1))
        })?);
    }
    Ok(out)
}
