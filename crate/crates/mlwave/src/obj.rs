//! OBJ files for quad-grid surfaces. Vertices are written row-major and the
//! grid geometry goes into a header comment, so a reader can rebuild the
//! template without guessing:
//!
//! ```text
//! # mlwave quadgrid rows=17 cols=17 levels=4
//! v x y z
//! ...
//! f a b c d        (1-based, one quad per grid cell)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use mlwave_core::geom::Vec3;
use mlwave_core::grid::QuadGridShape;

use crate::error::Error;

pub fn write_obj(path: &Path, shape: &QuadGridShape) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# mlwave quadgrid rows={} cols={} levels={}",
        shape.rows(),
        shape.cols(),
        shape.levels()
    );
    let _ = writeln!(out, "# row-major vertex order");
    for p in shape.positions() {
        let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
    }
    let cols = shape.cols();
    for r in 0..shape.rows() - 1 {
        for c in 0..cols - 1 {
            let a = r * cols + c + 1;
            let b = a + 1;
            let d = a + cols;
            let e = d + 1;
            let _ = writeln!(out, "f {a} {b} {e} {d}");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_obj(path: &Path) -> Result<QuadGridShape, Error> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let p = path.display().to_string();
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut positions = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            if line.contains("quadgrid") {
                let mut rows = None;
                let mut cols = None;
                let mut levels = None;
                for token in line.split_whitespace() {
                    if let Some(v) = token.strip_prefix("rows=") {
                        rows = v.parse::<usize>().ok();
                    } else if let Some(v) = token.strip_prefix("cols=") {
                        cols = v.parse::<usize>().ok();
                    } else if let Some(v) = token.strip_prefix("levels=") {
                        levels = v.parse::<usize>().ok();
                    }
                }
                if let (Some(r), Some(c), Some(l)) = (rows, cols, levels) {
                    dims = Some((r, c, l));
                }
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("v ") {
            let mut it = rest.split_whitespace();
            let mut coord = |name: &str| -> Result<f64, Error> {
                it.next()
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::format(&p, format!("line {}: bad {name} coordinate", lineno + 1))
                    })
            };
            positions.push(Vec3::new(coord("x")?, coord("y")?, coord("z")?));
        }
        // faces and other records are implied by the grid; skipped on read
    }
    let Some((rows, cols, levels)) = dims else {
        return Err(Error::format(
            &p,
            "missing '# mlwave quadgrid rows=.. cols=.. levels=..' header comment",
        ));
    };
    QuadGridShape::new(rows, cols, levels, positions).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn roundtrip_preserves_exact_positions() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let positions: Vec<Vec3> = (0..9 * 17)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                )
            })
            .collect();
        let shape = QuadGridShape::new(9, 17, 3, positions).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.obj");
        write_obj(&path, &shape).unwrap();
        let back = read_obj(&path).unwrap();
        // shortest-roundtrip decimal formatting reparses to the same bits
        assert_eq!(back, shape);
    }

    #[test]
    fn missing_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plain.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\n").unwrap();
        assert!(matches!(read_obj(&path), Err(Error::Format { .. })));
    }
}
