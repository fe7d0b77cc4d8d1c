//! Binary little-endian PLY for oriented point clouds: one `vertex` element
//! with `x y z nx ny nz` properties. The writer emits doubles to keep scan
//! round trips exact; the reader accepts `float` or `double` per property
//! and skips unknown vertex properties.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use mlwave_core::geom::Vec3;
use mlwave_core::scan::TargetScan;

use crate::error::Error;

pub fn write_ply(path: &Path, scan: &TargetScan) -> Result<(), Error> {
    let p = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(&p, e))?;
    let mut w = BufWriter::new(file);
    let header = format!(
        "ply\nformat binary_little_endian 1.0\ncomment mlwave oriented point cloud\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty double nx\nproperty double ny\nproperty double nz\nend_header\n",
        scan.len()
    );
    w.write_all(header.as_bytes()).map_err(|e| Error::io(&p, e))?;
    for (pt, n) in scan.points().iter().zip(scan.normals()) {
        for v in [pt.x, pt.y, pt.z, n.x, n.y, n.z] {
            w.write_f64::<LittleEndian>(v).map_err(|e| Error::io(&p, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&p, e))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    F32,
    F64,
}

impl ScalarType {
    fn parse(token: &str) -> Option<ScalarType> {
        match token {
            "float" | "float32" => Some(ScalarType::F32),
            "double" | "float64" => Some(ScalarType::F64),
            _ => None,
        }
    }

    fn read(self, r: &mut impl Read) -> std::io::Result<f64> {
        match self {
            ScalarType::F32 => Ok(r.read_f32::<LittleEndian>()? as f64),
            ScalarType::F64 => r.read_f64::<LittleEndian>(),
        }
    }
}

pub fn read_ply(path: &Path) -> Result<TargetScan, Error> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&p, e))?;
    let mut r = BufReader::new(file);

    // header is ASCII lines terminated by `end_header`
    let mut header = String::new();
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)
            .map_err(|e| Error::io(&p, e))?;
        header.push(byte[0] as char);
        if header.ends_with("end_header\n") || header.ends_with("end_header\r\n") {
            break;
        }
        if header.len() > 1 << 16 {
            return Err(Error::format(&p, "header too large or unterminated"));
        }
    }

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::format(&p, "not a PLY file"));
    }
    let mut count: Option<usize> = None;
    let mut properties: Vec<(ScalarType, String)> = Vec::new();
    let mut in_vertex_element = false;
    for line in lines {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("format") => {
                if tokens.next() != Some("binary_little_endian") {
                    return Err(Error::format(&p, "only binary_little_endian is supported"));
                }
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tokens.next().unwrap_or("");
                if name == "vertex" {
                    in_vertex_element = true;
                    count = tokens.next().and_then(|t| t.parse().ok());
                } else {
                    if count.is_none() {
                        return Err(Error::format(
                            &p,
                            "the vertex element must come before other elements",
                        ));
                    }
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue;
                }
                let ty = tokens.next().unwrap_or("");
                if ty == "list" {
                    return Err(Error::format(&p, "list properties on vertices unsupported"));
                }
                let Some(scalar) = ScalarType::parse(ty) else {
                    return Err(Error::format(&p, format!("unsupported property type {ty}")));
                };
                let name = tokens.next().unwrap_or("").to_string();
                properties.push((scalar, name));
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let Some(count) = count else {
        return Err(Error::format(&p, "missing vertex element"));
    };
    let find = |name: &str| properties.iter().position(|(_, n)| n == name);
    let needed: Vec<usize> = ["x", "y", "z", "nx", "ny", "nz"]
        .iter()
        .map(|n| find(n).ok_or_else(|| Error::format(&p, format!("missing property {n}"))))
        .collect::<Result<_, _>>()?;

    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    let mut record = vec![0.0f64; properties.len()];
    for _ in 0..count {
        for (slot, (ty, _)) in record.iter_mut().zip(&properties) {
            *slot = ty.read(&mut r).map_err(|e| Error::io(&p, e))?;
        }
        points.push(Vec3::new(
            record[needed[0]],
            record[needed[1]],
            record[needed[2]],
        ));
        // f32 writers leave normals slightly off unit length; renormalize
        // only when needed so exact files round-trip bit-for-bit
        let n = Vec3::new(record[needed[3]], record[needed[4]], record[needed[5]]);
        let n = if (n.norm() - 1.0).abs() > 1e-9 {
            n.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0))
        } else {
            n
        };
        normals.push(n);
    }
    TargetScan::new(points, normals, None).map_err(Error::from)
}
