//! The binary model format (`.mwm`). Little-endian throughout:
//!
//! ```text
//! magic            8 bytes  "MLWAVMDL"
//! version          u32      (currently 1)
//! rows, cols, levels, m2, m3   u32 each
//! ordering tag     u16 length + UTF-8 bytes
//! landmark count   u32, then that many u32 vertex indices
//! coefficient count u32 (must equal rows*cols)
//! per coefficient:
//!   mean           3 x f64
//!   core           3*m2*m3 x f64 (mode-1 fastest, then mode-2, mode-3)
//!   id_mode_mean   m2 x f64,  expr_mode_mean  m3 x f64
//!   id_scale       m2 x f64,  expr_scale      m3 x f64
//!   support count  u32, then count x u32 vertices, count x f64 responses
//! crc32            u32 over every preceding byte (IEEE)
//! ```
//!
//! The writer is fully deterministic, so identical models produce
//! byte-identical files.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use mlwave_core::model::{
    MultilinearCoefficientModel, TemplateInfo, WaveletShapeModel,
};
use mlwave_core::tensor::Mode3Tensor;
use mlwave_core::wavelet::{CoefficientSupport, ORDERING_TAG};
use mlwave_core::Vec3;

use crate::error::Error;

const MAGIC: &[u8; 8] = b"MLWAVMDL";
const VERSION: u32 = 1;

pub fn serialize_model(model: &WaveletShapeModel) -> Result<Vec<u8>, Error> {
    model.validate()?;
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    let w = &mut out;
    w.write_u32::<LittleEndian>(VERSION).unwrap();
    for v in [
        model.template.rows,
        model.template.cols,
        model.template.levels,
        model.m2,
        model.m3,
    ] {
        w.write_u32::<LittleEndian>(v as u32).unwrap();
    }
    let tag = ORDERING_TAG.as_bytes();
    w.write_u16::<LittleEndian>(tag.len() as u16).unwrap();
    w.extend_from_slice(tag);
    w.write_u32::<LittleEndian>(model.template.landmark_indices.len() as u32)
        .unwrap();
    for &l in &model.template.landmark_indices {
        w.write_u32::<LittleEndian>(l).unwrap();
    }
    w.write_u32::<LittleEndian>(model.coefficient_models.len() as u32)
        .unwrap();
    for (cm, support) in model.coefficient_models.iter().zip(&model.supports) {
        for c in [cm.mean.x, cm.mean.y, cm.mean.z] {
            w.write_f64::<LittleEndian>(c).unwrap();
        }
        for &v in cm.core.values() {
            w.write_f64::<LittleEndian>(v).unwrap();
        }
        for list in [&cm.id_mode_mean, &cm.expr_mode_mean, &cm.id_scale, &cm.expr_scale] {
            for &v in list.iter() {
                w.write_f64::<LittleEndian>(v).unwrap();
            }
        }
        w.write_u32::<LittleEndian>(support.vertices.len() as u32)
            .unwrap();
        for &v in &support.vertices {
            w.write_u32::<LittleEndian>(v).unwrap();
        }
        for &r in &support.responses {
            w.write_f64::<LittleEndian>(r).unwrap();
        }
    }
    let crc = crc32fast::hash(&out);
    out.write_u32::<LittleEndian>(crc).unwrap();
    Ok(out)
}

pub fn deserialize_model(bytes: &[u8]) -> Result<WaveletShapeModel, Error> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err(Error::ChecksumMismatch);
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::ChecksumMismatch);
    }
    let mut r = Cursor::new(body);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::ChecksumMismatch)?;
    if &magic != MAGIC {
        return Err(Error::FormatVersionMismatch(
            "bad magic; not a model file".into(),
        ));
    }
    let trunc = |_: std::io::Error| Error::ChecksumMismatch;
    let version = r.read_u32::<LittleEndian>().map_err(trunc)?;
    if version != VERSION {
        return Err(Error::FormatVersionMismatch(format!(
            "file version {version}, supported {VERSION}"
        )));
    }
    let mut dims = [0usize; 5];
    for d in dims.iter_mut() {
        *d = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    }
    let [rows, cols, levels, m2, m3] = dims;
    let tag_len = r.read_u16::<LittleEndian>().map_err(trunc)? as usize;
    let mut tag = vec![0u8; tag_len];
    r.read_exact(&mut tag).map_err(trunc)?;
    if tag != ORDERING_TAG.as_bytes() {
        return Err(Error::FormatVersionMismatch(format!(
            "coefficient ordering '{}' unsupported (expected '{ORDERING_TAG}')",
            String::from_utf8_lossy(&tag)
        )));
    }
    let landmark_count = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let mut landmark_indices = Vec::with_capacity(landmark_count);
    for _ in 0..landmark_count {
        landmark_indices.push(r.read_u32::<LittleEndian>().map_err(trunc)?);
    }
    let n = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    if n != rows * cols {
        return Err(Error::format(
            "<model>",
            "coefficient count disagrees with grid dims",
        ));
    }
    let mut coefficient_models = Vec::with_capacity(n);
    let mut supports = Vec::with_capacity(n);
    for _ in 0..n {
        let mut mean = [0.0; 3];
        for m in mean.iter_mut() {
            *m = r.read_f64::<LittleEndian>().map_err(trunc)?;
        }
        let mut core_values = vec![0.0; 3 * m2 * m3];
        for v in core_values.iter_mut() {
            *v = r.read_f64::<LittleEndian>().map_err(trunc)?;
        }
        let mut read_vec = |len: usize| -> Result<Vec<f64>, Error> {
            let mut out = vec![0.0; len];
            for v in out.iter_mut() {
                *v = r.read_f64::<LittleEndian>().map_err(trunc)?;
            }
            Ok(out)
        };
        let id_mode_mean = read_vec(m2)?;
        let expr_mode_mean = read_vec(m3)?;
        let id_scale = read_vec(m2)?;
        let expr_scale = read_vec(m3)?;
        let support_len = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
        let mut vertices = Vec::with_capacity(support_len);
        for _ in 0..support_len {
            vertices.push(r.read_u32::<LittleEndian>().map_err(trunc)?);
        }
        let mut responses = vec![0.0; support_len];
        for v in responses.iter_mut() {
            *v = r.read_f64::<LittleEndian>().map_err(trunc)?;
        }
        coefficient_models.push(MultilinearCoefficientModel {
            mean: Vec3::new(mean[0], mean[1], mean[2]),
            core: Mode3Tensor::from_values((3, m2, m3), core_values)?,
            id_mode_mean,
            expr_mode_mean,
            id_scale,
            expr_scale,
        });
        supports.push(CoefficientSupport {
            vertices,
            responses,
        });
    }
    if r.position() != body.len() as u64 {
        return Err(Error::format("<model>", "trailing bytes after coefficients"));
    }
    let model = WaveletShapeModel {
        template: TemplateInfo {
            rows,
            cols,
            levels,
            landmark_indices,
        },
        m2,
        m3,
        coefficient_models,
        supports,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &WaveletShapeModel) -> Result<(), Error> {
    let bytes = serialize_model(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: &Path) -> Result<WaveletShapeModel, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    deserialize_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mlwave_core::synth::{generate_population, SyntheticPopulationSpec};
    use mlwave_core::training::{train, TrainOptions};

    fn trained_model() -> WaveletShapeModel {
        let spec = SyntheticPopulationSpec::face_like(3, 9, 9, 3, 4, 3);
        let ts = generate_population(&spec).unwrap();
        train(
            &ts,
            &TrainOptions {
                landmark_indices: vec![4, 40, 76],
                ..TrainOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_is_field_exact_and_byte_stable() {
        let model = trained_model();
        let bytes = serialize_model(&model).unwrap();
        let back = deserialize_model(&bytes).unwrap();
        assert_eq!(back, model);
        let bytes2 = serialize_model(&back).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn truncation_is_a_checksum_mismatch() {
        let model = trained_model();
        let bytes = serialize_model(&model).unwrap();
        let cut = &bytes[..bytes.len() - 9];
        assert!(matches!(
            deserialize_model(cut),
            Err(Error::ChecksumMismatch)
        ));
    }

    #[test]
    fn corruption_is_a_checksum_mismatch() {
        let model = trained_model();
        let mut bytes = serialize_model(&model).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        assert!(matches!(
            deserialize_model(&bytes),
            Err(Error::ChecksumMismatch)
        ));
    }

    #[test]
    fn unknown_version_is_reported() {
        let model = trained_model();
        let mut bytes = serialize_model(&model).unwrap();
        bytes[8] = 9; // version field
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            deserialize_model(&bytes),
            Err(Error::FormatVersionMismatch(_))
        ));
    }
}
