//! Text manifests.
//!
//! Training manifest: one `identity_id expression_id path` line per shape;
//! the identity/expression ids are arbitrary integers that are compacted
//! into a dense, sorted grid, which must be complete. Frame manifest: one
//! `scan.ply [landmarks.txt]` line per frame. Relative paths resolve
//! against the manifest's directory; `#` starts a comment.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mlwave_core::training::{TrainError, TrainingSet};

use crate::error::Error;
use crate::obj;

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads and validates a complete identity-by-expression training grid.
pub fn read_training_manifest(path: &Path) -> Result<TrainingSet, Error> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries: Vec<(u64, u64, PathBuf)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.splitn(3, char::is_whitespace);
        let bad = || Error::format(&p, format!("line {}: expected 'identity expression path'", lineno + 1));
        let id: u64 = tokens.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let ex: u64 = tokens
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(bad)?;
        let raw = tokens.next().map(str::trim).filter(|t| !t.is_empty()).ok_or_else(bad)?;
        entries.push((id, ex, resolve(base, raw)));
    }
    let identities: Vec<u64> = entries
        .iter()
        .map(|(i, _, _)| *i)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let expressions: Vec<u64> = entries
        .iter()
        .map(|(_, e, _)| *e)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let d2 = identities.len();
    let d3 = expressions.len();
    let mut slots: Vec<Option<PathBuf>> = vec![None; d2 * d3];
    for (id, ex, file) in entries {
        let i = identities.binary_search(&id).expect("from the set");
        let e = expressions.binary_search(&ex).expect("from the set");
        if slots[i * d3 + e].replace(file).is_some() {
            return Err(Error::format(
                &p,
                format!("duplicate sample for identity {id}, expression {ex}"),
            ));
        }
    }
    let mut shapes = Vec::with_capacity(d2 * d3);
    for (slot, file) in slots.into_iter().enumerate() {
        let Some(file) = file else {
            return Err(Error::Train(TrainError::IncompleteGrid {
                expected: d2 * d3,
                got: slot,
            }));
        };
        shapes.push(obj::read_obj(&file)?);
    }
    TrainingSet::new(d2, d3, shapes).map_err(Error::from)
}

pub fn write_training_manifest(
    path: &Path,
    entries: &[(u64, u64, String)],
) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# identity expression path");
    for (i, e, file) in entries {
        let _ = writeln!(out, "{i} {e} {file}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// One tracking frame: the scan path plus an optional landmark file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameEntry {
    pub scan: PathBuf,
    pub landmarks: Option<PathBuf>,
}

pub fn read_frames_manifest(path: &Path) -> Result<Vec<FrameEntry>, Error> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut frames = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let scan = tokens
            .next()
            .map(|t| resolve(base, t))
            .ok_or_else(|| Error::format(&p, "empty frame line"))?;
        let landmarks = tokens.next().map(|t| resolve(base, t));
        frames.push(FrameEntry { scan, landmarks });
    }
    if frames.is_empty() {
        return Err(Error::format(&p, "no frames listed"));
    }
    Ok(frames)
}
