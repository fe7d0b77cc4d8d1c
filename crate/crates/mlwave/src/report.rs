//! CSV report writers. Every report starts with the effective
//! configuration echoed as `# key = value` comment lines, so results stay
//! traceable to the run that produced them.

use std::fmt::Write as _;
use std::path::Path;

use mlwave_core::fitting::{FitResult, FitStage};
use mlwave_core::synth::ErrorReport;
use mlwave_core::wavelet::WaveletCoefficients;

use crate::error::Error;

/// Flat key/value view of the effective run configuration.
#[derive(Clone, Debug, Default)]
pub struct ConfigEcho {
    pub entries: Vec<(String, String)>,
}

impl ConfigEcho {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    fn header(&self, out: &mut String) {
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
    }
}

fn write_text(path: &Path, text: String) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Per-run fitting report: energy trace per pass, then per-vertex
/// distances with a summary.
pub fn write_fit_report(path: &Path, cfg: &ConfigEcho, result: &FitResult) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# mlwave fit report");
    cfg.header(&mut out);
    let _ = writeln!(out, "section,stage,level,pass,energy_start,energy_end,blocks");
    for pass in &result.energy_trace {
        let stage = match pass.stage {
            FitStage::Initialization => "init",
            FitStage::Surface => "surface",
            FitStage::JointRefinement => "joint",
        };
        let _ = writeln!(
            out,
            "pass,{stage},{},{},{},{},{}",
            pass.level,
            pass.pass,
            pass.energies.first().copied().unwrap_or(0.0),
            pass.energies.last().copied().unwrap_or(0.0),
            pass.energies.len().saturating_sub(1),
        );
    }
    let _ = writeln!(out, "section,vertex,distance_mm");
    for (v, d) in result.per_vertex_distance.iter().enumerate() {
        let _ = writeln!(out, "vertex,{v},{d}");
    }
    let n = result.per_vertex_distance.len().max(1) as f64;
    let mean: f64 = result.per_vertex_distance.iter().sum::<f64>() / n;
    let _ = writeln!(out, "# mean_distance_mm = {mean}");
    write_text(path, out)
}

/// Distance-to-data report: per-vertex distances, summary, cumulative curve.
pub fn write_eval_report(path: &Path, cfg: &ConfigEcho, report: &ErrorReport) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# mlwave eval report");
    cfg.header(&mut out);
    let _ = writeln!(out, "# median_mm = {}", report.summary.median);
    let _ = writeln!(out, "# mean_mm = {}", report.summary.mean);
    let _ = writeln!(
        out,
        "# fraction_below_1mm = {}",
        report.summary.fraction_below_1mm
    );
    let _ = writeln!(out, "section,vertex,distance_mm");
    for (v, d) in report.measured.iter().zip(&report.per_vertex) {
        let _ = writeln!(out, "vertex,{v},{d}");
    }
    let _ = writeln!(out, "section,threshold_mm,fraction");
    for (t, f) in &report.cumulative {
        let _ = writeln!(out, "curve,{t},{f}");
    }
    write_text(path, out)
}

/// Per-frame tracking summary.
pub fn write_track_report(
    path: &Path,
    cfg: &ConfigEcho,
    frames: &[FitResult],
) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# mlwave track report");
    cfg.header(&mut out);
    let _ = writeln!(out, "frame,final_energy,mean_distance_mm,median_distance_mm");
    for (t, frame) in frames.iter().enumerate() {
        let final_energy = frame
            .energy_trace
            .last()
            .and_then(|p| p.energies.last())
            .copied()
            .unwrap_or(0.0);
        let mut sorted = frame.per_vertex_distance.clone();
        sorted.sort_by(f64::total_cmp);
        let mean: f64 = sorted.iter().sum::<f64>() / sorted.len().max(1) as f64;
        let median = if sorted.is_empty() {
            0.0
        } else if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        let _ = writeln!(out, "{t},{final_energy},{mean},{median}");
    }
    write_text(path, out)
}

/// Coefficient dump for the `transform` subcommand:
/// `k,level,kind,sx,sy,sz`.
pub fn write_coefficients_csv(
    path: &Path,
    cfg: &ConfigEcho,
    coeffs: &WaveletCoefficients,
) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# mlwave wavelet coefficients");
    cfg.header(&mut out);
    let _ = writeln!(out, "k,level,kind,sx,sy,sz");
    for (k, c) in coeffs.coeffs().iter().enumerate() {
        let meta = coeffs.meta(k).map_err(Error::from)?;
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{}",
            meta.level,
            meta.kind.tag(),
            c.x,
            c.y,
            c.z
        );
    }
    write_text(path, out)
}
