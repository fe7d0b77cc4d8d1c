//! Reproducible synthetic face-like populations, scan corruption, and the
//! distance-to-data error metrics used by the evaluation suite.
//!
//! Synthetic faces are height fields over the grid: a smooth dome plus
//! Gaussian bumps for nose/brow/mouth analogues, with additive identity and
//! expression offset fields scaled by per-sample amplitudes. Heights give
//! valid analytic normals and controllable per-mode factor ranks without
//! any licensed data.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::Vec3;
use crate::grid::QuadGridShape;
// std's inherent float methods shadow this trait when dev-deps link std
#[allow(unused_imports)]
use crate::num::F64Ext;
use crate::scan::{LandmarkSet, ScanError, TargetScan};
use crate::spatial::KdTree;
use crate::training::{TrainError, TrainingSet};

/// One Gaussian bump on the unit parameter square.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    /// Center in unit coordinates (u along columns, v along rows).
    pub center: (f64, f64),
    /// Standard deviation in unit coordinates.
    pub sigma: f64,
    /// Peak height in millimeters.
    pub height: f64,
}

impl Bump {
    fn eval(&self, u: f64, v: f64) -> f64 {
        let du = u - self.center.0;
        let dv = v - self.center.1;
        self.height * (-(du * du + dv * dv) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// A smooth offset field: a weighted sum of Gaussian bumps.
#[derive(Clone, Debug, Default)]
pub struct BumpField {
    pub bumps: Vec<Bump>,
}

impl BumpField {
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval(u, v)).sum()
    }
}

/// Deterministic synthetic population description.
#[derive(Clone, Debug)]
pub struct SyntheticPopulationSpec {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub levels: usize,
    /// Identities (mode-2 count).
    pub identities: usize,
    /// Expressions (mode-3 count).
    pub expressions: usize,
    /// Physical extent of the grid along the longer side, millimeters.
    pub extent: f64,
    /// Base relief shared by every sample.
    pub base: BumpField,
    /// Identity offset fields; per-identity amplitudes scale each field.
    pub identity_fields: Vec<BumpField>,
    /// Expression offset fields.
    pub expression_fields: Vec<BumpField>,
    /// Standard deviation of the per-sample field amplitudes.
    pub amplitude_sigma: f64,
}

impl SyntheticPopulationSpec {
    /// A face-like default: dome + nose/brow/mouth bumps, two identity and
    /// two expression fields (rank 2 per mode, so m2 = m3 = 3 captures the
    /// population exactly).
    pub fn face_like(
        seed: u64,
        rows: usize,
        cols: usize,
        levels: usize,
        identities: usize,
        expressions: usize,
    ) -> Self {
        let b = |cu: f64, cv: f64, sigma: f64, height: f64| Bump {
            center: (cu, cv),
            sigma,
            height,
        };
        Self {
            seed,
            rows,
            cols,
            levels,
            identities,
            expressions,
            extent: 160.0,
            base: BumpField {
                bumps: vec![
                    b(0.5, 0.5, 0.45, 25.0),  // skull dome
                    b(0.5, 0.55, 0.08, 12.0), // nose
                    b(0.32, 0.32, 0.09, 4.0), // brow left
                    b(0.68, 0.32, 0.09, 4.0), // brow right
                    b(0.5, 0.78, 0.10, -3.0), // mouth hollow
                ],
            },
            identity_fields: vec![
                BumpField {
                    bumps: vec![b(0.5, 0.45, 0.18, 3.0), b(0.3, 0.6, 0.12, -2.0)],
                },
                BumpField {
                    bumps: vec![b(0.65, 0.6, 0.14, 2.5), b(0.5, 0.25, 0.2, 1.5)],
                },
            ],
            expression_fields: vec![
                BumpField {
                    bumps: vec![b(0.5, 0.78, 0.12, 4.0), b(0.35, 0.72, 0.08, 2.0)],
                },
                BumpField {
                    bumps: vec![b(0.65, 0.72, 0.08, 2.0), b(0.5, 0.35, 0.15, -1.5)],
                },
            ],
            amplitude_sigma: 1.0,
        }
    }

    fn spacing(&self) -> f64 {
        self.extent / (self.rows.max(self.cols) - 1) as f64
    }

    /// Vertex position of one sample's height field.
    fn position(&self, row: usize, col: usize, id_amp: &[f64], ex_amp: &[f64]) -> Vec3 {
        let u = col as f64 / (self.cols - 1) as f64;
        let v = row as f64 / (self.rows - 1) as f64;
        let mut z = self.base.eval(u, v);
        for (amp, field) in id_amp.iter().zip(&self.identity_fields) {
            z += amp * field.eval(u, v);
        }
        for (amp, field) in ex_amp.iter().zip(&self.expression_fields) {
            z += amp * field.eval(u, v);
        }
        let s = self.spacing();
        Vec3::new(col as f64 * s, row as f64 * s, z)
    }

    /// The per-sample amplitudes, deterministic in the seed.
    pub fn amplitudes(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.amplitude_sigma).expect("positive sigma");
        let id: Vec<Vec<f64>> = (0..self.identities)
            .map(|_| {
                (0..self.identity_fields.len())
                    .map(|_| normal.sample(&mut rng))
                    .collect()
            })
            .collect();
        let ex: Vec<Vec<f64>> = (0..self.expressions)
            .map(|_| {
                (0..self.expression_fields.len())
                    .map(|_| normal.sample(&mut rng))
                    .collect()
            })
            .collect();
        (id, ex)
    }
}

/// A single shape outside the population grid: fresh amplitudes drawn from
/// `holdout_seed`, scaled by `scale` relative to the population sigma. The
/// result is exactly representable by a model trained on the population
/// (same offset fields), which makes it the natural held-out fitting
/// target.
pub fn holdout_shape(spec: &SyntheticPopulationSpec, holdout_seed: u64, scale: f64) -> QuadGridShape {
    let mut rng = ChaCha12Rng::seed_from_u64(holdout_seed);
    let sigma = (spec.amplitude_sigma * scale).abs().max(1e-12);
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let id_amp: Vec<f64> = (0..spec.identity_fields.len())
        .map(|_| normal.sample(&mut rng))
        .collect();
    let ex_amp: Vec<f64> = (0..spec.expression_fields.len())
        .map(|_| normal.sample(&mut rng))
        .collect();
    let positions = (0..spec.rows * spec.cols)
        .map(|vtx| spec.position(vtx / spec.cols, vtx % spec.cols, &id_amp, &ex_amp))
        .collect();
    QuadGridShape::new(spec.rows, spec.cols, spec.levels, positions)
        .expect("spec dims validated by construction")
}

/// Generates the complete identity-by-expression population.
pub fn generate_population(spec: &SyntheticPopulationSpec) -> Result<TrainingSet, TrainError> {
    let (id_amps, ex_amps) = spec.amplitudes();
    let mut shapes = Vec::with_capacity(spec.identities * spec.expressions);
    for id_amp in &id_amps {
        for ex_amp in &ex_amps {
            let positions = (0..spec.rows * spec.cols)
                .map(|vtx| spec.position(vtx / spec.cols, vtx % spec.cols, id_amp, ex_amp))
                .collect();
            shapes.push(
                QuadGridShape::new(spec.rows, spec.cols, spec.levels, positions)
                    .expect("spec dims validated by construction"),
            );
        }
    }
    TrainingSet::new(spec.identities, spec.expressions, shapes)
}

/// How to corrupt a sampled scan; corruptions apply in the given order.
#[derive(Clone, Debug)]
pub enum Corruption {
    /// Isotropic Gaussian position noise, millimeters.
    Noise { sigma: f64 },
    /// Deletes every point inside the sphere.
    OcclusionSphere { center: Vec3, radius: f64 },
    /// Keeps each point independently with the given probability.
    Subsample { fraction: f64 },
}

/// Scan sampling options.
#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub seed: u64,
    /// Jittered samples per grid cell edge (2 means 2x2 per cell).
    pub samples_per_cell: usize,
    pub corruptions: Vec<Corruption>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples_per_cell: 2,
            corruptions: Vec::new(),
        }
    }
}

/// Samples an oriented point cloud from the surface (bilinear patches with
/// analytic normals), then applies the corruptions. Noise perturbs
/// positions only; normals stay those of the clean surface.
pub fn sample_scan(shape: &QuadGridShape, opts: &ScanOptions) -> Result<TargetScan, ScanError> {
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let rows = shape.rows();
    let cols = shape.cols();
    let s = opts.samples_per_cell.max(1);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for cr in 0..rows - 1 {
        for cc in 0..cols - 1 {
            let p00 = shape.position(shape.index(cr, cc));
            let p01 = shape.position(shape.index(cr, cc + 1));
            let p10 = shape.position(shape.index(cr + 1, cc));
            let p11 = shape.position(shape.index(cr + 1, cc + 1));
            for iu in 0..s {
                for iv in 0..s {
                    // stratified jitter inside the cell
                    let u = (iu as f64 + rng.random_range(0.05..0.95)) / s as f64;
                    let v = (iv as f64 + rng.random_range(0.05..0.95)) / s as f64;
                    let p = p00 * ((1.0 - u) * (1.0 - v))
                        + p01 * (u * (1.0 - v))
                        + p10 * ((1.0 - u) * v)
                        + p11 * (u * v);
                    let du = (p01 - p00) * (1.0 - v) + (p11 - p10) * v;
                    let dv = (p10 - p00) * (1.0 - u) + (p11 - p01) * u;
                    let n = du.cross(dv).normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
                    points.push(p);
                    normals.push(n);
                }
            }
        }
    }

    for corruption in &opts.corruptions {
        match corruption {
            Corruption::Noise { sigma } => {
                if *sigma > 0.0 {
                    let normal = Normal::new(0.0, *sigma).expect("positive sigma");
                    for p in points.iter_mut() {
                        *p += Vec3::new(
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                        );
                    }
                }
            }
            Corruption::OcclusionSphere { center, radius } => {
                let r2 = radius * radius;
                let mut keep = points
                    .iter()
                    .map(|p| (*p - *center).norm_squared() > r2)
                    .collect::<Vec<_>>()
                    .into_iter();
                let mut keep_n = keep.clone();
                points.retain(|_| keep.next().unwrap());
                normals.retain(|_| keep_n.next().unwrap());
            }
            Corruption::Subsample { fraction } => {
                let mut keep: Vec<bool> = (0..points.len())
                    .map(|_| rng.random_range(0.0..1.0) < *fraction)
                    .collect();
                // never drop everything
                if keep.iter().all(|&k| !k) {
                    keep[0] = true;
                }
                let mut it = keep.iter();
                let mut it_n = keep.iter();
                points.retain(|_| *it.next().unwrap());
                normals.retain(|_| *it_n.next().unwrap());
            }
        }
    }

    TargetScan::new(points, normals, None)
}

/// Landmark correspondences taken directly from template vertices of a
/// (usually clean) shape.
pub fn landmarks_from_shape(shape: &QuadGridShape, indices: &[usize]) -> LandmarkSet {
    LandmarkSet::new(
        indices.to_vec(),
        indices.iter().map(|&v| shape.position(v)).collect(),
    )
    .expect("distinct indices expected")
}

/// A spread of feature-like landmark vertices for a grid of the given size.
pub fn default_landmarks(rows: usize, cols: usize) -> Vec<usize> {
    let at = |fr: f64, fc: f64| {
        let r = ((rows - 1) as f64 * fr).round() as usize;
        let c = ((cols - 1) as f64 * fc).round() as usize;
        r * cols + c
    };
    let mut picks = vec![
        at(0.32, 0.32), // brow left
        at(0.32, 0.68), // brow right
        at(0.5, 0.5),   // bridge
        at(0.55, 0.5),  // nose tip
        at(0.62, 0.35), // nose wing left
        at(0.62, 0.65), // nose wing right
        at(0.78, 0.5),  // mouth center
        at(0.78, 0.3),  // mouth corner left
        at(0.78, 0.7),  // mouth corner right
        at(0.15, 0.5),  // forehead
    ];
    picks.sort_unstable();
    picks.dedup();
    picks
}

/// Summary statistics of a per-vertex distance report.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSummary {
    pub median: f64,
    pub mean: f64,
    pub fraction_below_1mm: f64,
}

/// Distance-to-data report over the measured (unmasked) vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// Vertices that were measured, ascending.
    pub measured: Vec<u32>,
    /// Distance (mm) per measured vertex, parallel to `measured`.
    pub per_vertex: Vec<f64>,
    pub summary: ErrorSummary,
    /// Non-decreasing (threshold, fraction) pairs ending at fraction 1.
    pub cumulative: Vec<(f64, f64)>,
}

/// Per-vertex Euclidean distance from the fitted surface to the nearest
/// scan point. `mask`, when given, lists the vertices to measure; masked-out
/// vertices influence nothing in the report.
pub fn distance_to_data(
    fitted: &QuadGridShape,
    scan: &TargetScan,
    mask: Option<&[u32]>,
) -> Result<ErrorReport, ScanError> {
    if scan.is_empty() {
        return Err(ScanError::EmptyScan);
    }
    let n = fitted.vertex_count();
    let measured: Vec<u32> = match mask {
        Some(m) => {
            let mut out: Vec<u32> = m
                .iter()
                .copied()
                .filter(|&v| (v as usize) < n)
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        }
        None => (0..n as u32).collect(),
    };
    let tree = KdTree::build(scan.points());
    let per_vertex: Vec<f64> = measured
        .iter()
        .map(|&v| tree.nearest(fitted.position(v as usize)).1.sqrt())
        .collect();

    let mut sorted = per_vertex.clone();
    sorted.sort_by(f64::total_cmp);
    let count = sorted.len();
    let median = if count == 0 {
        0.0
    } else if count % 2 == 1 {
        sorted[count / 2]
    } else {
        0.5 * (sorted[count / 2 - 1] + sorted[count / 2])
    };
    let mean = if count == 0 {
        0.0
    } else {
        sorted.iter().sum::<f64>() / count as f64
    };
    let below: usize = sorted.iter().take_while(|&&d| d < 1.0).count();
    let fraction_below_1mm = if count == 0 {
        0.0
    } else {
        below as f64 / count as f64
    };
    let cumulative: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, (i + 1) as f64 / count as f64))
        .collect();

    Ok(ErrorReport {
        measured,
        per_vertex,
        summary: ErrorSummary {
            median,
            mean,
            fraction_below_1mm,
        },
        cumulative,
    })
}
