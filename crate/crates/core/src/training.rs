//! Learns a [`WaveletShapeModel`] from a complete identity-by-expression
//! grid of registered shapes: wavelet-transform every sample, then run one
//! truncated HOSVD per coefficient on the centered 3 x d2 x d3 value tensor.
//!
//! Per-coefficient jobs are independent and deterministic; callers that
//! want parallelism can run [`train_coefficient`] over index chunks and
//! reassemble in canonical order, which reproduces [`train`] bit-exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::Vec3;
use crate::grid::QuadGridShape;
use crate::linalg::{solve_least_squares, DenseMat};
use crate::model::{
    FitWeights, ModelError, MultilinearCoefficientModel, TemplateInfo, WaveletShapeModel,
    SCALE_FLOOR,
};
// std's inherent float methods shadow this trait when dev-deps link std
#[allow(unused_imports)]
use crate::num::F64Ext;
use crate::tensor::{hosvd, Mode3Tensor, TensorError};
use crate::wavelet::{self, WaveletError};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum TrainError {
    #[error("incomplete identity x expression grid: expected {expected} shapes, got {got}")]
    IncompleteGrid { expected: usize, got: usize },
    #[error("training shapes disagree on grid geometry")]
    MixedGeometry,
    #[error("insufficient samples: need at least m2={m2} identities and m3={m3} expressions, got {d2}x{d3}")]
    InsufficientSamples {
        d2: usize,
        d3: usize,
        m2: usize,
        m3: usize,
    },
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A complete `identities x expressions` grid of registered shapes sharing
/// one template geometry; sample `(i, e)` sits at index `i * expressions + e`.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    identities: usize,
    expressions: usize,
    shapes: Vec<QuadGridShape>,
}

impl TrainingSet {
    pub fn new(
        identities: usize,
        expressions: usize,
        shapes: Vec<QuadGridShape>,
    ) -> Result<Self, TrainError> {
        if shapes.len() != identities * expressions || shapes.is_empty() {
            return Err(TrainError::IncompleteGrid {
                expected: identities * expressions,
                got: shapes.len(),
            });
        }
        let first = &shapes[0];
        if shapes.iter().any(|s| {
            s.rows() != first.rows() || s.cols() != first.cols() || s.levels() != first.levels()
        }) {
            return Err(TrainError::MixedGeometry);
        }
        Ok(Self {
            identities,
            expressions,
            shapes,
        })
    }

    pub fn identities(&self) -> usize {
        self.identities
    }

    pub fn expressions(&self) -> usize {
        self.expressions
    }

    pub fn shape(&self, identity: usize, expression: usize) -> &QuadGridShape {
        &self.shapes[identity * self.expressions + expression]
    }

    pub fn shapes(&self) -> &[QuadGridShape] {
        &self.shapes
    }
}

/// Training configuration; the rank defaults follow the smallest mode
/// dimension (the 3 coordinate channels).
#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub m2: usize,
    pub m3: usize,
    /// Landmark vertices to record in the model (configuration, may be empty).
    pub landmark_indices: Vec<u32>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            m2: 3,
            m3: 3,
            landmark_indices: Vec::new(),
        }
    }
}

/// Wavelet-transforms every training shape; canonical coefficient order.
pub fn transform_training_set(ts: &TrainingSet) -> Result<Vec<Vec<Vec3>>, TrainError> {
    ts.shapes()
        .iter()
        .map(|s| Ok(wavelet::forward(s)?.into_coeffs()))
        .collect()
}

/// Gathers one coefficient's values across all samples, `(i, e)` at
/// `i * expressions + e`.
pub fn coefficient_samples(transforms: &[Vec<Vec3>], k: usize) -> Vec<Vec3> {
    transforms.iter().map(|t| t[k]).collect()
}

/// Learns the multilinear model of one coefficient from its `d2 x d3`
/// sample grid: center by the grand mean, run truncated HOSVD, record the
/// factor-row means and standard deviations.
pub fn train_coefficient(
    samples: &[Vec3],
    d2: usize,
    d3: usize,
    m2: usize,
    m3: usize,
) -> Result<MultilinearCoefficientModel, TrainError> {
    debug_assert_eq!(samples.len(), d2 * d3);
    let inv = 1.0 / (d2 * d3) as f64;
    let mut mean = Vec3::ZERO;
    for &s in samples {
        mean += s;
    }
    mean = mean * inv;

    let mut tensor = Mode3Tensor::zeros(3, d2, d3);
    for i in 0..d2 {
        for e in 0..d3 {
            let v = samples[i * d3 + e] - mean;
            tensor.set(0, i, e, v.x);
            tensor.set(1, i, e, v.y);
            tensor.set(2, i, e, v.z);
        }
    }

    let h = hosvd(&tensor, m2, m3)?;
    let column_stats = |u: &DenseMat| {
        let rows = u.rows();
        let cols = u.cols();
        let mut means = vec![0.0; cols];
        let mut scales = vec![0.0; cols];
        for c in 0..cols {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += u[(r, c)];
            }
            means[c] = acc / rows as f64;
            let mut var = 0.0;
            for r in 0..rows {
                let d = u[(r, c)] - means[c];
                var += d * d;
            }
            scales[c] = (var / rows as f64).sqrt().max(SCALE_FLOOR);
        }
        (means, scales)
    };
    let (id_mode_mean, id_scale) = column_stats(&h.mode2_factors);
    let (expr_mode_mean, expr_scale) = column_stats(&h.mode3_factors);

    Ok(MultilinearCoefficientModel {
        mean,
        core: h.core,
        id_mode_mean,
        expr_mode_mean,
        id_scale,
        expr_scale,
    })
}

/// Learns the full model: forward transform of all samples, one HOSVD per
/// coefficient, influence sets from the transform layout. Deterministic.
pub fn train(ts: &TrainingSet, opts: &TrainOptions) -> Result<WaveletShapeModel, TrainError> {
    let (d2, d3) = (ts.identities(), ts.expressions());
    if d2 < opts.m2 || d3 < opts.m3 {
        return Err(TrainError::InsufficientSamples {
            d2,
            d3,
            m2: opts.m2,
            m3: opts.m3,
        });
    }
    let template = ts.shapes()[0].clone();
    let layout = wavelet::WaveletLayout::new(template.rows(), template.cols(), template.levels())?;
    let transforms = transform_training_set(ts)?;
    let n = layout.coefficient_count();
    let mut coefficient_models = Vec::with_capacity(n);
    for k in 0..n {
        let samples = coefficient_samples(&transforms, k);
        coefficient_models.push(train_coefficient(&samples, d2, d3, opts.m2, opts.m3)?);
    }
    let supports = wavelet::compute_supports(&layout);
    let model = WaveletShapeModel {
        template: TemplateInfo {
            rows: template.rows(),
            cols: template.cols(),
            levels: template.levels(),
            landmark_indices: opts.landmark_indices.clone(),
        },
        m2: opts.m2,
        m3: opts.m3,
        coefficient_models,
        supports,
    };
    model.validate()?;
    Ok(model)
}

/// Alternating least squares options for [`project_weights`].
#[derive(Clone, Copy, Debug)]
pub struct ProjectOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self {
            max_iters: 10,
            rel_tol: 1e-10,
        }
    }
}

/// Per-coefficient normalized weights that best reproduce `shape` under the
/// model, by alternating least squares on each bilinear subproblem. Always
/// returns the best iterate found; minimum-norm solves keep degenerate
/// coefficients at their mode-means.
pub fn project_weights(
    model: &WaveletShapeModel,
    shape: &QuadGridShape,
    opts: ProjectOptions,
) -> Result<FitWeights, ModelError> {
    if shape.rows() != model.template.rows
        || shape.cols() != model.template.cols
        || shape.levels() != model.template.levels
    {
        return Err(ModelError::ShapeMismatch("shape is not on the model template grid"));
    }
    let layout = model.layout();
    let targets = wavelet::forward_positions(&layout, shape.positions());
    let n = model.coefficient_count();
    let mut weights = FitWeights::zeros(n, model.m2, model.m3);
    for k in 0..n {
        let cm = &model.coefficient_models[k];
        let target = targets[k] - cm.mean;
        let (w2n, w3n) = project_coefficient(cm, target, opts);
        weights.id_block_mut(k).copy_from_slice(&w2n);
        weights.expr_block_mut(k).copy_from_slice(&w3n);
    }
    Ok(weights)
}

/// One bilinear ALS: returns normalized (identity, expression) weights.
fn project_coefficient(
    cm: &MultilinearCoefficientModel,
    target: Vec3,
    opts: ProjectOptions,
) -> (Vec<f64>, Vec<f64>) {
    let m2 = cm.m2();
    let m3 = cm.m3();
    let mut w2n = vec![0.0; m2];
    let mut w3n = vec![0.0; m3];
    for _ in 0..opts.max_iters {
        let w3a = cm.expr_actual(&w3n);
        let new_w2n = solve_mode(&cm.mode2_design(&w3a), &cm.id_mode_mean, &cm.id_scale, target);
        let w2a = cm.id_actual(&new_w2n);
        let new_w3n = solve_mode(
            &cm.mode3_design(&w2a),
            &cm.expr_mode_mean,
            &cm.expr_scale,
            target,
        );
        let mut change = 0.0f64;
        for (old, new) in w2n.iter().zip(&new_w2n) {
            change = change.max((old - new).abs() / (1.0 + new.abs()));
        }
        for (old, new) in w3n.iter().zip(&new_w3n) {
            change = change.max((old - new).abs() / (1.0 + new.abs()));
        }
        w2n = new_w2n;
        w3n = new_w3n;
        if change < opts.rel_tol {
            break;
        }
    }
    (w2n, w3n)
}

/// Least squares for one mode in normalized units: minimizes
/// `|| sum_j design[j] * (mode_mean[j] + scale[j] * w[j]) - target ||`,
/// i.e. the design columns are scaled and the mode-mean part moves into the
/// right-hand side.
fn solve_mode(design: &[Vec3], mode_mean: &[f64], scale: &[f64], target: Vec3) -> Vec<f64> {
    let m = design.len();
    let mut a = DenseMat::zeros(3, m);
    let mut rhs = target;
    let mut col_max = 0.0f64;
    for j in 0..m {
        let g = design[j];
        rhs -= g * mode_mean[j];
        a[(0, j)] = g.x * scale[j];
        a[(1, j)] = g.y * scale[j];
        a[(2, j)] = g.z * scale[j];
        col_max = col_max.max((g * scale[j]).norm());
    }
    // a numerically void design (zero-variance coefficient) stays at the
    // mode-mean instead of amplifying rounding dust
    if col_max < 1e-9 {
        return vec![0.0; m];
    }
    solve_least_squares(&a, &[rhs.x, rhs.y, rhs.z]).unwrap_or_else(|_| vec![0.0; m])
}
