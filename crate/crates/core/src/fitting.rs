//! Fits a learned shape space to an oriented point cloud by minimizing a
//! landmark + point-to-plane + smoothing energy under per-component box
//! priors on the multilinear weights, in a two-stage coarse-to-fine
//! per-coefficient scheme, and tracks motion sequences with a temporal
//! penalty and frozen identity weights.
//!
//! Stage 1 (initialization): per wavelet level, repeatedly re-estimate the
//! similarity transform from the landmark pairs, then minimize the
//! landmark (+ smoothing) energy restricted to each coefficient's weights
//! inside the `lambda_init` box.
//!
//! Stage 2 (surface): the transform stays fixed; per level, repeatedly
//! rebuild nearest-neighbor correspondences, then minimize the full energy
//! restricted to each coefficient inside the `lambda_surface` box, where a
//! component already outside that box after initialization keeps its
//! initialization value as the relaxed bound.
//!
//! Coefficients are optimized sequentially in canonical order against the
//! current surface state; the smoothing term is evaluated on the support
//! plus a two-ring halo, which makes each restricted gradient exact for
//! the vertices the block can move, so every accepted block step decreases
//! the total energy under frozen correspondences.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::{estimate_similarity, GeomError, Mat3, SimilarityTransform, Vec3};
use crate::grid::{neighbors4_of, QuadGridShape};
use crate::model::{FitWeights, ModelError, MultilinearCoefficientModel, WaveletShapeModel};
// std's inherent float methods shadow this trait when dev-deps link std
#[allow(unused_imports)]
use crate::num::F64Ext;
use crate::optim::{
    minimize, BoxBounds, MinimizeOptions, ObjectiveEvaluation, OptimError,
};
use crate::scan::{ScanError, TargetScan};
use crate::spatial::KdTree;
use crate::wavelet;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum FitError {
    #[error("landmark set unusable for alignment: {0}")]
    DegenerateLandmarks(GeomError),
    #[error("landmarks do not fit the template: {0}")]
    InvalidLandmarks(ScanError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("invalid fitting configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("tracking needs at least one frame")]
    NoFrames,
}

/// Energy weights and schedule; all distances in millimeters.
#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Landmark energy weight.
    pub rho_landmark: f64,
    /// Nearest-neighbor rejection threshold (mm).
    pub tau: f64,
    /// Smoothing energy weight (0 disables smoothing).
    pub rho_smooth: f64,
    /// Hyper-box half-width during initialization, in standard deviations.
    pub lambda_init: f64,
    /// Hyper-box half-width during surface fitting.
    pub lambda_surface: f64,
    /// Temporal penalty weight (tracking only).
    pub rho_temporal: f64,
    /// Iterations of (re-estimate transform, optimize level) per level.
    pub init_passes: usize,
    /// Iterations of (rebuild correspondences, optimize level) per level.
    pub surface_passes: usize,
    /// Repetitions of the whole surface schedule; rounds stop early once the
    /// largest vertex movement in a round falls below `movement_tol`.
    pub surface_rounds: usize,
    /// Per-frame surface rounds during tracking; frames must reach
    /// block-stationarity for the temporal anchor to hold sequences still.
    pub track_rounds: usize,
    /// Early-exit threshold between rounds, millimeters.
    pub movement_tol: f64,
    /// After the per-coefficient schedule, polish with one bounded
    /// quasi-Newton solve over all weights jointly (same energies, frozen
    /// correspondences). Off by default to keep the paper's block scheme;
    /// tracking turns it on to reach the stationarity its temporal anchor
    /// needs.
    pub joint_refine: bool,
    /// Iteration cap of the joint polish.
    pub joint_max_iters: usize,
    pub optimizer: MinimizeOptions,
    /// Used when the scan carries no landmarks.
    pub initial_transform: Option<SimilarityTransform>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rho_landmark: 1.0,
            tau: 10.0,
            rho_smooth: 100.0,
            lambda_init: 1.0,
            lambda_surface: 0.5,
            rho_temporal: 1.0,
            init_passes: 3,
            surface_passes: 3,
            surface_rounds: 1,
            track_rounds: 8,
            movement_tol: 1e-8,
            joint_refine: false,
            joint_max_iters: 400,
            optimizer: MinimizeOptions::default(),
            initial_transform: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.tau > 0.0) {
            return Err(FitError::InvalidConfig("tau must be positive"));
        }
        for (name, v) in [
            ("rho_landmark", self.rho_landmark),
            ("rho_smooth", self.rho_smooth),
            ("rho_temporal", self.rho_temporal),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                let _ = name;
                return Err(FitError::InvalidConfig("energy weights must be >= 0"));
            }
        }
        if !(self.lambda_init > 0.0) || !(self.lambda_surface > 0.0) {
            return Err(FitError::InvalidConfig("lambda must be positive"));
        }
        if self.init_passes == 0
            || self.surface_passes == 0
            || self.surface_rounds == 0
            || self.track_rounds == 0
        {
            return Err(FitError::InvalidConfig("pass counts must be >= 1"));
        }
        if !(self.movement_tol >= 0.0) {
            return Err(FitError::InvalidConfig("movement_tol must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitStage {
    Initialization,
    Surface,
    /// Optional joint polish over all weights after the block schedule.
    JointRefinement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitWarning {
    /// The scan had no usable landmarks; initialization was skipped.
    NoLandmarks,
}

/// Running total of the tracked energy through one pass: `energies[0]` at
/// pass start, then one entry per optimized coefficient block.
#[derive(Clone, Debug)]
pub struct PassTrace {
    pub stage: FitStage,
    pub level: usize,
    pub pass: usize,
    pub energies: Vec<f64>,
}

/// Instrumentation counters, per coefficient.
#[derive(Clone, Debug, Default)]
pub struct FitStats {
    pub objective_evaluations: Vec<u64>,
    pub distance_evaluations: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub weights: FitWeights,
    /// Weights as they stood after the initialization stage; the surface
    /// stage's relaxed boxes are defined around these.
    pub initialization_weights: FitWeights,
    /// Maps model coordinates into scan coordinates.
    pub transform: SimilarityTransform,
    /// In model coordinates; equals `synthesize_shape(model, weights)`.
    pub fitted_shape: QuadGridShape,
    pub energy_trace: Vec<PassTrace>,
    /// Distance (mm) from each transformed vertex to its nearest scan point.
    pub per_vertex_distance: Vec<f64>,
    pub warnings: Vec<FitWarning>,
    pub stats: FitStats,
}

impl FitResult {
    /// The fitted surface in scan coordinates.
    pub fn transformed_shape(&self) -> QuadGridShape {
        let positions = self
            .fitted_shape
            .positions()
            .iter()
            .map(|&p| self.transform.apply(p))
            .collect();
        QuadGridShape::new(
            self.fitted_shape.rows(),
            self.fitted_shape.cols(),
            self.fitted_shape.levels(),
            positions,
        )
        .expect("transforming finite positions keeps them finite")
    }
}

/// Box prior around the mode-means in normalized units: `[-lambda, lambda]`
/// per component, except that a component whose initialization value lies
/// outside keeps that value as its relaxed bound.
pub fn prior_bounds(lambda: f64, init: &[f64]) -> BoxBounds {
    let lower = init.iter().map(|&w| (-lambda).min(w)).collect();
    let upper = init.iter().map(|&w| lambda.max(w)).collect();
    BoxBounds::new(lower, upper).expect("min/max construction is always ordered")
}

/// Landmark energy `rho_L * (|X| / |L|) * sum_i ||T(x_i) - l_i||^2` and its
/// gradient with respect to all normalized weights.
pub fn landmark_energy(
    model: &WaveletShapeModel,
    weights: &FitWeights,
    transform: &SimilarityTransform,
    landmarks: &[(usize, Vec3)],
    rho_landmark: f64,
) -> Result<(f64, FitWeights), ModelError> {
    let coeffs = model.synthesize_coefficients(weights)?;
    let layout = model.layout();
    let positions = wavelet::inverse_positions(&layout, &coeffs);
    let n = model.coefficient_count();
    let mut grad_positions = vec![Vec3::ZERO; n];
    let weight = if landmarks.is_empty() {
        0.0
    } else {
        rho_landmark * n as f64 / landmarks.len() as f64
    };
    let q_t = transform.rotation.transpose();
    let mut value = 0.0;
    for &(v, data) in landmarks {
        let r = transform.apply(positions[v]) - data;
        value += weight * r.norm_squared();
        grad_positions[v] += q_t.apply(r) * (2.0 * weight * transform.scale);
    }
    Ok((value, chain_to_weights(model, weights, &grad_positions)?))
}

/// Per-vertex nearest-neighbor correspondences, frozen for one optimizer
/// pass: the scan point and tangent-plane normal, or `None` beyond `tau`
/// (the zero-weight branch) and at landmark vertices.
#[derive(Clone, Debug)]
pub struct FrozenCorrespondences(Vec<Option<(Vec3, Vec3)>>);

/// Builds correspondences for the current state: nearest scan point of each
/// transformed non-landmark vertex, gated at distance `tau`.
pub fn build_correspondences(
    model: &WaveletShapeModel,
    weights: &FitWeights,
    transform: &SimilarityTransform,
    scan: &TargetScan,
    tree: &KdTree,
    landmark_vertices: &[usize],
    tau: f64,
) -> Result<FrozenCorrespondences, ModelError> {
    let coeffs = model.synthesize_coefficients(weights)?;
    let layout = model.layout();
    let positions = wavelet::inverse_positions(&layout, &coeffs);
    let n = model.coefficient_count();
    let mut is_landmark = vec![false; n];
    for &v in landmark_vertices {
        is_landmark[v] = true;
    }
    let tau2 = tau * tau;
    let corr = positions
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            if is_landmark[v] {
                return None;
            }
            let x = transform.apply(p);
            let (i, d2) = tree.nearest(x);
            (d2 <= tau2).then(|| (scan.points()[i], scan.normals()[i]))
        })
        .collect();
    Ok(FrozenCorrespondences(corr))
}

/// Point-to-plane surface energy against frozen correspondences,
/// `sum rho(x) ((T(x) - p) . n_p)^2`; the gradient treats the tangent
/// planes as constant, exactly as the optimizer does within a pass.
pub fn surface_energy_frozen(
    model: &WaveletShapeModel,
    weights: &FitWeights,
    transform: &SimilarityTransform,
    corr: &FrozenCorrespondences,
) -> Result<(f64, FitWeights), ModelError> {
    let coeffs = model.synthesize_coefficients(weights)?;
    let layout = model.layout();
    let positions = wavelet::inverse_positions(&layout, &coeffs);
    if corr.0.len() != positions.len() {
        return Err(ModelError::ShapeMismatch(
            "correspondence count must equal vertex count",
        ));
    }
    let q_t = transform.rotation.transpose();
    let mut grad_positions = vec![Vec3::ZERO; positions.len()];
    let mut value = 0.0;
    for (v, c) in corr.0.iter().enumerate() {
        let Some((point, normal)) = c else { continue };
        let x = transform.apply(positions[v]);
        let e = (x - *point).dot(*normal);
        value += e * e;
        grad_positions[v] += q_t.apply(*normal) * (2.0 * e * transform.scale);
    }
    Ok((value, chain_to_weights(model, weights, &grad_positions)?))
}

/// Point-to-plane surface energy with fresh nearest-neighbor
/// correspondences (built, then evaluated frozen).
pub fn surface_energy(
    model: &WaveletShapeModel,
    weights: &FitWeights,
    transform: &SimilarityTransform,
    scan: &TargetScan,
    tree: &KdTree,
    landmark_vertices: &[usize],
    tau: f64,
) -> Result<(f64, FitWeights), ModelError> {
    let corr = build_correspondences(model, weights, transform, scan, tree, landmark_vertices, tau)?;
    surface_energy_frozen(model, weights, transform, &corr)
}

/// Temporal penalty `rho_T * sum_v ||x_v - anchor_v||^2` against the
/// previous frame's vertex positions, with its gradient in normalized
/// weight units.
pub fn temporal_energy(
    model: &WaveletShapeModel,
    weights: &FitWeights,
    anchor: &[Vec3],
    rho_temporal: f64,
) -> Result<(f64, FitWeights), ModelError> {
    let coeffs = model.synthesize_coefficients(weights)?;
    let layout = model.layout();
    let positions = wavelet::inverse_positions(&layout, &coeffs);
    if anchor.len() != positions.len() {
        return Err(ModelError::ShapeMismatch("anchor length must equal vertex count"));
    }
    let mut value = 0.0;
    let mut grad_positions = vec![Vec3::ZERO; positions.len()];
    for (v, (p, a)) in positions.iter().zip(anchor).enumerate() {
        let r = *p - *a;
        value += rho_temporal * r.norm_squared();
        grad_positions[v] = r * (2.0 * rho_temporal);
    }
    Ok((value, chain_to_weights(model, weights, &grad_positions)?))
}

/// Bi-Laplacian smoothing energy `rho_S * sum_v ||U^2(x_v)||^2` and its
/// gradient with respect to vertex positions (the adjoint of the linear
/// double-umbrella operator).
pub fn smoothing_energy(shape: &QuadGridShape, rho_smooth: f64) -> (f64, Vec<Vec3>) {
    let n = shape.vertex_count();
    let mut grad = vec![Vec3::ZERO; n];
    if rho_smooth == 0.0 {
        return (0.0, grad);
    }
    let rows = shape.rows();
    let cols = shape.cols();
    let mut value = 0.0;
    for v in 0..n {
        let t = shape.bi_umbrella(v);
        value += rho_smooth * t.norm_squared();
        distribute_bi_umbrella_adjoint(rows, cols, v, t * (2.0 * rho_smooth), |u, g| {
            grad[u] += g;
        });
    }
    (value, grad)
}

/// Chains a gradient with respect to vertex positions through the inverse
/// transform's per-coefficient responses and each coefficient's bilinear
/// parametrization, producing the gradient in normalized weight units.
fn chain_to_weights(
    model: &WaveletShapeModel,
    weights: &FitWeights,
    grad_positions: &[Vec3],
) -> Result<FitWeights, ModelError> {
    let n = model.coefficient_count();
    let mut out = FitWeights::zeros(n, model.m2, model.m3);
    for k in 0..n {
        let cm = &model.coefficient_models[k];
        let mut dvalue = Vec3::ZERO;
        for (v, resp) in model.supports[k].iter() {
            dvalue += grad_positions[v] * resp;
        }
        let w2a = cm.id_actual(weights.id_block(k));
        let w3a = cm.expr_actual(weights.expr_block(k));
        let g2 = cm.mode2_design(&w3a);
        let g3 = cm.mode3_design(&w2a);
        for (j, g) in g2.iter().enumerate() {
            out.id_block_mut(k)[j] = g.dot(dvalue) * cm.id_scale[j];
        }
        for (l, g) in g3.iter().enumerate() {
            out.expr_block_mut(k)[l] = g.dot(dvalue) * cm.expr_scale[l];
        }
    }
    Ok(out)
}

/// Applies the transpose of the double-umbrella stencil at `v`: given the
/// outer factor `t2 = 2 * rho * U^2(x_v)`, accumulates `t2 * d(U^2_v)/d(x_u)`
/// into every stencil vertex `u`.
fn distribute_bi_umbrella_adjoint(
    rows: usize,
    cols: usize,
    v: usize,
    t2: Vec3,
    mut add: impl FnMut(usize, Vec3),
) {
    let nbv = neighbors4_of(rows, cols, v);
    let wv = 1.0 / nbv.len() as f64;
    let mut apply_umbrella_adjoint = |j: usize, a: f64| {
        let nbj = neighbors4_of(rows, cols, j);
        let wj = a / nbj.len() as f64;
        for l in &nbj {
            add(l, t2 * wj);
        }
        add(j, t2 * (-a));
    };
    for j in &nbv {
        apply_umbrella_adjoint(j, wv);
    }
    apply_umbrella_adjoint(v, -1.0);
}

#[derive(Clone, Copy)]
struct Correspondence {
    point: Vec3,
    normal: Vec3,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum BlockMode {
    Full,
    ExpressionOnly,
}

/// Relaxed per-component surface-stage bounds, flattened per coefficient.
struct SurfaceBoxes {
    id_lower: Vec<f64>,
    id_upper: Vec<f64>,
    expr_lower: Vec<f64>,
    expr_upper: Vec<f64>,
}

impl SurfaceBoxes {
    fn from_initialization(weights: &FitWeights, lambda: f64) -> SurfaceBoxes {
        let relax = |w: &[f64]| -> (Vec<f64>, Vec<f64>) {
            (
                w.iter().map(|&x| (-lambda).min(x)).collect(),
                w.iter().map(|&x| lambda.max(x)).collect(),
            )
        };
        let (id_lower, id_upper) = relax(weights.id_flat());
        let (expr_lower, expr_upper) = relax(weights.expr_flat());
        SurfaceBoxes {
            id_lower,
            id_upper,
            expr_lower,
            expr_upper,
        }
    }

    fn block(&self, k: usize, m2: usize, m3: usize, mode: BlockMode) -> BoxBounds {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        if mode == BlockMode::Full {
            lower.extend_from_slice(&self.id_lower[k * m2..(k + 1) * m2]);
            upper.extend_from_slice(&self.id_upper[k * m2..(k + 1) * m2]);
        }
        lower.extend_from_slice(&self.expr_lower[k * m3..(k + 1) * m3]);
        upper.extend_from_slice(&self.expr_upper[k * m3..(k + 1) * m3]);
        BoxBounds::new(lower, upper).expect("stored bounds are ordered")
    }
}

struct FitState<'a> {
    model: &'a WaveletShapeModel,
    scan: &'a TargetScan,
    cfg: &'a FitConfig,
    tree: KdTree,
    weights: FitWeights,
    coeff_values: Vec<Vec3>,
    positions: Vec<Vec3>,
    transform: SimilarityTransform,
    corr: Vec<Option<Correspondence>>,
    is_landmark: Vec<bool>,
    landmarks: Vec<(usize, Vec3)>,
    landmark_weight: f64,
    supp_landmarks: Vec<Vec<(u32, Vec3)>>,
    halos: Vec<Vec<u32>>,
    temporal_anchor: Option<Vec<Vec3>>,
    // scratch
    resp_mark: Vec<f64>,
    grad_mark: Vec<Vec3>,
    touch_stamp: Vec<u64>,
    touched: Vec<u32>,
    stamp: u64,
    stats: FitStats,
    trace: Vec<PassTrace>,
}

impl<'a> FitState<'a> {
    fn new(
        model: &'a WaveletShapeModel,
        scan: &'a TargetScan,
        cfg: &'a FitConfig,
        weights: FitWeights,
        transform: SimilarityTransform,
        temporal_anchor: Option<Vec<Vec3>>,
    ) -> Result<FitState<'a>, FitError> {
        let n = model.coefficient_count();
        let coeff_values = model.synthesize_coefficients(&weights)?;
        let layout = model.layout();
        let positions = wavelet::inverse_positions(&layout, &coeff_values);

        let mut is_landmark = vec![false; n];
        let mut landmarks = Vec::new();
        if let Some(set) = scan.landmarks() {
            set.validate_for(n).map_err(FitError::InvalidLandmarks)?;
            for (v, data) in set.iter() {
                is_landmark[v] = true;
                landmarks.push((v, data));
            }
        }
        let landmark_weight = if landmarks.is_empty() {
            0.0
        } else {
            cfg.rho_landmark * n as f64 / landmarks.len() as f64
        };

        let mut supp_landmarks = vec![Vec::new(); n];
        for (k, support) in model.supports.iter().enumerate() {
            for (v, _) in support.iter() {
                if is_landmark[v] {
                    let data = landmarks
                        .iter()
                        .find(|(lv, _)| *lv == v)
                        .map(|&(_, d)| d)
                        .expect("is_landmark implies an entry");
                    supp_landmarks[k].push((v as u32, data));
                }
            }
        }

        let rows = model.template.rows;
        let cols = model.template.cols;
        let halos = if cfg.rho_smooth > 0.0 {
            compute_halos(rows, cols, model)
        } else {
            vec![Vec::new(); n]
        };

        Ok(FitState {
            model,
            scan,
            cfg,
            tree: KdTree::build(scan.points()),
            weights,
            coeff_values,
            positions,
            transform,
            corr: vec![None; n],
            is_landmark,
            landmarks,
            landmark_weight,
            supp_landmarks,
            halos,
            temporal_anchor,
            resp_mark: vec![0.0; n],
            grad_mark: vec![Vec3::ZERO; n],
            touch_stamp: vec![0; n],
            touched: Vec::new(),
            stamp: 0,
            stats: FitStats {
                objective_evaluations: vec![0; n],
                distance_evaluations: vec![0; n],
            },
            trace: Vec::new(),
        })
    }

    fn rebuild_correspondences(&mut self) {
        let tau2 = self.cfg.tau * self.cfg.tau;
        for v in 0..self.positions.len() {
            self.corr[v] = if self.is_landmark[v] {
                None
            } else {
                let x = self.transform.apply(self.positions[v]);
                let (i, d2) = self.tree.nearest(x);
                (d2 <= tau2).then(|| Correspondence {
                    point: self.scan.points()[i],
                    normal: self.scan.normals()[i],
                })
            };
        }
    }

    /// Full tracked energy for the given stage under the current frozen
    /// correspondences and transform.
    fn total_energy(&self, stage: FitStage) -> f64 {
        let mut total = 0.0;
        for &(v, data) in &self.landmarks {
            let r = self.transform.apply(self.positions[v]) - data;
            total += self.landmark_weight * r.norm_squared();
        }
        if stage != FitStage::Initialization {
            for v in 0..self.positions.len() {
                if let Some(c) = &self.corr[v] {
                    let e = (self.transform.apply(self.positions[v]) - c.point).dot(c.normal);
                    total += e * e;
                }
            }
            if let Some(anchor) = &self.temporal_anchor {
                for (p, a) in self.positions.iter().zip(anchor) {
                    total += self.cfg.rho_temporal * (*p - *a).norm_squared();
                }
            }
        }
        if self.cfg.rho_smooth > 0.0 {
            let rows = self.model.template.rows;
            let cols = self.model.template.cols;
            for v in 0..self.positions.len() {
                let t = crate::grid::bi_umbrella_of(rows, cols, &self.positions, v);
                total += self.cfg.rho_smooth * t.norm_squared();
            }
        }
        total
    }

    /// Minimizes the restricted energy of coefficient `k`; returns the
    /// restriction's (before, after) values and commits the result.
    fn optimize_block(
        &mut self,
        k: usize,
        mode: BlockMode,
        bounds: &BoxBounds,
        stage: FitStage,
    ) -> Result<(f64, f64), FitError> {
        let m2 = self.model.m2;
        let m3 = self.model.m3;
        let mut x0 = Vec::with_capacity(m2 + m3);
        if mode == BlockMode::Full {
            x0.extend_from_slice(self.weights.id_block(k));
        }
        x0.extend_from_slice(self.weights.expr_block(k));
        bounds.project(&mut x0);

        // mark the support responses for the overlay position lookup
        for (v, resp) in self.model.supports[k].iter() {
            self.resp_mark[v] = resp;
        }

        let (result, before) = {
            let cm = &self.model.coefficient_models[k];
            let support = &self.model.supports[k];
            let mut problem = BlockObjective {
                cm,
                support_vertices: &support.vertices,
                responses: &support.responses,
                halo: &self.halos[k],
                positions: &self.positions,
                current_value: self.coeff_values[k],
                transform: self.transform,
                rotation_t: self.transform.rotation.transpose(),
                corr: &self.corr,
                is_landmark: &self.is_landmark,
                landmarks: &self.supp_landmarks[k],
                rows: self.model.template.rows,
                cols: self.model.template.cols,
                landmark_weight: self.landmark_weight,
                rho_smooth: self.cfg.rho_smooth,
                rho_temporal: self.cfg.rho_temporal,
                anchor: self.temporal_anchor.as_deref(),
                include_surface: stage == FitStage::Surface,
                mode,
                frozen_id: self.weights.id_block(k).to_vec(),
                resp_mark: &self.resp_mark,
                grad_mark: &mut self.grad_mark,
                touch_stamp: &mut self.touch_stamp,
                touched: &mut self.touched,
                stamp: &mut self.stamp,
                objective_evals: &mut self.stats.objective_evaluations[k],
                distance_evals: &mut self.stats.distance_evaluations[k],
            };
            let before = problem.eval(&x0).value;
            let result = minimize(
                |w| problem.eval(w),
                &x0,
                bounds,
                &self.cfg.optimizer,
            )?;
            (result, before)
        };

        // commit: weights, coefficient value, incremental positions
        let (w2n, w3n): (&[f64], &[f64]) = match mode {
            BlockMode::Full => (&result.x[..m2], &result.x[m2..]),
            BlockMode::ExpressionOnly => (self.weights.id_block(k), &result.x[..]),
        };
        let cm = &self.model.coefficient_models[k];
        let new_value = cm.synthesize_actual(&cm.id_actual(w2n), &cm.expr_actual(w3n));
        let delta = new_value - self.coeff_values[k];
        let w2n = w2n.to_vec();
        let w3n = w3n.to_vec();
        self.weights.id_block_mut(k).copy_from_slice(&w2n);
        self.weights.expr_block_mut(k).copy_from_slice(&w3n);
        self.coeff_values[k] = new_value;
        for (v, resp) in self.model.supports[k].iter() {
            self.positions[v] += delta * resp;
            self.resp_mark[v] = 0.0;
        }
        Ok((before, result.value.min(before)))
    }

    fn run_stage(
        &mut self,
        stage: FitStage,
        mode: BlockMode,
        boxes: StageBoxes<'_>,
        rounds: usize,
    ) -> Result<(), FitError> {
        let layout = self.model.layout();
        let passes = match stage {
            FitStage::Initialization => self.cfg.init_passes,
            FitStage::Surface | FitStage::JointRefinement => self.cfg.surface_passes,
        };
        for _round in 0..rounds {
            let round_start = self.positions.clone();
            for level in 0..=layout.levels() {
                for pass in 0..passes {
                    match stage {
                        FitStage::Initialization => {
                            let model_pts: Vec<Vec3> = self
                                .landmarks
                                .iter()
                                .map(|&(v, _)| self.positions[v])
                                .collect();
                            let data_pts: Vec<Vec3> =
                                self.landmarks.iter().map(|&(_, d)| d).collect();
                            self.transform = estimate_similarity(&model_pts, &data_pts)
                                .map_err(FitError::DegenerateLandmarks)?;
                        }
                        FitStage::Surface | FitStage::JointRefinement => {
                            self.rebuild_correspondences();
                        }
                    }
                    let mut total = self.total_energy(stage);
                    let mut energies = vec![total];
                    for k in layout.level_range(level) {
                        let bounds = boxes.block(k, self.model.m2, self.model.m3, mode);
                        let (before, after) = self.optimize_block(k, mode, &bounds, stage)?;
                        total += after - before;
                        energies.push(total);
                    }
                    self.trace.push(PassTrace {
                        stage,
                        level,
                        pass,
                        energies,
                    });
                }
            }
            let moved = self
                .positions
                .iter()
                .zip(&round_start)
                .map(|(a, b)| (*a - *b).max_abs())
                .fold(0.0, f64::max);
            if moved < self.cfg.movement_tol {
                break;
            }
        }
        Ok(())
    }

    /// Per-component scale `p_i = 1/sqrt(h_i)` from a Gauss-Newton diagonal
    /// curvature estimate of the joint energy at the current state.
    fn joint_preconditioner(&self, mode: BlockMode, block_dim: usize) -> Vec<f64> {
        let n = self.model.coefficient_count();
        let mut h = vec![0.0f64; n * block_dim];
        // smoothing curvature scales with the squared double-umbrella gain
        let smooth_gain = 1.0 + 16.0 * self.cfg.rho_smooth;
        let temporal = if self.temporal_anchor.is_some() {
            self.cfg.rho_temporal
        } else {
            0.0
        };
        for k in 0..n {
            let support = &self.model.supports[k];
            let mut resp_sq = 0.0;
            let mut landmark_resp_sq = 0.0;
            for (v, resp) in support.iter() {
                resp_sq += resp * resp;
                if self.is_landmark[v] {
                    landmark_resp_sq += resp * resp;
                }
            }
            let vertex_weight = resp_sq * (smooth_gain + temporal)
                + landmark_resp_sq * self.landmark_weight;
            let cm = &self.model.coefficient_models[k];
            let w2a = cm.id_actual(self.weights.id_block(k));
            let w3a = cm.expr_actual(self.weights.expr_block(k));
            let base = k * block_dim;
            let mut slot = base;
            if mode == BlockMode::Full {
                for (j, g) in cm.mode2_design(&w3a).iter().enumerate() {
                    let col = g.norm() * cm.id_scale[j];
                    h[slot] = 2.0 * col * col * vertex_weight;
                    slot += 1;
                    let _ = j;
                }
            }
            for (l, g) in cm.mode3_design(&w2a).iter().enumerate() {
                let col = g.norm() * cm.expr_scale[l];
                h[slot] = 2.0 * col * col * vertex_weight;
                slot += 1;
                let _ = l;
            }
            debug_assert_eq!(slot, base + block_dim);
        }
        let h_max = h.iter().fold(0.0f64, |a, &b| a.max(b)).max(1e-300);
        let floor = h_max * 1e-10;
        h.iter().map(|&hi| 1.0 / (hi + floor).sqrt()).collect()
    }

    /// One bounded quasi-Newton solve over all (active) weights jointly,
    /// against the same energies with frozen correspondences; repeated with
    /// correspondence rebuilds until the surface stops moving. Brings the
    /// state to a jointly stationary point, which per-coefficient descent
    /// alone approaches only slowly.
    fn run_joint_refine(
        &mut self,
        mode: BlockMode,
        boxes: &SurfaceBoxes,
        rounds: usize,
    ) -> Result<(), FitError> {
        let n = self.model.coefficient_count();
        let m2 = self.model.m2;
        let m3 = self.model.m3;
        let block_dim = match mode {
            BlockMode::Full => m2 + m3,
            BlockMode::ExpressionOnly => m3,
        };
        // flattened bounds, one block per coefficient
        let mut lower = Vec::with_capacity(n * block_dim);
        let mut upper = Vec::with_capacity(n * block_dim);
        for k in 0..n {
            let b = boxes.block(k, m2, m3, mode);
            lower.extend_from_slice(b.lower());
            upper.extend_from_slice(b.upper());
        }
        let bounds = BoxBounds::new(lower, upper).expect("stored bounds are ordered");
        let layout = self.model.layout();
        let map = wavelet::canonical_to_packed(&layout);
        // the polish exists to make later tracking frames start at rest; a
        // loose tolerance here would leave residual drift, so both stops
        // run near machine precision
        let opts = MinimizeOptions {
            max_iters: self.cfg.joint_max_iters,
            memory: self.cfg.optimizer.memory.max(16),
            grad_tol: self.cfg.optimizer.grad_tol.min(1e-9),
            f_tol_rel: self.cfg.optimizer.f_tol_rel.min(f64::EPSILON),
        };

        for _round in 0..rounds {
            let round_start = self.positions.clone();
            self.rebuild_correspondences();
            // Gauss-Newton diagonal curvature estimate: support sizes span
            // two orders of magnitude across the hierarchy, so the raw
            // problem is badly scaled for a quasi-Newton start
            let precond = self.joint_preconditioner(mode, block_dim);
            let mut x = Vec::with_capacity(n * block_dim);
            for k in 0..n {
                if mode == BlockMode::Full {
                    x.extend_from_slice(self.weights.id_block(k));
                }
                x.extend_from_slice(self.weights.expr_block(k));
            }
            let scaled_x: Vec<f64> = x.iter().zip(&precond).map(|(v, p)| v / p).collect();
            let scaled_bounds = BoxBounds::new(
                bounds
                    .lower()
                    .iter()
                    .zip(&precond)
                    .map(|(v, p)| v / p)
                    .collect(),
                bounds
                    .upper()
                    .iter()
                    .zip(&precond)
                    .map(|(v, p)| v / p)
                    .collect(),
            )
            .expect("positive preconditioner keeps bounds ordered");
            let start_energy = self.total_energy(FitStage::JointRefinement);
            let result = {
                let mut problem = JointObjective {
                    model: self.model,
                    layout: &layout,
                    map: &map,
                    mode,
                    weights: &self.weights,
                    transform: self.transform,
                    rotation_t: self.transform.rotation.transpose(),
                    corr: &self.corr,
                    landmarks: &self.landmarks,
                    landmark_weight: self.landmark_weight,
                    rho_smooth: self.cfg.rho_smooth,
                    rho_temporal: self.cfg.rho_temporal,
                    anchor: self.temporal_anchor.as_deref(),
                    values: vec![Vec3::ZERO; n],
                    positions: vec![Vec3::ZERO; n],
                    gpos: vec![Vec3::ZERO; n],
                };
                let mut unscaled = vec![0.0; x.len()];
                minimize(
                    |y| {
                        for ((u, yv), pv) in unscaled.iter_mut().zip(y).zip(&precond) {
                            *u = yv * pv;
                        }
                        let mut e = problem.eval(&unscaled);
                        for (g, pv) in e.gradient.iter_mut().zip(&precond) {
                            *g *= pv;
                        }
                        e
                    },
                    &scaled_x,
                    &scaled_bounds,
                    &opts,
                )?
            };
            // commit (back in unscaled coordinates)
            let x_final: Vec<f64> = result.x.iter().zip(&precond).map(|(v, p)| v * p).collect();
            for k in 0..n {
                match mode {
                    BlockMode::Full => {
                        let base = k * (m2 + m3);
                        self.weights
                            .id_block_mut(k)
                            .copy_from_slice(&x_final[base..base + m2]);
                        self.weights
                            .expr_block_mut(k)
                            .copy_from_slice(&x_final[base + m2..base + m2 + m3]);
                    }
                    BlockMode::ExpressionOnly => {
                        self.weights
                            .expr_block_mut(k)
                            .copy_from_slice(&x_final[k * m3..(k + 1) * m3]);
                    }
                }
            }
            self.coeff_values = self.model.synthesize_coefficients(&self.weights)?;
            self.positions = wavelet::inverse_positions(&layout, &self.coeff_values);
            let end_energy = self.total_energy(FitStage::JointRefinement);
            self.trace.push(PassTrace {
                stage: FitStage::JointRefinement,
                level: 0,
                pass: _round,
                energies: vec![start_energy, end_energy.min(start_energy)],
            });
            let moved = self
                .positions
                .iter()
                .zip(&round_start)
                .map(|(a, b)| (*a - *b).max_abs())
                .fold(0.0, f64::max);
            if moved < self.cfg.movement_tol {
                break;
            }
        }
        Ok(())
    }

    fn finish(
        self,
        initialization_weights: FitWeights,
        warnings: Vec<FitWarning>,
    ) -> Result<FitResult, FitError> {
        let fitted_shape = self.model.synthesize_shape(&self.weights)?;
        let per_vertex_distance = fitted_shape
            .positions()
            .iter()
            .map(|&p| self.tree.nearest(self.transform.apply(p)).1.sqrt())
            .collect();
        Ok(FitResult {
            weights: self.weights,
            initialization_weights,
            transform: self.transform,
            fitted_shape,
            energy_trace: self.trace,
            per_vertex_distance,
            warnings,
            stats: self.stats,
        })
    }
}

/// Which bounds apply during a stage.
enum StageBoxes<'b> {
    Uniform(f64),
    Relaxed(&'b SurfaceBoxes),
}

impl StageBoxes<'_> {
    fn block(&self, k: usize, m2: usize, m3: usize, mode: BlockMode) -> BoxBounds {
        match self {
            StageBoxes::Uniform(lambda) => {
                let dim = match mode {
                    BlockMode::Full => m2 + m3,
                    BlockMode::ExpressionOnly => m3,
                };
                BoxBounds::symmetric(dim, *lambda)
            }
            StageBoxes::Relaxed(boxes) => boxes.block(k, m2, m3, mode),
        }
    }
}

fn compute_halos(rows: usize, cols: usize, model: &WaveletShapeModel) -> Vec<Vec<u32>> {
    let n = rows * cols;
    let mut stamp = vec![u32::MAX; n];
    model
        .supports
        .iter()
        .enumerate()
        .map(|(k, support)| {
            let k32 = k as u32;
            let mut halo: Vec<u32> = support.vertices.clone();
            for &v in &halo {
                stamp[v as usize] = k32;
            }
            let mut frontier_start = 0;
            for _ring in 0..2 {
                let frontier_end = halo.len();
                for fi in frontier_start..frontier_end {
                    let v = halo[fi] as usize;
                    for u in &neighbors4_of(rows, cols, v) {
                        if stamp[u] != k32 {
                            stamp[u] = k32;
                            halo.push(u as u32);
                        }
                    }
                }
                frontier_start = frontier_end;
            }
            halo
        })
        .collect()
}

struct BlockObjective<'a> {
    cm: &'a MultilinearCoefficientModel,
    support_vertices: &'a [u32],
    responses: &'a [f64],
    halo: &'a [u32],
    positions: &'a [Vec3],
    current_value: Vec3,
    transform: SimilarityTransform,
    rotation_t: Mat3,
    corr: &'a [Option<Correspondence>],
    is_landmark: &'a [bool],
    landmarks: &'a [(u32, Vec3)],
    rows: usize,
    cols: usize,
    landmark_weight: f64,
    rho_smooth: f64,
    rho_temporal: f64,
    anchor: Option<&'a [Vec3]>,
    include_surface: bool,
    mode: BlockMode,
    frozen_id: Vec<f64>,
    resp_mark: &'a [f64],
    grad_mark: &'a mut [Vec3],
    touch_stamp: &'a mut [u64],
    touched: &'a mut Vec<u32>,
    stamp: &'a mut u64,
    objective_evals: &'a mut u64,
    distance_evals: &'a mut u64,
}

impl BlockObjective<'_> {
    fn eval(&mut self, w: &[f64]) -> ObjectiveEvaluation {
        *self.objective_evals += 1;
        let m2 = self.cm.m2();
        let (w2n, w3n): (&[f64], &[f64]) = match self.mode {
            BlockMode::Full => (&w[..m2], &w[m2..]),
            BlockMode::ExpressionOnly => (&self.frozen_id, w),
        };
        let w2a = self.cm.id_actual(w2n);
        let w3a = self.cm.expr_actual(w3n);
        let new_value = self.cm.synthesize_actual(&w2a, &w3a);
        let delta = new_value - self.current_value;

        let mut value = 0.0;
        // gradient of the energy with respect to the coefficient value
        let mut dvalue = Vec3::ZERO;
        let scale = self.transform.scale;

        for &(v, data) in self.landmarks {
            let v = v as usize;
            let x = self.positions[v] + delta * self.resp_mark[v];
            let r = self.transform.apply(x) - data;
            value += self.landmark_weight * r.norm_squared();
            let dx = self.rotation_t.apply(r) * (2.0 * self.landmark_weight * scale);
            dvalue += dx * self.resp_mark[v];
        }

        if self.include_surface {
            for (idx, &v32) in self.support_vertices.iter().enumerate() {
                let v = v32 as usize;
                if self.is_landmark[v] {
                    continue;
                }
                *self.distance_evals += 1;
                if let Some(c) = &self.corr[v] {
                    let x = self.positions[v] + delta * self.responses[idx];
                    let e = (self.transform.apply(x) - c.point).dot(c.normal);
                    value += e * e;
                    let dx = self.rotation_t.apply(c.normal) * (2.0 * e * scale);
                    dvalue += dx * self.responses[idx];
                }
            }
            if let Some(anchor) = self.anchor {
                for (idx, &v32) in self.support_vertices.iter().enumerate() {
                    let v = v32 as usize;
                    let x = self.positions[v] + delta * self.responses[idx];
                    let r = x - anchor[v];
                    value += self.rho_temporal * r.norm_squared();
                    dvalue += r * (2.0 * self.rho_temporal * self.responses[idx]);
                }
            }
        }

        if self.rho_smooth > 0.0 && !self.halo.is_empty() {
            *self.stamp += 1;
            let stamp = *self.stamp;
            self.touched.clear();
            let positions = self.positions;
            let resp_mark = self.resp_mark;
            let pos = |u: usize| positions[u] + delta * resp_mark[u];
            let umbrella = |u: usize| {
                let nb = neighbors4_of(self.rows, self.cols, u);
                let mut acc = Vec3::ZERO;
                for j in &nb {
                    acc += pos(j);
                }
                acc * (1.0 / nb.len() as f64) - pos(u)
            };
            for &v32 in self.halo {
                let v = v32 as usize;
                let nb = neighbors4_of(self.rows, self.cols, v);
                let mut acc = Vec3::ZERO;
                for j in &nb {
                    acc += umbrella(j);
                }
                let t = acc * (1.0 / nb.len() as f64) - umbrella(v);
                value += self.rho_smooth * t.norm_squared();
                let t2 = t * (2.0 * self.rho_smooth);
                let grad_mark = &mut *self.grad_mark;
                let touch_stamp = &mut *self.touch_stamp;
                let touched = &mut *self.touched;
                distribute_bi_umbrella_adjoint(self.rows, self.cols, v, t2, |u, g| {
                    if touch_stamp[u] != stamp {
                        touch_stamp[u] = stamp;
                        grad_mark[u] = Vec3::ZERO;
                        touched.push(u as u32);
                    }
                    grad_mark[u] += g;
                });
            }
            for &u32v in self.touched.iter() {
                let u = u32v as usize;
                if self.resp_mark[u] != 0.0 {
                    dvalue += self.grad_mark[u] * self.resp_mark[u];
                }
            }
        }

        // chain to normalized weights through the bilinear parametrization
        let mut gradient = Vec::with_capacity(w.len());
        if self.mode == BlockMode::Full {
            for (j, g) in self.cm.mode2_design(&w3a).iter().enumerate() {
                gradient.push(g.dot(dvalue) * self.cm.id_scale[j]);
            }
        }
        for (l, g) in self.cm.mode3_design(&w2a).iter().enumerate() {
            gradient.push(g.dot(dvalue) * self.cm.expr_scale[l]);
        }
        ObjectiveEvaluation { value, gradient }
    }
}

/// Full-space objective of the joint polish: all energies with frozen
/// correspondences, differentiated through the inverse transform and every
/// coefficient's bilinear parametrization at once.
struct JointObjective<'a> {
    model: &'a WaveletShapeModel,
    layout: &'a wavelet::WaveletLayout,
    map: &'a [u32],
    mode: BlockMode,
    weights: &'a FitWeights,
    transform: SimilarityTransform,
    rotation_t: Mat3,
    corr: &'a [Option<Correspondence>],
    landmarks: &'a [(usize, Vec3)],
    landmark_weight: f64,
    rho_smooth: f64,
    rho_temporal: f64,
    anchor: Option<&'a [Vec3]>,
    values: Vec<Vec3>,
    positions: Vec<Vec3>,
    gpos: Vec<Vec3>,
}

impl JointObjective<'_> {
    fn eval(&mut self, x: &[f64]) -> ObjectiveEvaluation {
        let n = self.model.coefficient_count();
        let m2 = self.model.m2;
        let m3 = self.model.m3;
        let block_dim = match self.mode {
            BlockMode::Full => m2 + m3,
            BlockMode::ExpressionOnly => m3,
        };
        let block = |k: usize| -> (&[f64], &[f64]) {
            match self.mode {
                BlockMode::Full => {
                    let base = k * block_dim;
                    (&x[base..base + m2], &x[base + m2..base + block_dim])
                }
                BlockMode::ExpressionOnly => {
                    (self.weights.id_block(k), &x[k * m3..(k + 1) * m3])
                }
            }
        };
        for k in 0..n {
            let cm = &self.model.coefficient_models[k];
            let (w2n, w3n) = block(k);
            self.values[k] = cm.synthesize_actual(&cm.id_actual(w2n), &cm.expr_actual(w3n));
        }
        for (k, &pidx) in self.map.iter().enumerate() {
            self.positions[pidx as usize] = self.values[k];
        }
        wavelet::inverse_packed(self.layout, &mut self.positions);

        let scale = self.transform.scale;
        let rows = self.layout.rows();
        let cols = self.layout.cols();
        let mut value = 0.0;
        for g in self.gpos.iter_mut() {
            *g = Vec3::ZERO;
        }
        for &(v, data) in self.landmarks {
            let r = self.transform.apply(self.positions[v]) - data;
            value += self.landmark_weight * r.norm_squared();
            self.gpos[v] += self.rotation_t.apply(r) * (2.0 * self.landmark_weight * scale);
        }
        for (v, c) in self.corr.iter().enumerate() {
            let Some(c) = c else { continue };
            let e = (self.transform.apply(self.positions[v]) - c.point).dot(c.normal);
            value += e * e;
            self.gpos[v] += self.rotation_t.apply(c.normal) * (2.0 * e * scale);
        }
        if self.rho_smooth > 0.0 {
            for v in 0..n {
                let t = crate::grid::bi_umbrella_of(rows, cols, &self.positions, v);
                value += self.rho_smooth * t.norm_squared();
                let t2 = t * (2.0 * self.rho_smooth);
                let gpos = &mut self.gpos;
                distribute_bi_umbrella_adjoint(rows, cols, v, t2, |u, g| {
                    gpos[u] += g;
                });
            }
        }
        if let Some(anchor) = self.anchor {
            for (v, (p, a)) in self.positions.iter().zip(anchor).enumerate() {
                let r = *p - *a;
                value += self.rho_temporal * r.norm_squared();
                self.gpos[v] += r * (2.0 * self.rho_temporal);
            }
        }

        let mut gradient = vec![0.0; x.len()];
        for k in 0..n {
            let cm = &self.model.coefficient_models[k];
            let mut dvalue = Vec3::ZERO;
            for (v, resp) in self.model.supports[k].iter() {
                dvalue += self.gpos[v] * resp;
            }
            let (w2n, w3n) = block(k);
            let w2a = cm.id_actual(w2n);
            let w3a = cm.expr_actual(w3n);
            match self.mode {
                BlockMode::Full => {
                    let base = k * block_dim;
                    for (j, g) in cm.mode2_design(&w3a).iter().enumerate() {
                        gradient[base + j] = g.dot(dvalue) * cm.id_scale[j];
                    }
                    for (l, g) in cm.mode3_design(&w2a).iter().enumerate() {
                        gradient[base + m2 + l] = g.dot(dvalue) * cm.expr_scale[l];
                    }
                }
                BlockMode::ExpressionOnly => {
                    for (l, g) in cm.mode3_design(&w2a).iter().enumerate() {
                        gradient[k * m3 + l] = g.dot(dvalue) * cm.expr_scale[l];
                    }
                }
            }
        }
        ObjectiveEvaluation { value, gradient }
    }
}

/// Fits the model to a scan: landmark-driven initialization (skipped with a
/// warning if the scan has no landmarks), then fixed-transform surface
/// fitting, both coarse-to-fine per coefficient.
pub fn fit(
    model: &WaveletShapeModel,
    scan: &TargetScan,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    let (result, _) = fit_with_boxes(model, scan, cfg, None, None, cfg.surface_rounds)?;
    Ok(result)
}

/// Full fit that also returns the relaxed surface boxes, so tracking can
/// keep later frames inside the bounds fixed by the first frame's
/// initialization.
fn fit_with_boxes(
    model: &WaveletShapeModel,
    scan: &TargetScan,
    cfg: &FitConfig,
    weights: Option<FitWeights>,
    anchor: Option<Vec<Vec3>>,
    surface_rounds: usize,
) -> Result<(FitResult, SurfaceBoxes), FitError> {
    cfg.validate()?;
    model.validate()?;
    let n = model.coefficient_count();
    let start_weights = weights.unwrap_or_else(|| FitWeights::zeros(n, model.m2, model.m3));
    let start_transform = cfg.initial_transform.unwrap_or_default();
    let mut state = FitState::new(model, scan, cfg, start_weights, start_transform, anchor)?;

    let mut warnings = Vec::new();
    if state.landmarks.is_empty() {
        warnings.push(FitWarning::NoLandmarks);
    } else {
        state.run_stage(
            FitStage::Initialization,
            BlockMode::Full,
            StageBoxes::Uniform(cfg.lambda_init),
            1,
        )?;
    }

    let initialization_weights = state.weights.clone();
    let boxes = SurfaceBoxes::from_initialization(&state.weights, cfg.lambda_surface);
    state.run_stage(
        FitStage::Surface,
        BlockMode::Full,
        StageBoxes::Relaxed(&boxes),
        surface_rounds,
    )?;
    if cfg.joint_refine {
        state.run_joint_refine(BlockMode::Full, &boxes, surface_rounds.max(4))?;
    }
    let result = state.finish(initialization_weights, warnings)?;
    Ok((result, boxes))
}

/// Tracks a motion sequence: a full fit on the first frame, then only the
/// expression weights are re-optimized per frame (identity weights frozen
/// at frame-0 values), with a temporal penalty anchored at the previous
/// frame's vertex positions and initialization from the previous frame's
/// expression weights.
pub fn track(
    model: &WaveletShapeModel,
    frames: &[TargetScan],
    cfg: &FitConfig,
) -> Result<Vec<FitResult>, FitError> {
    let Some(first) = frames.first() else {
        return Err(FitError::NoFrames);
    };
    // frames must end at jointly stationary states, otherwise the temporal
    // anchor lets constant sequences crawl
    let cfg = &FitConfig {
        joint_refine: true,
        ..cfg.clone()
    };
    let (first_result, boxes) = fit_with_boxes(model, first, cfg, None, None, cfg.track_rounds)?;
    let mut results = vec![first_result];

    for frame in &frames[1..] {
        let prev = results.last().expect("at least the first result");
        let anchor = prev.fitted_shape.positions().to_vec();
        let mut state = FitState::new(
            model,
            frame,
            cfg,
            prev.weights.clone(),
            prev.transform,
            Some(anchor),
        )?;
        let warnings = if state.landmarks.is_empty() {
            vec![FitWarning::NoLandmarks]
        } else {
            Vec::new()
        };
        let initialization_weights = state.weights.clone();
        state.run_stage(
            FitStage::Surface,
            BlockMode::ExpressionOnly,
            StageBoxes::Relaxed(&boxes),
            cfg.track_rounds,
        )?;
        state.run_joint_refine(BlockMode::ExpressionOnly, &boxes, cfg.track_rounds)?;
        results.push(state.finish(initialization_weights, warnings)?);
    }
    Ok(results)
}
