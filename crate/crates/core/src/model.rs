//! The learned shape space: one small multilinear model per wavelet
//! coefficient, plus synthesis of coefficients and full shapes.
//!
//! Fitting and synthesis take weights in *scale-normalized* units: the
//! stored per-component training standard deviation maps them to actual
//! factor coordinates via `actual = mode_mean + scale * w`. Zero therefore
//! means "at the mode-mean", and the hyper-box half-widths used by fitting
//! are measured in standard deviations.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::Vec3;
use crate::grid::QuadGridShape;
use crate::tensor::Mode3Tensor;
use crate::wavelet::{self, CoefficientSupport, WaveletError, WaveletLayout};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

/// Smallest stored scale; components with zero training variance get this
/// floor so normalized weights stay finite.
pub const SCALE_FLOOR: f64 = 1e-12;

/// The learned model of a single wavelet coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilinearCoefficientModel {
    /// Training mean of the coefficient.
    pub mean: Vec3,
    /// Core tensor, dims `(3, m2, m3)`.
    pub core: Mode3Tensor,
    /// Mean of the identity factor rows (the training samples' coordinates).
    pub id_mode_mean: Vec<f64>,
    /// Mean of the expression factor rows.
    pub expr_mode_mean: Vec<f64>,
    /// Per-component standard deviation across training identities, > 0.
    pub id_scale: Vec<f64>,
    /// Per-component standard deviation across training expressions, > 0.
    pub expr_scale: Vec<f64>,
}

impl MultilinearCoefficientModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        let (d1, m2, m3) = self.core.dims();
        if d1 != 3 {
            return Err(ModelError::ShapeMismatch("core mode-1 dim must be 3"));
        }
        if self.id_mode_mean.len() != m2 || self.id_scale.len() != m2 {
            return Err(ModelError::ShapeMismatch("identity vectors must have length m2"));
        }
        if self.expr_mode_mean.len() != m3 || self.expr_scale.len() != m3 {
            return Err(ModelError::ShapeMismatch("expression vectors must have length m3"));
        }
        if self
            .id_scale
            .iter()
            .chain(&self.expr_scale)
            .any(|&s| !(s > 0.0) || !s.is_finite())
        {
            return Err(ModelError::ShapeMismatch("scales must be strictly positive"));
        }
        if !self.mean.is_finite() {
            return Err(ModelError::ShapeMismatch("mean must be finite"));
        }
        Ok(())
    }

    pub fn m2(&self) -> usize {
        self.core.dims().1
    }

    pub fn m3(&self) -> usize {
        self.core.dims().2
    }

    /// Actual identity factor coordinates for normalized weights.
    pub fn id_actual(&self, w_norm: &[f64]) -> Vec<f64> {
        self.id_mode_mean
            .iter()
            .zip(&self.id_scale)
            .zip(w_norm)
            .map(|((m, s), w)| m + s * w)
            .collect()
    }

    /// Actual expression factor coordinates for normalized weights.
    pub fn expr_actual(&self, w_norm: &[f64]) -> Vec<f64> {
        self.expr_mode_mean
            .iter()
            .zip(&self.expr_scale)
            .zip(w_norm)
            .map(|((m, s), w)| m + s * w)
            .collect()
    }

    /// `G2[j] = sum_l core(:,j,l) * w3_actual[l]`: the per-identity-component
    /// direction of the coefficient at fixed expression coordinates.
    pub fn mode2_design(&self, w3_actual: &[f64]) -> Vec<Vec3> {
        let (_, m2, m3) = self.core.dims();
        debug_assert_eq!(w3_actual.len(), m3);
        let mut out = vec![Vec3::ZERO; m2];
        for l in 0..m3 {
            let wl = w3_actual[l];
            if wl == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += Vec3::new(
                    self.core.get(0, j, l),
                    self.core.get(1, j, l),
                    self.core.get(2, j, l),
                ) * wl;
            }
        }
        out
    }

    /// `G3[l] = sum_j core(:,j,l) * w2_actual[j]`.
    pub fn mode3_design(&self, w2_actual: &[f64]) -> Vec<Vec3> {
        let (_, m2, m3) = self.core.dims();
        debug_assert_eq!(w2_actual.len(), m2);
        let mut out = vec![Vec3::ZERO; m3];
        for j in 0..m2 {
            let wj = w2_actual[j];
            if wj == 0.0 {
                continue;
            }
            for (l, o) in out.iter_mut().enumerate() {
                *o += Vec3::new(
                    self.core.get(0, j, l),
                    self.core.get(1, j, l),
                    self.core.get(2, j, l),
                ) * wj;
            }
        }
        out
    }

    /// Coefficient value for normalized weights:
    /// `mean + core x2 actual(w2)^T x3 actual(w3)^T`.
    pub fn synthesize(&self, w2_norm: &[f64], w3_norm: &[f64]) -> Result<Vec3, ModelError> {
        let (_, m2, m3) = self.core.dims();
        if w2_norm.len() != m2 || w3_norm.len() != m3 {
            return Err(ModelError::ShapeMismatch("weight lengths must match m2/m3"));
        }
        let w2a = self.id_actual(w2_norm);
        let w3a = self.expr_actual(w3_norm);
        Ok(self.synthesize_actual(&w2a, &w3a))
    }

    pub(crate) fn synthesize_actual(&self, w2a: &[f64], w3a: &[f64]) -> Vec3 {
        let (_, m2, m3) = self.core.dims();
        let mut acc = self.mean;
        for l in 0..m3 {
            let wl = w3a[l];
            for j in 0..m2 {
                let w = w2a[j] * wl;
                acc += Vec3::new(
                    self.core.get(0, j, l),
                    self.core.get(1, j, l),
                    self.core.get(2, j, l),
                ) * w;
            }
        }
        acc
    }
}

/// Template metadata carried alongside the learned coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateInfo {
    pub rows: usize,
    pub cols: usize,
    pub levels: usize,
    /// Designated landmark vertices, fixed at model-build time.
    pub landmark_indices: Vec<u32>,
}

/// The full learned shape space: one model per wavelet coefficient plus the
/// template geometry and per-coefficient influence sets.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletShapeModel {
    pub template: TemplateInfo,
    pub m2: usize,
    pub m3: usize,
    pub coefficient_models: Vec<MultilinearCoefficientModel>,
    pub supports: Vec<CoefficientSupport>,
}

impl WaveletShapeModel {
    pub fn layout(&self) -> WaveletLayout {
        WaveletLayout::new(self.template.rows, self.template.cols, self.template.levels)
            .expect("validated template dims")
    }

    pub fn vertex_count(&self) -> usize {
        self.template.rows * self.template.cols
    }

    pub fn coefficient_count(&self) -> usize {
        self.coefficient_models.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let layout = WaveletLayout::new(
            self.template.rows,
            self.template.cols,
            self.template.levels,
        )?;
        let n = layout.coefficient_count();
        if self.coefficient_models.len() != n {
            return Err(ModelError::ShapeMismatch(
                "coefficient model count must equal vertex count",
            ));
        }
        if self.supports.len() != n {
            return Err(ModelError::ShapeMismatch("support count must equal vertex count"));
        }
        let mut covered = vec![false; n];
        for s in &self.supports {
            for (v, _) in s.iter() {
                if v >= n {
                    return Err(ModelError::ShapeMismatch("support vertex out of range"));
                }
                covered[v] = true;
            }
        }
        if covered.iter().any(|&c| !c) {
            return Err(ModelError::ShapeMismatch(
                "supports must cover every vertex",
            ));
        }
        for m in &self.coefficient_models {
            m.validate()?;
            if m.m2() != self.m2 || m.m3() != self.m3 {
                return Err(ModelError::ShapeMismatch(
                    "coefficient model ranks must match the model header",
                ));
            }
        }
        for &l in &self.template.landmark_indices {
            if l as usize >= n {
                return Err(ModelError::ShapeMismatch("landmark index out of range"));
            }
        }
        Ok(())
    }

    /// All coefficient values for the given weights.
    pub fn synthesize_coefficients(&self, w: &FitWeights) -> Result<Vec<Vec3>, ModelError> {
        if w.coefficient_count() != self.coefficient_count()
            || w.m2() != self.m2
            || w.m3() != self.m3
        {
            return Err(ModelError::ShapeMismatch("weight array shape must match model"));
        }
        self.coefficient_models
            .iter()
            .enumerate()
            .map(|(k, m)| m.synthesize(w.id_block(k), w.expr_block(k)))
            .collect()
    }

    /// Synthesizes coefficients and applies the inverse wavelet transform.
    pub fn synthesize_shape(&self, w: &FitWeights) -> Result<QuadGridShape, ModelError> {
        let coeffs = self.synthesize_coefficients(w)?;
        let layout = self.layout();
        let positions = wavelet::inverse_positions(&layout, &coeffs);
        QuadGridShape::new(
            self.template.rows,
            self.template.cols,
            self.template.levels,
            positions,
        )
        .map_err(|_| ModelError::ShapeMismatch("synthesized positions invalid"))
    }

    /// The model mean face (all weights at the mode-means).
    pub fn mean_shape(&self) -> QuadGridShape {
        let w = FitWeights::zeros(self.coefficient_count(), self.m2, self.m3);
        self.synthesize_shape(&w).expect("zero weights always match")
    }
}

/// Per-coefficient identity and expression weights in normalized units.
#[derive(Clone, Debug, PartialEq)]
pub struct FitWeights {
    n: usize,
    m2: usize,
    m3: usize,
    id: Vec<f64>,
    expr: Vec<f64>,
}

impl FitWeights {
    pub fn zeros(n: usize, m2: usize, m3: usize) -> Self {
        Self {
            n,
            m2,
            m3,
            id: vec![0.0; n * m2],
            expr: vec![0.0; n * m3],
        }
    }

    pub fn from_parts(
        n: usize,
        m2: usize,
        m3: usize,
        id: Vec<f64>,
        expr: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if id.len() != n * m2 || expr.len() != n * m3 {
            return Err(ModelError::ShapeMismatch("weight vector lengths must be n*m"));
        }
        if id.iter().chain(&expr).any(|v| !v.is_finite()) {
            return Err(ModelError::ShapeMismatch("weights must be finite"));
        }
        Ok(Self { n, m2, m3, id, expr })
    }

    pub fn coefficient_count(&self) -> usize {
        self.n
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn m3(&self) -> usize {
        self.m3
    }

    pub fn id_block(&self, k: usize) -> &[f64] {
        &self.id[k * self.m2..(k + 1) * self.m2]
    }

    pub fn expr_block(&self, k: usize) -> &[f64] {
        &self.expr[k * self.m3..(k + 1) * self.m3]
    }

    pub fn id_block_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.id[k * self.m2..(k + 1) * self.m2]
    }

    pub fn expr_block_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.expr[k * self.m3..(k + 1) * self.m3]
    }

    pub fn id_flat(&self) -> &[f64] {
        &self.id
    }

    pub fn expr_flat(&self) -> &[f64] {
        &self.expr
    }
}
