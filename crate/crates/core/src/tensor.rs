//! 3-mode tensor algebra: unfoldings, mode products, and the truncated
//! higher-order SVD used to learn one small model per wavelet coefficient.
//!
//! Canonical value layout: mode-1 index fastest, then mode-2, then mode-3
//! (`values[i1 + d1*(i2 + d2*i3)]`). Unfolding along mode `m` produces the
//! `d_m x (product of the others)` matrix whose columns are mode-`m` fibers,
//! enumerated with the remaining mode indices in ascending mode order and
//! the last of them varying fastest. Both conventions are frozen; trained
//! model files depend on them.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{sym_eigen, DenseMat, LinalgError};
// std's inherent float methods shadow this trait when dev-deps link std
#[allow(unused_imports)]
use crate::num::F64Ext;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("unsupported mode {0} (only modes 2 and 3)")]
    UnsupportedMode(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("singular value decomposition failed: {0}")]
    SvdFailure(LinalgError),
}

/// Dense 3-mode tensor with dimensions `(d1, d2, d3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode3Tensor {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl Mode3Tensor {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            values: vec![0.0; d1 * d2 * d3],
        }
    }

    pub fn from_values(
        dims: (usize, usize, usize),
        values: Vec<f64>,
    ) -> Result<Self, TensorError> {
        if values.len() != dims.0 * dims.1 * dims.2 {
            return Err(TensorError::ShapeMismatch(
                "value count must equal d1*d2*d3",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::ShapeMismatch("values must be finite"));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn idx(&self, i1: usize, i2: usize, i3: usize) -> usize {
        debug_assert!(i1 < self.dims.0 && i2 < self.dims.1 && i3 < self.dims.2);
        i1 + self.dims.0 * (i2 + self.dims.1 * i3)
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        self.values[self.idx(i1, i2, i3)]
    }

    #[inline]
    pub fn set(&mut self, i1: usize, i2: usize, i3: usize, v: f64) {
        let idx = self.idx(i1, i2, i3);
        self.values[idx] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Mode3Tensor) -> Result<Mode3Tensor, TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::ShapeMismatch("tensor dims differ"));
        }
        Ok(Mode3Tensor {
            dims: self.dims,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Unfolds along mode 2 or 3 into a `d_mode x rest` matrix.
    pub fn unfold(&self, mode: usize) -> Result<DenseMat, TensorError> {
        let (d1, d2, d3) = self.dims;
        match mode {
            2 => {
                let mut m = DenseMat::zeros(d2, d1 * d3);
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        for i3 in 0..d3 {
                            m[(i2, i3 + d3 * i1)] = self.get(i1, i2, i3);
                        }
                    }
                }
                Ok(m)
            }
            3 => {
                let mut m = DenseMat::zeros(d3, d1 * d2);
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        for i3 in 0..d3 {
                            m[(i3, i2 + d2 * i1)] = self.get(i1, i2, i3);
                        }
                    }
                }
                Ok(m)
            }
            other => Err(TensorError::UnsupportedMode(other)),
        }
    }

    /// Inverse bookkeeping of [`Mode3Tensor::unfold`].
    pub fn refold(
        m: &DenseMat,
        dims: (usize, usize, usize),
        mode: usize,
    ) -> Result<Mode3Tensor, TensorError> {
        let (d1, d2, d3) = dims;
        let mut t = Mode3Tensor::zeros(d1, d2, d3);
        match mode {
            2 => {
                if m.shape() != (d2, d1 * d3) {
                    return Err(TensorError::ShapeMismatch("refold dims disagree"));
                }
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        for i3 in 0..d3 {
                            t.set(i1, i2, i3, m[(i2, i3 + d3 * i1)]);
                        }
                    }
                }
            }
            3 => {
                if m.shape() != (d3, d1 * d2) {
                    return Err(TensorError::ShapeMismatch("refold dims disagree"));
                }
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        for i3 in 0..d3 {
                            t.set(i1, i2, i3, m[(i3, i2 + d2 * i1)]);
                        }
                    }
                }
            }
            other => return Err(TensorError::UnsupportedMode(other)),
        }
        Ok(t)
    }

    /// Mode product: every mode-`mode` fiber `f` is replaced by `m * f`.
    pub fn mode_product(&self, m: &DenseMat, mode: usize) -> Result<Mode3Tensor, TensorError> {
        let (d1, d2, d3) = self.dims;
        match mode {
            2 => {
                if m.cols() != d2 {
                    return Err(TensorError::ShapeMismatch(
                        "matrix columns must equal mode-2 dim",
                    ));
                }
                let p = m.rows();
                let mut out = Mode3Tensor::zeros(d1, p, d3);
                for i1 in 0..d1 {
                    for i3 in 0..d3 {
                        for r in 0..p {
                            let mut acc = 0.0;
                            for i2 in 0..d2 {
                                acc += m[(r, i2)] * self.get(i1, i2, i3);
                            }
                            out.set(i1, r, i3, acc);
                        }
                    }
                }
                Ok(out)
            }
            3 => {
                if m.cols() != d3 {
                    return Err(TensorError::ShapeMismatch(
                        "matrix columns must equal mode-3 dim",
                    ));
                }
                let p = m.rows();
                let mut out = Mode3Tensor::zeros(d1, d2, p);
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        for r in 0..p {
                            let mut acc = 0.0;
                            for i3 in 0..d3 {
                                acc += m[(r, i3)] * self.get(i1, i2, i3);
                            }
                            out.set(i1, i2, r, acc);
                        }
                    }
                }
                Ok(out)
            }
            other => Err(TensorError::UnsupportedMode(other)),
        }
    }
}

/// Truncated HOSVD of a 3-mode tensor (mode 1 untouched).
#[derive(Clone, Debug, PartialEq)]
pub struct HosvdResult {
    /// Core tensor, dims `(d1, m2, m3)`.
    pub core: Mode3Tensor,
    /// `d2 x m2`, orthonormal columns.
    pub mode2_factors: DenseMat,
    /// `d3 x m3`, orthonormal columns.
    pub mode3_factors: DenseMat,
    /// Full singular spectrum of the mode-2 unfolding, descending.
    pub mode2_singular: Vec<f64>,
    /// Full singular spectrum of the mode-3 unfolding, descending.
    pub mode3_singular: Vec<f64>,
}

impl HosvdResult {
    /// `core x2 U2 x3 U3`.
    pub fn reconstruct(&self) -> Result<Mode3Tensor, TensorError> {
        self.core
            .mode_product(&self.mode2_factors, 2)?
            .mode_product(&self.mode3_factors, 3)
    }
}

/// Makes the largest-magnitude entry of every column non-negative; HOSVD is
/// sign-ambiguous and model files must be reproducible.
fn fix_column_signs(u: &mut DenseMat) {
    for c in 0..u.cols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for r in 0..u.rows() {
            let a = u[(r, c)].abs();
            if a > best_abs + 1e-15 {
                best_abs = a;
                best = r;
            }
        }
        if u[(best, c)] < 0.0 {
            for r in 0..u.rows() {
                u[(r, c)] = -u[(r, c)];
            }
        }
    }
}

/// Leading left singular vectors of `a` plus its full singular spectrum,
/// via the eigendecomposition of the smaller Gram matrix (training keeps
/// d1 = 3, so unfoldings are short-fat or tall-thin and the Gram side is
/// what the complexity budget assumes).
fn leading_left_singular(a: &DenseMat, m: usize) -> Result<(DenseMat, Vec<f64>), TensorError> {
    let (r, c) = a.shape();
    let rank_cap = r.min(c);
    let mut sigma;
    let mut u;
    if r <= c {
        let gram = a.gram_rows();
        let (vals, vecs) = sym_eigen(&gram).map_err(TensorError::SvdFailure)?;
        sigma = vals.iter().map(|&l| l.max(0.0).sqrt()).collect::<Vec<_>>();
        u = vecs.truncate_cols(m);
    } else {
        let at = a.transpose();
        let gram = at.gram_rows();
        let (vals, vecs) = sym_eigen(&gram).map_err(TensorError::SvdFailure)?;
        sigma = vals.iter().map(|&l| l.max(0.0).sqrt()).collect::<Vec<_>>();
        let cutoff = sigma.first().copied().unwrap_or(0.0) * 1e-13;
        u = DenseMat::zeros(r, m);
        for j in 0..m {
            if j < sigma.len() && sigma[j] > cutoff && sigma[j] > 0.0 {
                let vj = vecs.col(j);
                let uj = a.matvec(&vj);
                for i in 0..r {
                    u[(i, j)] = uj[i] / sigma[j];
                }
            } else {
                // deterministic orthonormal completion from standard basis
                let mut best_col = vec![0.0; r];
                let mut best_norm = -1.0;
                for e in 0..r {
                    let mut w = vec![0.0; r];
                    w[e] = 1.0;
                    for jj in 0..j {
                        let dot: f64 = (0..r).map(|i| u[(i, jj)] * w[i]).sum();
                        for i in 0..r {
                            w[i] -= dot * u[(i, jj)];
                        }
                    }
                    let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > best_norm {
                        best_norm = norm;
                        best_col = w;
                    }
                    if norm > 0.9 {
                        break;
                    }
                }
                for i in 0..r {
                    u[(i, j)] = best_col[i] / best_norm.max(1e-300);
                }
            }
        }
    }
    sigma.truncate(rank_cap);
    fix_column_signs(&mut u);
    Ok((u, sigma))
}

/// Truncated higher-order SVD: `mode2_factors`/`mode3_factors` hold the
/// first `m2`/`m3` left singular vectors of the unfoldings and
/// `core = t x2 U2^T x3 U3^T`. Exact when `m2`, `m3` reach the unfolding
/// ranks.
pub fn hosvd(t: &Mode3Tensor, m2: usize, m3: usize) -> Result<HosvdResult, TensorError> {
    let (_, d2, d3) = t.dims();
    if m2 == 0 || m2 > d2 || m3 == 0 || m3 > d3 {
        return Err(TensorError::ShapeMismatch(
            "truncation ranks must satisfy 1 <= m <= d",
        ));
    }
    let (u2, s2) = leading_left_singular(&t.unfold(2)?, m2)?;
    let (u3, s3) = leading_left_singular(&t.unfold(3)?, m3)?;
    let core = t
        .mode_product(&u2.transpose(), 2)?
        .mode_product(&u3.transpose(), 3)?;
    Ok(HosvdResult {
        core,
        mode2_factors: u2,
        mode3_factors: u3,
        mode2_singular: s2,
        mode3_singular: s3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn random_tensor(d1: usize, d2: usize, d3: usize, seed: u64) -> Mode3Tensor {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let values = (0..d1 * d2 * d3)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Mode3Tensor::from_values((d1, d2, d3), values).unwrap()
    }

    #[test]
    fn unfold_mode2_follows_frozen_fiber_order() {
        // v(i,j,k) = 4i + 2j + k on a 2x2x2 tensor
        let mut t = Mode3Tensor::zeros(2, 2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    t.set(i, j, k, (4 * i + 2 * j + k) as f64);
                }
            }
        }
        let m = t.unfold(2).unwrap();
        assert_eq!(m.shape(), (2, 4));
        // columns enumerate (i1, i3) with i3 fastest
        assert_eq!(m.row(0), &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(m.row(1), &[2.0, 3.0, 6.0, 7.0]);
    }

    #[test]
    fn unfold_of_ones_is_ones() {
        let t = Mode3Tensor::from_values((2, 3, 2), vec![1.0; 12]).unwrap();
        for mode in [2, 3] {
            let m = t.unfold(mode).unwrap();
            assert!(m.data().iter().all(|&v| v == 1.0));
        }
        assert!(matches!(t.unfold(1), Err(TensorError::UnsupportedMode(1))));
    }

    #[test]
    fn unfold_refold_roundtrip_exact() {
        let t = random_tensor(3, 4, 5, 21);
        for mode in [2, 3] {
            let m = t.unfold(mode).unwrap();
            let back = Mode3Tensor::refold(&m, t.dims(), mode).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn mode_product_identity_and_zero() {
        let t = random_tensor(3, 4, 5, 22);
        let id = DenseMat::identity(4);
        let same = t.mode_product(&id, 2).unwrap();
        for (a, b) in same.values().iter().zip(t.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let zero = DenseMat::zeros(2, 5);
        let z = t.mode_product(&zero, 3).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mode_product_matches_triple_loop() {
        let t = random_tensor(3, 4, 5, 23);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(24);
        let m = DenseMat::from_rows(2, 4, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect());
        let out = t.mode_product(&m, 2).unwrap();
        for i1 in 0..3 {
            for r in 0..2 {
                for i3 in 0..5 {
                    let mut acc = 0.0;
                    for i2 in 0..4 {
                        acc += m[(r, i2)] * t.get(i1, i2, i3);
                    }
                    assert_abs_diff_eq!(out.get(i1, r, i3), acc, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn mode_products_commute_across_modes() {
        let t = random_tensor(3, 4, 5, 25);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(26);
        let a = DenseMat::from_rows(2, 4, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect());
        let b = DenseMat::from_rows(3, 5, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect());
        let ab = t.mode_product(&a, 2).unwrap().mode_product(&b, 3).unwrap();
        let ba = t.mode_product(&b, 3).unwrap().mode_product(&a, 2).unwrap();
        for (x, y) in ab.values().iter().zip(ba.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_one_tensor_is_exact_at_rank_one() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(27);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut t = Mode3Tensor::zeros(3, 4, 5);
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..5 {
                    t.set(i, j, k, a[i] * b[j] * c[k]);
                }
            }
        }
        let h = hosvd(&t, 1, 1).unwrap();
        let err = t.sub(&h.reconstruct().unwrap()).unwrap().frobenius_norm();
        assert!(err < 1e-10, "rank-1 reconstruction error {err}");
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let t = random_tensor(3, 4, 5, 28);
        let h = hosvd(&t, 4, 5).unwrap();
        let err = t.sub(&h.reconstruct().unwrap()).unwrap().frobenius_norm();
        assert!(err < 1e-10, "full reconstruction error {err}");
        assert!(h.mode2_factors.orthonormality_defect() < 1e-10);
        assert!(h.mode3_factors.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn truncation_error_obeys_frobenius_bound() {
        for seed in 30..40 {
            let t = random_tensor(3, 6, 5, seed);
            let (m2, m3) = (2, 2);
            let h = hosvd(&t, m2, m3).unwrap();
            let err = t.sub(&h.reconstruct().unwrap()).unwrap().frobenius_norm();
            let bound: f64 = h.mode2_singular[m2..].iter().map(|s| s * s).sum::<f64>()
                + h.mode3_singular[m3..].iter().map(|s| s * s).sum::<f64>();
            assert!(
                err * err <= bound + 1e-10,
                "err^2 {} above bound {}",
                err * err,
                bound
            );
        }
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let t = random_tensor(3, 6, 5, 41);
        let h1 = hosvd(&t, 3, 3).unwrap();
        let h2 = hosvd(&t, 3, 3).unwrap();
        assert_eq!(h1, h2);
        for c in 0..3 {
            let col = h1.mode2_factors.col(c);
            let peak = col
                .iter()
                .cloned()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap();
            assert!(peak >= 0.0, "column {c} peak sign not fixed");
        }
    }

    #[test]
    fn zero_tensor_produces_orthonormal_factors() {
        let t = Mode3Tensor::zeros(3, 4, 5);
        let h = hosvd(&t, 3, 3).unwrap();
        assert!(h.core.frobenius_norm() < 1e-12);
        assert!(h.mode2_factors.orthonormality_defect() < 1e-10);
        assert!(h.mode3_factors.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn hosvd_rejects_bad_ranks() {
        let t = Mode3Tensor::zeros(3, 4, 5);
        assert!(hosvd(&t, 0, 3).is_err());
        assert!(hosvd(&t, 5, 3).is_err());
        assert!(hosvd(&t, 3, 6).is_err());
    }
}
