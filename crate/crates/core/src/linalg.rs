//! Small dense matrices and the symmetric eigensolver backing the tensor
//! factorization and the similarity estimate.
//!
//! Problem sizes here are tiny (Gram matrices of the shorter unfolding side,
//! 3x3 covariances), so a cyclic Jacobi sweep is accurate, dependency-free
//! and deterministic, which the reproducibility contracts rely on.

use alloc::vec;
use alloc::vec::Vec;

// std's inherent float methods shadow this trait when dev-deps link std
#[allow(unused_imports)]
use crate::num::F64Ext;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("jacobi eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "value count must match dims");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMat) -> DenseMat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self^T * v` without materializing the transpose.
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let vr = v[r];
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        out
    }

    /// Gram matrix `self * self^T`.
    pub fn gram_rows(&self) -> DenseMat {
        let mut g = DenseMat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let s: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }

    /// Keep the first `m` columns.
    pub fn truncate_cols(&self, m: usize) -> DenseMat {
        assert!(m <= self.cols);
        let mut out = DenseMat::zeros(self.rows, m);
        for r in 0..self.rows {
            out.data[r * m..(r + 1) * m].copy_from_slice(&self.row(r)[..m]);
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute deviation of `self^T self` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.transpose().matmul(self);
        let mut worst = 0.0f64;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for DenseMat {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

const QL_MAX_ITERS: usize = 50;

/// Eigendecomposition of a symmetric matrix: Householder tridiagonalization
/// followed by implicit-shift QL, the standard dense path. Deterministic;
/// returns eigenvalues in descending order with the matching eigenvectors
/// as the columns of an orthogonal matrix (ties keep pre-sort order).
pub fn sym_eigen(a: &DenseMat) -> Result<(Vec<f64>, DenseMat), LinalgError> {
    assert_eq!(a.rows, a.cols, "sym_eigen needs a square matrix");
    let n = a.rows;
    if n == 0 {
        return Ok((vec![], DenseMat::zeros(0, 0)));
    }
    if n == 1 {
        return Ok((vec![a[(0, 0)]], DenseMat::identity(1)));
    }

    let mut z = a.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tridiagonalize(&mut z, &mut d, &mut e);
    ql_implicit(&mut d, &mut e, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMat::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_c)] = z[(r, old_c)];
        }
    }
    Ok((values, vectors))
}

/// Householder reduction of a symmetric matrix to tridiagonal form, with
/// the accumulated orthogonal transform left in `z` so that
/// `a = z * tridiag(d, e) * z^T`.
fn tridiagonalize(z: &mut DenseMat, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| z[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = z[(i, l)];
            } else {
                for k in 0..=l {
                    z[(i, k)] /= scale;
                    h += z[(i, k)] * z[(i, k)];
                }
                let f = z[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    z[(j, i)] = z[(i, j)] / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += z[(j, k)] * z[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g_acc += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * z[(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * z[(i, k)];
                        z[(j, k)] -= delta;
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[(i, k)] * z[(k, j)];
                }
                for k in 0..i {
                    let delta = g * z[(k, i)];
                    z[(k, j)] -= delta;
                }
            }
        }
        d[i] = z[(i, i)];
        z[(i, i)] = 1.0;
        for j in 0..i {
            z[(j, i)] = 0.0;
            z[(i, j)] = 0.0;
        }
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix, rotating the
/// eigenvector accumulator `z` along.
fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut DenseMat) -> Result<(), LinalgError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITERS {
                return Err(LinalgError::NoConvergence(QL_MAX_ITERS));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + r.copysign(g);
            g = d[m] - d[l] + e[l] / denom;
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if r == 0.0 && i > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Minimum-norm least-squares solution of `a x = b` through the
/// eigendecomposition of the normal equations; rank-deficient systems get
/// the pseudo-inverse solution, which keeps degenerate training data from
/// producing NaN weights.
pub fn solve_least_squares(a: &DenseMat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if a.rows != b.len() {
        return Err(LinalgError::DimensionMismatch(a.rows, a.cols, b.len(), 1));
    }
    let at_a = a.transpose().matmul(a);
    let at_b = a.matvec_t(b);
    let (vals, vecs) = sym_eigen(&at_a)?;
    let cutoff = vals.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
    let mut x = vec![0.0; a.cols];
    for (j, &lam) in vals.iter().enumerate() {
        if lam <= cutoff || lam <= 0.0 {
            continue;
        }
        let vj = vecs.col(j);
        let coef: f64 = vj.iter().zip(&at_b).map(|(a, b)| a * b).sum::<f64>() / lam;
        for (xi, vji) in x.iter_mut().zip(&vj) {
            *xi += coef * vji;
        }
    }
    Ok(x)
}
