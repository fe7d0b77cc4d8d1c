//! 3D points, rotations and similarity transforms, plus the closed-form
//! absolute-orientation estimate used to align the template with scan data.

use alloc::vec::Vec;

use crate::linalg::{sym_eigen, DenseMat};
// std's inherent float methods shadow this trait when dev-deps link std
#[allow(unused_imports)]
use crate::num::F64Ext;

/// A 3D point or vector in millimeters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    #[inline]
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn component(self, c: usize) -> f64 {
        match c {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl core::ops::Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl core::ops::Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl core::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl core::ops::Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl core::ops::AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl core::ops::SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn zeros() -> Mat3 {
        Mat3([[0.0; 3]; 3])
    }

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y + self.0[0][2] * v.z,
            self.0[1][0] * v.x + self.0[1][1] * v.y + self.0[1][2] * v.z,
            self.0[2][0] * v.x + self.0[2][1] * v.y + self.0[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn matmul(&self, o: &Mat3) -> Mat3 {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn col(&self, c: usize) -> Vec3 {
        Vec3::new(self.0[0][c], self.0[1][c], self.0[2][c])
    }

    pub fn set_col(&mut self, c: usize, v: Vec3) {
        self.0[0][c] = v.x;
        self.0[1][c] = v.y;
        self.0[2][c] = v.z;
    }

    pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
        Mat3([
            [a.x * b.x, a.x * b.y, a.x * b.z],
            [a.y * b.x, a.y * b.y, a.y * b.z],
            [a.z * b.x, a.z * b.y, a.z * b.z],
        ])
    }

    pub fn add(&self, o: &Mat3) -> Mat3 {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += o.0[i][j];
            }
        }
        out
    }

    /// Rotation about the axis `(x, y, z)` is built from three elementary
    /// rotations; handy for tests and synthetic data.
    pub fn rotation_xyz(rx: f64, ry: f64, rz: f64) -> Mat3 {
        let (sx, cx) = (libm::sin(rx), libm::cos(rx));
        let (sy, cy) = (libm::sin(ry), libm::cos(ry));
        let (sz, cz) = (libm::sin(rz), libm::cos(rz));
        let mx = Mat3([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]]);
        let my = Mat3([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]]);
        let mz = Mat3([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]]);
        mz.matmul(&my).matmul(&mx)
    }

    /// Maximum absolute deviation of `self^T self` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.transpose().matmul(self);
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.0[i][j] - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum GeomError {
    #[error("degenerate correspondence configuration (fewer than 3 points or collinear)")]
    DegenerateConfiguration,
    #[error("invalid similarity transform: {0}")]
    InvalidTransform(&'static str),
}

/// Rigid motion plus uniform scaling mapping model coordinates into data
/// coordinates: `x -> scale * rotation * x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Mat3::IDENTITY,
            translation: Vec3::ZERO,
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(GeomError::InvalidTransform("scale must be positive"));
        }
        if self.rotation.orthonormality_defect() >= 1e-8 {
            return Err(GeomError::InvalidTransform("rotation is not orthonormal"));
        }
        if self.rotation.det() < 0.0 {
            return Err(GeomError::InvalidTransform("rotation is a reflection"));
        }
        if !self.translation.is_finite() {
            return Err(GeomError::InvalidTransform("translation is not finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.apply(p) * self.scale + self.translation
    }

    /// Rotate a direction without translating; used for normals (uniform
    /// scaling keeps directions).
    #[inline]
    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        self.rotation.apply(d)
    }

    pub fn invert(&self) -> SimilarityTransform {
        let rot_t = self.rotation.transpose();
        let inv_scale = 1.0 / self.scale;
        SimilarityTransform {
            scale: inv_scale,
            rotation: rot_t,
            translation: -(rot_t.apply(self.translation) * inv_scale),
        }
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation.matmul(&other.rotation),
            translation: self.apply(other.translation),
        }
    }
}

/// Singular value decomposition of a 3x3 matrix built on the symmetric
/// Jacobi eigensolver: `a = u * diag(sigma) * v^T` with `sigma` descending.
fn svd3(a: &Mat3) -> (Mat3, [f64; 3], Mat3) {
    let mut ata = DenseMat::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            ata[(i, j)] = (0..3).map(|k| a.0[k][i] * a.0[k][j]).sum();
        }
    }
    // 3x3 Jacobi always converges well within the sweep cap
    let (vals, vecs) = sym_eigen(&ata).expect("3x3 jacobi convergence");
    let mut v = Mat3::zeros();
    for c in 0..3 {
        let col = vecs.col(c);
        v.set_col(c, Vec3::new(col[0], col[1], col[2]));
    }
    let sigma = [
        vals[0].max(0.0).sqrt(),
        vals[1].max(0.0).sqrt(),
        vals[2].max(0.0).sqrt(),
    ];
    let mut u = Mat3::zeros();
    let cutoff = sigma[0] * 1e-13;
    let mut have = 0;
    for c in 0..3 {
        if sigma[c] > cutoff && sigma[c] > 0.0 {
            u.set_col(c, a.apply(v.col(c)) * (1.0 / sigma[c]));
            have = c + 1;
        }
    }
    // complete rank-deficient U to an orthonormal basis
    if have == 2 {
        u.set_col(2, u.col(0).cross(u.col(1)));
    } else if have < 2 {
        for c in have..3 {
            let mut best = Vec3::ZERO;
            for cand in [
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ] {
                let mut w = cand;
                for prev in 0..c {
                    let p = u.col(prev);
                    w -= p * w.dot(p);
                }
                if w.norm() > best.norm() {
                    best = w;
                }
            }
            u.set_col(c, best.normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0)));
        }
    }
    (u, sigma, v)
}

/// Closed-form least-squares similarity transform from paired points,
/// minimizing `sum ||T(model_i) - data_i||^2` over rotation, uniform scale
/// and translation (absolute orientation via the SVD of the centered
/// cross-covariance).
pub fn estimate_similarity(
    model_pts: &[Vec3],
    data_pts: &[Vec3],
) -> Result<SimilarityTransform, GeomError> {
    let n = model_pts.len();
    if n < 3 || n != data_pts.len() {
        return Err(GeomError::DegenerateConfiguration);
    }
    let inv_n = 1.0 / n as f64;
    let mut cm = Vec3::ZERO;
    let mut cd = Vec3::ZERO;
    for (&m, &d) in model_pts.iter().zip(data_pts) {
        cm += m;
        cd += d;
    }
    cm = cm * inv_n;
    cd = cd * inv_n;

    let mut h = Mat3::zeros();
    let mut model_var = 0.0;
    let mut model_scatter = Mat3::zeros();
    for (&m, &d) in model_pts.iter().zip(data_pts) {
        let mc = m - cm;
        let dc = d - cd;
        h = h.add(&Mat3::outer(mc, dc));
        model_scatter = model_scatter.add(&Mat3::outer(mc, mc));
        model_var += mc.norm_squared();
    }

    // collinear (or coincident) model points leave the rotation underdetermined
    let scatter_dm = DenseMat::from_rows(
        3,
        3,
        model_scatter.0.iter().flatten().copied().collect::<Vec<_>>(),
    );
    let (scatter_vals, _) = sym_eigen(&scatter_dm).expect("3x3 jacobi convergence");
    if scatter_vals[1] <= scatter_vals[0].max(0.0) * 1e-12 {
        return Err(GeomError::DegenerateConfiguration);
    }

    let (u, sigma, v) = svd3(&h);
    // H = sum mc dc^T, rotation maps model into data: R = V S U^T
    let d_sign = v.matmul(&u.transpose()).det();
    let s3 = if d_sign < 0.0 { -1.0 } else { 1.0 };
    let mut vs = v;
    vs.set_col(2, v.col(2) * s3);
    let rotation = vs.matmul(&u.transpose());
    let scale = (sigma[0] + sigma[1] + s3 * sigma[2]) / model_var;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(GeomError::DegenerateConfiguration);
    }
    let translation = cd - rotation.apply(cm) * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}
