//! Fitting targets: oriented point clouds and landmark correspondences.

use alloc::vec::Vec;

use crate::geom::Vec3;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScanError {
    #[error("scan has no points")]
    EmptyScan,
    #[error("points and normals differ in length ({points} vs {normals})")]
    LengthMismatch { points: usize, normals: usize },
    #[error("normal {0} is not unit length")]
    NonUnitNormal(usize),
    #[error("non-finite scan value at point {0}")]
    NonFinite(usize),
    #[error("landmark arrays differ in length ({indices} vs {points})")]
    LandmarkLengthMismatch { indices: usize, points: usize },
    #[error("duplicate landmark vertex index {0}")]
    DuplicateLandmark(usize),
    #[error("landmark vertex index {index} out of range for {vertex_count} vertices")]
    LandmarkOutOfRange { index: usize, vertex_count: usize },
}

/// Paired landmarks: a template vertex index and the corresponding observed
/// data point.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    model_indices: Vec<usize>,
    data_points: Vec<Vec3>,
}

impl LandmarkSet {
    pub fn new(model_indices: Vec<usize>, data_points: Vec<Vec3>) -> Result<Self, ScanError> {
        if model_indices.len() != data_points.len() {
            return Err(ScanError::LandmarkLengthMismatch {
                indices: model_indices.len(),
                points: data_points.len(),
            });
        }
        for (i, &idx) in model_indices.iter().enumerate() {
            if model_indices[..i].contains(&idx) {
                return Err(ScanError::DuplicateLandmark(idx));
            }
        }
        if let Some(bad) = data_points.iter().position(|p| !p.is_finite()) {
            return Err(ScanError::NonFinite(bad));
        }
        Ok(Self {
            model_indices,
            data_points,
        })
    }

    /// Index validity can only be checked against a concrete template.
    pub fn validate_for(&self, vertex_count: usize) -> Result<(), ScanError> {
        match self.model_indices.iter().find(|&&i| i >= vertex_count) {
            Some(&index) => Err(ScanError::LandmarkOutOfRange {
                index,
                vertex_count,
            }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.model_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_indices.is_empty()
    }

    pub fn model_indices(&self) -> &[usize] {
        &self.model_indices
    }

    pub fn data_points(&self) -> &[Vec3] {
        &self.data_points
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Vec3)> + '_ {
        self.model_indices
            .iter()
            .copied()
            .zip(self.data_points.iter().copied())
    }
}

/// An oriented point cloud, optionally with landmarks.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetScan {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    landmarks: Option<LandmarkSet>,
}

const UNIT_NORMAL_TOL: f64 = 1e-6;

impl TargetScan {
    pub fn new(
        points: Vec<Vec3>,
        normals: Vec<Vec3>,
        landmarks: Option<LandmarkSet>,
    ) -> Result<Self, ScanError> {
        if points.is_empty() {
            return Err(ScanError::EmptyScan);
        }
        if points.len() != normals.len() {
            return Err(ScanError::LengthMismatch {
                points: points.len(),
                normals: normals.len(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(ScanError::NonFinite(i));
            }
        }
        for (i, n) in normals.iter().enumerate() {
            if !n.is_finite() {
                return Err(ScanError::NonFinite(i));
            }
            if (n.norm() - 1.0).abs() > UNIT_NORMAL_TOL {
                return Err(ScanError::NonUnitNormal(i));
            }
        }
        Ok(Self {
            points,
            normals,
            landmarks,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn landmarks(&self) -> Option<&LandmarkSet> {
        self.landmarks.as_ref()
    }

    pub fn with_landmarks(mut self, landmarks: Option<LandmarkSet>) -> Self {
        self.landmarks = landmarks;
        self
    }

    /// Applies a rigid motion (plus scale) to points, normals and landmark
    /// data points alike; used by the transform-invariance tests.
    pub fn transformed(&self, t: &crate::geom::SimilarityTransform) -> TargetScan {
        let points = self.points.iter().map(|&p| t.apply(p)).collect();
        let normals = self
            .normals
            .iter()
            .map(|&n| t.apply_direction(n))
            .collect();
        let landmarks = self.landmarks.as_ref().map(|l| LandmarkSet {
            model_indices: l.model_indices.clone(),
            data_points: l.data_points.iter().map(|&p| t.apply(p)).collect(),
        });
        TargetScan {
            points,
            normals,
            landmarks,
        }
    }
}
