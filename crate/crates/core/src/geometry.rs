//! Point clouds, rigid transforms and the augmentation primitives used by
//! every other module.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality and determinant tolerance for [`RigidTransform`].
pub const ROTATION_TOLERANCE: f64 = 1e-12;

/// An ordered, non-empty list of finite 3D positions.
///
/// Indices into the cloud are stable: no read operation reorders points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidData("point cloud has no points".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidData(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| Point3::new(r[0], r[1], r[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point3<f64> {
        &self.points[i]
    }

    pub fn to_rows(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / self.points.len() as f64)
    }

    /// Cloud with rows reordered so that output row `j` is input row `order[j]`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let n = self.len();
        if let Some(&bad) = order.iter().find(|&&i| i >= n) {
            return Err(Error::invalid(format!("index {bad} out of range for {n} points")));
        }
        Self::new(order.iter().map(|&i| self.points[i]).collect())
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.points.iter().map(|p| Point3::from(p.coords * s)).collect())
    }
}

/// Rotation about the z axis only, or three independent uniform Euler angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationAxes {
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "euler-xyz")]
    EulerXyz,
}

/// A proper rigid motion `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).amax();
        if !(off <= ROTATION_TOLERANCE) {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {off:e})"
            )));
        }
        let det = rotation.determinant();
        if !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(Error::invalid(format!("rotation determinant is {det}, expected 1")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("translation is not finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: next.rotation * self.rotation,
            translation: next.rotation * self.translation + next.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }
}

/// Applies `t` to every point; order and count are preserved.
pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply_point(p)).collect(),
    }
}

/// Deterministic random rotation (zero translation).
///
/// `Z` draws one angle in `[0, 2π)` about the z axis. `EulerXyz` draws three
/// independent angles and composes `Rz · Ry · Rx`.
pub fn random_rotation(axes: RotationAxes, seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_rotation_with(axes, &mut rng)
}

pub(crate) fn random_rotation_with<R: Rng>(axes: RotationAxes, rng: &mut R) -> RigidTransform {
    let rotation = match axes {
        RotationAxes::Z => {
            let a = rng.random_range(0.0..TAU);
            Rotation3::from_axis_angle(&Vector3::z_axis(), a)
        }
        RotationAxes::EulerXyz => {
            let a = rng.random_range(0.0..TAU);
            let b = rng.random_range(0.0..TAU);
            let c = rng.random_range(0.0..TAU);
            Rotation3::from_axis_angle(&Vector3::z_axis(), a)
                * Rotation3::from_axis_angle(&Vector3::y_axis(), b)
                * Rotation3::from_axis_angle(&Vector3::x_axis(), c)
        }
    };
    RigidTransform {
        rotation: rotation.into_inner(),
        translation: Vector3::zeros(),
    }
}

/// Centers the cloud on its centroid and scales the farthest point to norm 1.
///
/// A cloud whose points all coincide maps to all zeros.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> PointCloud {
    let c = cloud.centroid();
    let centered: Vec<Vector3<f64>> = cloud.points.iter().map(|p| p - c).collect();
    let max_norm = centered.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let points = if max_norm > 0.0 {
        centered.iter().map(|v| Point3::from(v / max_norm)).collect()
    } else {
        vec![Point3::origin(); cloud.len()]
    };
    PointCloud { points }
}

/// Adds clamped Gaussian noise to every coordinate.
pub fn jitter(cloud: &PointCloud, sigma: f64, clip: f64, seed: u64) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    jitter_with(cloud, sigma, clip, &mut rng)
}

pub(crate) fn jitter_with<R: Rng>(
    cloud: &PointCloud,
    sigma: f64,
    clip: f64,
    rng: &mut R,
) -> Result<PointCloud> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("jitter sigma must be >= 0, got {sigma}")));
    }
    if !(clip > 0.0) {
        return Err(Error::invalid(format!("jitter clip must be > 0, got {clip}")));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let mut q = *p;
            for c in q.coords.iter_mut() {
                *c += normal.sample(rng).clamp(-clip, clip);
            }
            q
        })
        .collect();
    Ok(PointCloud { points })
}
