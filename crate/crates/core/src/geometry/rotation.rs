use std::f64::consts::PI;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Proper rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    m: Matrix3<f64>,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

impl Rotation {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !(ortho <= 1e-9 && (det - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidInput(format!(
                "not a rotation (orthogonality residual {ortho:.2e}, det {det})"
            )));
        }
        Ok(Self { m })
    }

    /// Quaternion in (w, x, y, z) order; must be unit within 1e-6.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("quaternion norm {n} is not 1")));
        }
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
        Ok(Self {
            m: *q.to_rotation_matrix().matrix(),
        })
    }

    /// (w, x, y, z) with w ≥ 0.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let r = nalgebra::Rotation3::from_matrix_unchecked(self.m);
        let q = UnitQuaternion::from_rotation_matrix(&r);
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    /// Rodrigues formula. `axis` must be unit within 1e-9.
    pub fn exp(axis: &Vec3, angle: f64) -> Result<Self> {
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "rotation axis norm {} is not 1",
                axis.norm()
            )));
        }
        Ok(Self::exp_unchecked(axis, angle))
    }

    pub(crate) fn exp_unchecked(axis: &Vec3, angle: f64) -> Self {
        let k = skew(axis);
        Self {
            m: Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * k * k,
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn transpose(&self) -> Rotation {
        Rotation {
            m: self.m.transpose(),
        }
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.m * v
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation { m: self.m * other.m }
    }

    /// Frobenius distance between the matrices.
    pub fn distance(&self, other: &Rotation) -> f64 {
        (self.m - other.m).norm()
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> f64 {
        let c = ((self.m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let s = 0.5 * self.axial().norm();
        s.atan2(c)
    }

    fn axial(&self) -> Vec3 {
        let m = &self.m;
        Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeodesicKind {
    Regular,
    Identity,
    Antipodal,
}

/// Constant-axis rotation from one orientation to another.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geodesic {
    pub omega: Vec3,
    pub theta: f64,
    pub kind: GeodesicKind,
}

impl Geodesic {
    /// Logarithm of `rf · r0ᵀ` split into a unit axis and an angle in [0, π].
    pub fn between(r0: &Rotation, rf: &Rotation) -> Geodesic {
        let d = rf.compose(&r0.transpose());
        let theta = d.angle();
        if theta <= 1e-12 {
            return Geodesic {
                omega: Vec3::x(),
                theta: 0.0,
                kind: GeodesicKind::Identity,
            };
        }
        let axial = d.axial();
        // sin θ loses the axis near π; fall back to R + I whose columns span it.
        if PI - theta < 1e-6 {
            let b = d.m + Matrix3::identity();
            let mut col = b.column(0).into_owned();
            for j in 1..3 {
                if b.column(j).norm() > col.norm() {
                    col = b.column(j).into_owned();
                }
            }
            let mut omega = col.normalize();
            if omega.dot(&axial) < 0.0 {
                omega = -omega;
            }
            let kind = if PI - theta < 1e-9 {
                GeodesicKind::Antipodal
            } else {
                GeodesicKind::Regular
            };
            return Geodesic { omega, theta, kind };
        }
        Geodesic {
            omega: axial.normalize(),
            theta,
            kind: GeodesicKind::Regular,
        }
    }

    /// Orientation after turning by `angle` about the geodesic axis from `r0`.
    pub fn at(&self, r0: &Rotation, angle: f64) -> Rotation {
        Rotation::exp_unchecked(&self.omega, angle).compose(r0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_about_z() {
        let r = Rotation::exp(&Vec3::z(), PI / 2.0).unwrap();
        assert!((r.apply(&Vec3::x()) - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        let axis = Vec3::new(1.0, 2.0, -0.5).normalize();
        assert_eq!(Rotation::exp(&axis, 0.0).unwrap(), Rotation::identity());
    }

    #[test]
    fn half_turn_about_y() {
        let r = Rotation::exp(&Vec3::y(), PI).unwrap();
        let expect = Matrix3::from_diagonal(&Vec3::new(-1.0, 1.0, -1.0));
        assert!((r.matrix() - expect).norm() < 1e-15);
    }

    #[test]
    fn non_unit_axis_rejected() {
        assert!(Rotation::exp(&Vec3::new(0.0, 0.0, 2.0), 1.0).is_err());
    }

    #[test]
    fn geodesic_identity_and_quarter() {
        let g = Geodesic::between(&Rotation::identity(), &Rotation::identity());
        assert_eq!(g.theta, 0.0);
        assert_eq!(g.kind, GeodesicKind::Identity);
        assert_eq!(g.omega, Vec3::x());

        let rf = Rotation::exp(&Vec3::z(), PI / 2.0).unwrap();
        let g = Geodesic::between(&Rotation::identity(), &rf);
        assert!((g.omega - Vec3::z()).norm() < 1e-12);
        assert!((g.theta - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn antipodal_reconstructs() {
        let axis = Vec3::new(0.3, -0.4, 0.5).normalize();
        let r0 = Rotation::exp(&Vec3::x(), 0.7).unwrap();
        let rf = Rotation::exp(&axis, PI).unwrap().compose(&r0);
        let g = Geodesic::between(&r0, &rf);
        assert_eq!(g.kind, GeodesicKind::Antipodal);
        assert!(g.at(&r0, g.theta).distance(&rf) < 1e-6);
    }

    #[test]
    fn quaternion_round_trip() {
        let r = Rotation::exp(&Vec3::new(1.0, 1.0, 0.0).normalize(), 1.1).unwrap();
        let q = r.to_quaternion();
        let back = Rotation::from_quaternion(q[0], q[1], q[2], q[3]).unwrap();
        assert!(back.distance(&r) < 1e-12);
        assert!(Rotation::from_quaternion(1.0, 1.0, 0.0, 0.0).is_err());
    }
}
