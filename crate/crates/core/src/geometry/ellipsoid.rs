use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{ConvexPolytope, Vec3};
use crate::error::{Error, Result};

/// `{center + shape · u : ‖u‖ ≤ 1}` with a symmetric positive-definite shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    shape: Matrix3<f64>,
    center: Vec3,
}

impl Ellipsoid {
    pub fn new(shape: Matrix3<f64>, center: Vec3) -> Result<Self> {
        if (shape - shape.transpose()).amax() > 1e-9 {
            return Err(Error::InvalidInput("ellipsoid shape matrix is not symmetric".into()));
        }
        let sym = 0.5 * (shape + shape.transpose());
        if sym.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::InvalidInput("ellipsoid shape matrix is not positive definite".into()));
        }
        Ok(Self { shape: sym, center })
    }

    pub fn ball(center: Vec3, radius: f64) -> Self {
        Self {
            shape: Matrix3::identity() * radius,
            center,
        }
    }

    pub fn shape(&self) -> &Matrix3<f64> {
        &self.shape
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn determinant(&self) -> f64 {
        self.shape.determinant()
    }

    pub fn log_det(&self) -> f64 {
        self.determinant().ln()
    }

    /// Semi-axis lengths in ascending order.
    pub fn semi_axes(&self) -> Vec3 {
        let mut e: Vec<f64> = self.shape.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        Vec3::new(e[0], e[1], e[2])
    }

    /// `C⁻¹ (x − p)`: the point in the unit-ball frame.
    pub fn to_unit_frame(&self, x: &Vec3) -> Vec3 {
        self.shape
            .try_inverse()
            .expect("shape is positive definite")
            * (x - self.center)
    }

    pub fn contains_point(&self, x: &Vec3) -> bool {
        self.to_unit_frame(x).norm() <= 1.0
    }

    /// Largest value of `‖C aₛ‖ + aₛᵀp − bₛ` over the rows; ≤ 0 means the
    /// ellipsoid lies inside the polytope.
    pub fn containment_residual(&self, poly: &ConvexPolytope) -> f64 {
        poly.rows()
            .iter()
            .map(|h| (self.shape * h.normal).norm() + h.normal.dot(&self.center) - h.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
