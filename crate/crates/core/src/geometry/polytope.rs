use serde::{Deserialize, Serialize};

use super::{Vec3, EMPTY_TOL};
use crate::error::{Error, Result};
use crate::solver::Qp;

/// One row `aᵀx ≤ b` with `‖a‖ = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec3,
    pub offset: f64,
}

impl Halfspace {
    /// Normalizes `(a, b)`; returns `None` for a vanishing normal.
    pub fn new(normal: Vec3, offset: f64) -> Option<Self> {
        let n = normal.norm();
        if !(n > 1e-12) || !offset.is_finite() {
            return None;
        }
        Some(Self {
            normal: normal / n,
            offset: offset / n,
        })
    }

    #[inline]
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// Axis-aligned box, used for the planning domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(max[i] > min[i])) {
            return Err(Error::InvalidInput(format!(
                "box max {:?} must exceed min {:?} on every axis",
                max.as_slice(),
                min.as_slice()
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| x[i] >= self.min[i] - tol && x[i] <= self.max[i] + tol)
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.min + self.max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn corners(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(8);
        for &x in &[self.min.x, self.max.x] {
            for &y in &[self.min.y, self.max.y] {
                for &z in &[self.min.z, self.max.z] {
                    out.push(Vec3::new(x, y, z));
                }
            }
        }
        out
    }

    pub fn to_polytope(&self) -> ConvexPolytope {
        let mut rows = Vec::with_capacity(6);
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = 1.0;
            rows.push(Halfspace {
                normal: e,
                offset: self.max[i],
            });
            rows.push(Halfspace {
                normal: -e,
                offset: -self.min[i],
            });
        }
        ConvexPolytope { rows }
    }
}

/// Result of the Chebyshev-center emptiness query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Emptiness {
    Empty { radius: f64 },
    NonEmpty { witness: Vec3, radius: f64 },
}

impl Emptiness {
    pub fn is_empty(&self) -> bool {
        matches!(self, Emptiness::Empty { .. })
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Emptiness::Empty { radius } | Emptiness::NonEmpty { radius, .. } => radius,
        }
    }

    pub fn witness(&self) -> Option<Vec3> {
        match *self {
            Emptiness::NonEmpty { witness, .. } => Some(witness),
            Emptiness::Empty { .. } => None,
        }
    }
}

/// Intersection of half-spaces `{x : A x ≤ b}` with unit-norm rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolytope {
    rows: Vec<Halfspace>,
}

/// Coordinates are clamped to this magnitude inside LPs so that unbounded
/// programs still have a finite optimum.
const LP_BOX: f64 = 1e4;

impl ConvexPolytope {
    /// Builds a polytope from raw `(a, b)` pairs, normalizing each row.
    /// Zero rows are rejected.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec3, f64)>,
    {
        let mut out = Vec::new();
        for (k, (a, b)) in rows.into_iter().enumerate() {
            let h = Halfspace::new(a, b).ok_or_else(|| {
                Error::InvalidInput(format!("half-space row {k} has a zero or non-finite normal"))
            })?;
            out.push(h);
        }
        Ok(Self { rows: out })
    }

    pub fn from_halfspaces(rows: Vec<Halfspace>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Halfspace] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn push(&mut self, h: Halfspace) {
        self.rows.push(h);
    }

    /// `A x − b`, elementwise.
    pub fn halfspace_distances(&self, x: &Vec3) -> Vec<f64> {
        self.rows.iter().map(|h| h.signed_distance(x)).collect()
    }

    /// Largest entry of `A x − b` (`-inf` for a polytope without rows).
    pub fn max_violation(&self, x: &Vec3) -> f64 {
        self.rows
            .iter()
            .map(|h| h.signed_distance(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        self.rows.iter().all(|h| h.signed_distance(x) <= tol)
    }

    /// Row concatenation; redundant rows are kept.
    pub fn intersect(&self, other: &ConvexPolytope) -> ConvexPolytope {
        let mut rows = self.rows.clone();
        rows.extend_from_slice(&other.rows);
        ConvexPolytope { rows }
    }

    /// Same polytope with every offset shifted by `delta` (positive grows).
    pub fn offset_by(&self, delta: f64) -> ConvexPolytope {
        ConvexPolytope {
            rows: self
                .rows
                .iter()
                .map(|h| Halfspace {
                    normal: h.normal,
                    offset: h.offset + delta,
                })
                .collect(),
        }
    }

    /// Chebyshev-center LP: maximize `r` subject to `aᵀx + r ≤ b`.
    ///
    /// Empty iff the optimal radius is below `−1e-9`. Unbounded programs are
    /// clamped to a large box and reported as non-empty.
    pub fn is_empty(&self) -> Emptiness {
        let (x, r) = self.chebyshev_center();
        if r < -EMPTY_TOL {
            Emptiness::Empty { radius: r }
        } else {
            Emptiness::NonEmpty { witness: x, radius: r }
        }
    }

    fn chebyshev_center(&self) -> (Vec3, f64) {
        if self.rows.is_empty() {
            return (Vec3::zeros(), LP_BOX);
        }
        let mut qp = Qp::new(4);
        qp.add_linear(3, -1.0);
        // A tiny proximal term keeps the optimum unique when the radius is
        // attained along a segment (e.g. elongated boxes).
        for i in 0..3 {
            qp.add_hessian(i, i, 1e-9);
        }
        for h in &self.rows {
            qp.leq(
                vec![(0, h.normal.x), (1, h.normal.y), (2, h.normal.z), (3, 1.0)],
                h.offset,
            );
        }
        for i in 0..3 {
            qp.bound(i, -LP_BOX, LP_BOX);
        }
        qp.leq(vec![(3, 1.0)], LP_BOX);
        match qp.solve() {
            Ok(sol) => (Vec3::new(sol.x[0], sol.x[1], sol.x[2]), sol.x[3]),
            // The program is always feasible (r may go to −∞ only if the box
            // clamp is hit); fall back to the worst-row bound at the origin.
            Err(_) => {
                let x = Vec3::zeros();
                (x, -self.max_violation(&x))
            }
        }
    }

    /// Checks boundedness with one LP per signed coordinate axis.
    pub fn is_bounded(&self) -> bool {
        if self.rows.len() < 4 {
            return false;
        }
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut qp = Qp::new(3);
                qp.add_linear(axis, -sign);
                for h in &self.rows {
                    qp.leq(vec![(0, h.normal.x), (1, h.normal.y), (2, h.normal.z)], h.offset);
                }
                for i in 0..3 {
                    qp.bound(i, -LP_BOX, LP_BOX);
                }
                match qp.solve() {
                    Ok(sol) => {
                        if (sol.x[axis] * sign) > 0.5 * LP_BOX {
                            return false;
                        }
                    }
                    Err(_) => return true,
                }
            }
        }
        true
    }

    /// Euclidean projection of `target` onto the polytope.
    pub fn project(&self, target: &Vec3) -> Result<Vec3> {
        if self.contains(target, 0.0) {
            return Ok(*target);
        }
        let witness = match self.is_empty() {
            Emptiness::Empty { .. } => return Err(Error::EmptySet),
            Emptiness::NonEmpty { witness, .. } => witness,
        };
        let mut qp = Qp::new(3);
        for i in 0..3 {
            qp.add_squared(&[(i, 1.0)], -target[i], 1.0);
        }
        for h in &self.rows {
            qp.leq(vec![(0, h.normal.x), (1, h.normal.y), (2, h.normal.z)], h.offset);
        }
        let x = match qp.solve() {
            Ok(sol) => Vec3::new(sol.x[0], sol.x[1], sol.x[2]),
            Err(_) => witness,
        };
        Ok(self.pull_inside(x, &witness))
    }

    /// Moves `x` toward an interior `witness` just enough to satisfy every row
    /// exactly (up to rounding). Used to clean solver round-off.
    pub fn pull_inside(&self, x: Vec3, witness: &Vec3) -> Vec3 {
        let mut lambda: f64 = 0.0;
        for h in &self.rows {
            let v = h.signed_distance(&x);
            if v > 0.0 {
                let slack = -h.signed_distance(witness);
                if slack > 0.0 {
                    lambda = lambda.max(v / (v + slack));
                }
            }
        }
        if lambda == 0.0 {
            x
        } else {
            x + lambda.min(1.0) * (witness - x)
        }
    }

    /// Closest pair `(x, y)` with `x ∈ self`, `y ∈ other`.
    pub fn closest_pair(&self, other: &ConvexPolytope) -> Result<(Vec3, Vec3)> {
        let wa = self.is_empty().witness().ok_or(Error::EmptySet)?;
        let wb = other.is_empty().witness().ok_or(Error::EmptySet)?;
        let mut qp = Qp::new(6);
        for i in 0..3 {
            qp.add_squared(&[(i, 1.0), (i + 3, -1.0)], 0.0, 1.0);
            // Regularize toward the witnesses so the pair is unique.
            qp.add_squared(&[(i, 1.0)], -wa[i], 1e-9);
            qp.add_squared(&[(i + 3, 1.0)], -wb[i], 1e-9);
        }
        for h in &self.rows {
            qp.leq(vec![(0, h.normal.x), (1, h.normal.y), (2, h.normal.z)], h.offset);
        }
        for h in &other.rows {
            qp.leq(vec![(3, h.normal.x), (4, h.normal.y), (5, h.normal.z)], h.offset);
        }
        let sol = qp.solve().map_err(|_| Error::EmptySet)?;
        let x = Vec3::new(sol.x[0], sol.x[1], sol.x[2]);
        let y = Vec3::new(sol.x[3], sol.x[4], sol.x[5]);
        Ok((self.pull_inside(x, &wa), other.pull_inside(y, &wb)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(lo: f64, hi: f64) -> ConvexPolytope {
        Aabb::new(Vec3::repeat(lo), Vec3::repeat(hi)).unwrap().to_polytope()
    }

    #[test]
    fn rows_are_normalized() {
        let p = ConvexPolytope::from_rows([(Vec3::new(3.0, 4.0, 0.0), 10.0)]).unwrap();
        let h = p.rows()[0];
        assert!((h.normal.norm() - 1.0).abs() < 1e-12);
        assert!((h.offset - 2.0).abs() < 1e-12);
        assert!(ConvexPolytope::from_rows([(Vec3::zeros(), 1.0)]).is_err());
    }

    #[test]
    fn halfspace_distances_of_unit_box() {
        let b = cube(-1.0, 1.0);
        assert!(b.halfspace_distances(&Vec3::zeros()).iter().all(|&d| (d + 1.0).abs() < 1e-15));
        let d = b.halfspace_distances(&Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(d[0], 0.0);
        let d = b.halfspace_distances(&Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(d[0], 1.0);
    }

    #[test]
    fn intersect_boxes() {
        let a = cube(0.0, 2.0);
        let b = cube(1.0, 3.0);
        let ab = a.intersect(&b);
        assert!(ab.contains(&Vec3::repeat(1.5), 0.0));
        assert!(!ab.contains(&Vec3::repeat(0.5), 0.0));
        let aa = a.intersect(&a);
        for x in [Vec3::repeat(0.5), Vec3::repeat(2.5), Vec3::new(1.0, -0.1, 1.0)] {
            assert_eq!(aa.contains(&x, 0.0), a.contains(&x, 0.0));
        }
        assert!(cube(0.0, 1.0).intersect(&cube(2.0, 3.0)).is_empty().is_empty());
    }

    #[test]
    fn chebyshev_center_of_cube() {
        match cube(0.0, 1.0).is_empty() {
            Emptiness::NonEmpty { witness, radius } => {
                assert!((radius - 0.5).abs() < 1e-7);
                assert!((witness - Vec3::repeat(0.5)).norm() < 1e-6);
            }
            e => panic!("expected non-empty, got {e:?}"),
        }
    }

    #[test]
    fn contradictory_rows_are_empty() {
        let p = ConvexPolytope::from_rows([
            (Vec3::new(1.0, 0.0, 0.0), 0.0),
            (Vec3::new(-1.0, 0.0, 0.0), -1.0),
        ])
        .unwrap();
        assert!(p.is_empty().is_empty());
    }

    #[test]
    fn unbounded_is_non_empty() {
        let p = ConvexPolytope::from_rows([(Vec3::new(1.0, 0.0, 0.0), 0.0)]).unwrap();
        assert!(!p.is_empty().is_empty());
        assert!(!p.is_bounded());
        assert!(cube(0.0, 1.0).is_bounded());
    }

    #[test]
    fn projection_onto_face() {
        let b = cube(0.0, 1.0);
        let x = b.project(&Vec3::new(2.0, 0.5, 0.5)).unwrap();
        assert!((x - Vec3::new(1.0, 0.5, 0.5)).norm() < 1e-8);
        let inside = Vec3::new(0.2, 0.3, 0.4);
        assert_eq!(b.project(&inside).unwrap(), inside);
        assert!(b.contains(&b.project(&Vec3::new(5.0, -3.0, 0.5)).unwrap(), 1e-12));
    }

    #[test]
    fn projection_onto_empty_errors() {
        let e = cube(0.0, 1.0).intersect(&cube(2.0, 3.0));
        assert!(matches!(e.project(&Vec3::zeros()), Err(Error::EmptySet)));
    }

    #[test]
    fn closest_pair_of_disjoint_boxes() {
        let (x, y) = cube(0.0, 1.0).closest_pair(&cube(2.0, 3.0)).unwrap();
        assert!(((x - y).norm() - 3f64.sqrt()).abs() < 1e-6);
    }
}
