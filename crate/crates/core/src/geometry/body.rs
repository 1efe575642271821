use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Convex hull of a non-empty vertex list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    vertices: Vec<Vec3>,
}

impl ConvexBody {
    /// Deduplicates vertices closer than 1e-12.
    pub fn new(vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidInput("convex body needs at least one vertex".into()));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("convex body vertex is not finite".into()));
        }
        let mut out: Vec<Vec3> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if !out.iter().any(|u| (u - v).norm() <= 1e-12) {
                out.push(v);
            }
        }
        Ok(Self { vertices: out })
    }

    pub fn point(p: Vec3) -> Self {
        Self { vertices: vec![p] }
    }

    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let mut v = Vec::with_capacity(8);
        for &x in &[min.x, max.x] {
            for &y in &[min.y, max.y] {
                for &z in &[min.z, max.z] {
                    v.push(Vec3::new(x, y, z));
                }
            }
        }
        Self::new(v).expect("cuboid has vertices")
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn support(&self, dir: &Vec3) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.dot(dir);
            if d > best_val {
                best_val = d;
                best = i;
            }
        }
        best
    }

    /// `min_v aᵀv` over the vertices.
    pub fn min_along(&self, dir: &Vec3) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.dot(dir))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(&Vec3) -> Vec3) -> ConvexBody {
        ConvexBody {
            vertices: self.vertices.iter().map(f).collect(),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }
}

/// Witness pair returned by [`closest_points`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPoints {
    pub on_a: Vec3,
    pub on_b: Vec3,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug)]
struct SimplexVertex {
    w: Vec3,
    ia: usize,
    ib: usize,
}

/// Closest points between the hulls of two vertex sets (GJK on the Minkowski
/// difference with an exhaustive sub-simplex search).
///
/// When the hulls intersect, `distance` is 0 and both witnesses are the same
/// common point.
pub fn closest_points(a: &ConvexBody, b: &ConvexBody) -> ClosestPoints {
    let va = a.vertices();
    let vb = b.vertices();
    if va.len() == 1 && vb.len() == 1 {
        return ClosestPoints {
            on_a: va[0],
            on_b: vb[0],
            distance: (va[0] - vb[0]).norm(),
        };
    }

    let scale = va
        .iter()
        .chain(vb.iter())
        .map(|v| v.amax())
        .fold(1.0, f64::max);

    let mut simplex = vec![SimplexVertex {
        w: va[0] - vb[0],
        ia: 0,
        ib: 0,
    }];
    let mut weights = vec![1.0];
    let mut v = simplex[0].w;

    for _ in 0..128 {
        let vv = v.norm_squared();
        if vv <= (1e-15 * scale).powi(2) {
            break;
        }
        let ia = a.support(&(-v));
        let ib = b.support(&v);
        let w = va[ia] - vb[ib];
        if simplex.iter().any(|s| s.ia == ia && s.ib == ib) {
            break;
        }
        if vv - v.dot(&w) <= 1e-14 * vv.max(1e-300) {
            break;
        }
        simplex.push(SimplexVertex { w, ia, ib });
        let (sub, lambdas, closest) = closest_on_simplex(&simplex);
        let new_norm = closest.norm_squared();
        simplex = sub.into_iter().map(|k| simplex[k]).collect();
        weights = lambdas;
        if new_norm >= vv {
            v = closest;
            break;
        }
        v = closest;
        if simplex.len() == 4 {
            break;
        }
    }

    let mut on_a = Vec3::zeros();
    let mut on_b = Vec3::zeros();
    for (s, &l) in simplex.iter().zip(&weights) {
        on_a += l * va[s.ia];
        on_b += l * vb[s.ib];
    }
    let distance = v.norm();
    if distance <= 1e-15 * scale {
        return ClosestPoints {
            on_a,
            on_b: on_a,
            distance: 0.0,
        };
    }
    ClosestPoints {
        on_a,
        on_b,
        distance: (on_a - on_b).norm(),
    }
}

/// Exhaustive search over the faces of a simplex with ≤ 4 vertices for the
/// point closest to the origin. Returns the indices of the supporting face,
/// barycentric weights, and the point.
fn closest_on_simplex(s: &[SimplexVertex]) -> (Vec<usize>, Vec<f64>, Vec3) {
    let n = s.len();
    let mut best: Option<(Vec<usize>, Vec<f64>, Vec3, f64)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
        let Some(lambdas) = affine_weights(&idx.iter().map(|&k| s[k].w).collect::<Vec<_>>()) else {
            continue;
        };
        if lambdas.iter().any(|&l| l < -1e-13) {
            continue;
        }
        let lambdas: Vec<f64> = {
            let clipped: Vec<f64> = lambdas.iter().map(|l| l.max(0.0)).collect();
            let sum: f64 = clipped.iter().sum();
            clipped.iter().map(|l| l / sum).collect()
        };
        let p: Vec3 = idx.iter().zip(&lambdas).map(|(&k, &l)| l * s[k].w).sum();
        let d = p.norm_squared();
        let better = match &best {
            None => true,
            Some((bi, _, _, bd)) => d < *bd - 1e-30 || (d <= *bd && idx.len() < bi.len()),
        };
        if better {
            best = Some((idx, lambdas, p, d));
        }
    }
    let (idx, l, p, _) = best.expect("single vertices are always candidates");
    (idx, l, p)
}

/// Barycentric coordinates of the origin's projection onto the affine hull of
/// `pts`; `None` when the points are affinely dependent.
fn affine_weights(pts: &[Vec3]) -> Option<Vec<f64>> {
    match pts.len() {
        1 => Some(vec![1.0]),
        2 => {
            let d = pts[1] - pts[0];
            let dd = d.norm_squared();
            if dd <= 1e-28 {
                return None;
            }
            let t = -pts[0].dot(&d) / dd;
            Some(vec![1.0 - t, t])
        }
        3 => {
            let e1 = pts[1] - pts[0];
            let e2 = pts[2] - pts[0];
            let g = nalgebra::Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2));
            let det = g.determinant();
            if det.abs() <= 1e-24 * (g[(0, 0)] * g[(1, 1)]).max(1e-300) {
                return None;
            }
            let rhs = nalgebra::Vector2::new(-pts[0].dot(&e1), -pts[0].dot(&e2));
            let x = g.try_inverse()? * rhs;
            Some(vec![1.0 - x[0] - x[1], x[0], x[1]])
        }
        4 => {
            let m = Matrix3::from_columns(&[pts[1] - pts[0], pts[2] - pts[0], pts[3] - pts[0]]);
            let det = m.determinant();
            let vol_scale = (pts[1] - pts[0]).norm() * (pts[2] - pts[0]).norm() * (pts[3] - pts[0]).norm();
            if det.abs() <= 1e-12 * vol_scale.max(1e-300) {
                return None;
            }
            let x: Vector3<f64> = m.try_inverse()? * (-pts[0]);
            Some(vec![1.0 - x.sum(), x[0], x[1], x[2]])
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(v: &[[f64; 3]]) -> ConvexBody {
        ConvexBody::new(v.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()).unwrap()
    }

    #[test]
    fn point_to_point() {
        let r = closest_points(&body(&[[0.0, 0.0, 0.0]]), &body(&[[2.0, 0.0, 0.0]]));
        assert_eq!(r.distance, 2.0);
        assert_eq!(r.on_a, Vec3::zeros());
        assert_eq!(r.on_b, Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn segment_to_segment_perpendicular_foot() {
        let a = body(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let b = body(&[[0.5, 1.0, 0.0], [0.5, 2.0, 0.0]]);
        let r = closest_points(&a, &b);
        assert!((r.distance - 1.0).abs() < 1e-12);
        assert!((r.on_a - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
        assert!((r.on_b - Vec3::new(0.5, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn overlapping_cubes_touch_at_zero() {
        let a = ConvexBody::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        let b = ConvexBody::cuboid(Vec3::repeat(0.5), Vec3::repeat(1.5));
        let r = closest_points(&a, &b);
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.on_a, r.on_b);
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = ConvexBody::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        let b = body(&[[3.0, 0.2, 0.1], [2.5, 2.0, -1.0], [4.0, 1.0, 3.0]]);
        let ab = closest_points(&a, &b);
        let ba = closest_points(&b, &a);
        assert!((ab.distance - ba.distance).abs() < 1e-12);
        assert!((ab.on_a - ba.on_b).norm() < 1e-9);
    }

    #[test]
    fn dedup_vertices() {
        let b = body(&[[0.0, 0.0, 0.0], [0.0, 0.0, 1e-13], [1.0, 0.0, 0.0]]);
        assert_eq!(b.vertices().len(), 2);
        assert!(ConvexBody::new(vec![]).is_err());
    }
}
