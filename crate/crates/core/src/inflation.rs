//! Collision-free convex sets grown from seed points or around a given hull
//! of points.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_points, Aabb, ConvexBody, ConvexPolytope, Ellipsoid, Halfspace, Vec3};

/// Free-space description: a box domain and convex vertex obstacles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub domain: Aabb,
    pub obstacles: Vec<ConvexBody>,
}

impl Workspace {
    pub fn new(domain: Aabb, obstacles: Vec<ConvexBody>) -> Self {
        Self { domain, obstacles }
    }

    pub fn domain_polytope(&self) -> ConvexPolytope {
        self.domain.to_polytope()
    }

    /// Smallest Euclidean distance from `x` to any obstacle hull, with the
    /// index of that obstacle.
    pub fn obstacle_clearance(&self, x: &Vec3) -> Option<(usize, f64)> {
        let p = ConvexBody::point(*x);
        self.obstacles
            .iter()
            .enumerate()
            .map(|(k, o)| (k, closest_points(&p, o).distance))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// True when `x` is inside the domain and outside every obstacle grown by
    /// `margin`.
    pub fn is_free(&self, x: &Vec3, margin: f64) -> bool {
        self.domain.contains(x, 0.0)
            && self
                .obstacle_clearance(x)
                .map_or(true, |(_, d)| d > margin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InflationConfig {
    pub max_iterations: usize,
    pub volume_rel_tol: f64,
    pub obstacle_margin: f64,
}

impl Default for InflationConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            volume_rel_tol: 1e-2,
            obstacle_margin: 0.0,
        }
    }
}

impl InflationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !(self.volume_rel_tol > 0.0) {
            return Err(Error::InvalidInput("volume_rel_tol must be positive".into()));
        }
        if !(self.obstacle_margin >= 0.0) {
            return Err(Error::InvalidInput("obstacle_margin must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InflationMode {
    /// Optimize shape and center.
    Mvie,
    /// Keep the ellipsoid centered on the seed.
    FixedMid,
}

#[derive(Clone, Debug)]
pub struct Inflation {
    pub polytope: ConvexPolytope,
    pub ellipsoid: Ellipsoid,
    pub iterations: usize,
    /// `log det C` after every accepted iteration, starting with the seed ball.
    pub log_det_history: Vec<f64>,
}

/// Maximum-volume ellipsoid inscribed in a bounded, non-empty polytope.
pub fn mvie(poly: &ConvexPolytope) -> Result<Ellipsoid> {
    let em = poly.is_empty();
    let Some(center) = em.witness() else {
        return Err(Error::EmptySet);
    };
    if !poly.is_bounded() {
        return Err(Error::Unbounded);
    }
    if em.radius() <= 1e-12 {
        return Err(Error::EmptySet);
    }
    Ok(MvieSolver::new(poly, None).solve(Matrix3::identity() * 0.5 * em.radius(), center))
}

/// Like [`mvie`] but with the center pinned to `mid`, which must lie strictly
/// inside the polytope.
pub fn mvie_fixed_mid(poly: &ConvexPolytope, mid: &Vec3) -> Result<Ellipsoid> {
    let slack = -poly.max_violation(mid);
    if !(slack > 1e-9) {
        return Err(Error::SeedNotInterior);
    }
    if !poly.is_bounded() {
        return Err(Error::Unbounded);
    }
    Ok(MvieSolver::new(poly, Some(*mid)).solve(Matrix3::identity() * 0.5 * slack, *mid))
}

/// Log-det barrier Newton method over `‖C aₛ‖ + aₛᵀp ≤ bₛ`.
struct MvieSolver<'a> {
    rows: &'a [Halfspace],
    fixed_mid: Option<Vec3>,
}

fn sym_from(c: &[f64]) -> Matrix3<f64> {
    Matrix3::new(c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2])
}

fn basis(k: usize) -> Matrix3<f64> {
    let mut c = [0.0; 6];
    c[k] = 1.0;
    sym_from(&c)
}

/// Linear map `c ↦ C a` for the six free entries of a symmetric `C`.
fn shape_map(a: &Vec3) -> nalgebra::SMatrix<f64, 3, 6> {
    nalgebra::SMatrix::<f64, 3, 6>::from_row_slice(&[
        a.x, 0.0, 0.0, a.y, a.z, 0.0, //
        0.0, a.y, 0.0, a.x, 0.0, a.z, //
        0.0, 0.0, a.z, 0.0, a.y, a.x,
    ])
}

impl<'a> MvieSolver<'a> {
    fn new(poly: &'a ConvexPolytope, fixed_mid: Option<Vec3>) -> Self {
        Self {
            rows: poly.rows(),
            fixed_mid,
        }
    }

    fn nvars(&self) -> usize {
        if self.fixed_mid.is_some() {
            6
        } else {
            9
        }
    }

    fn unpack(&self, z: &DVector<f64>) -> (Matrix3<f64>, Vec3) {
        let c = sym_from(&z.as_slice()[..6]);
        let p = self
            .fixed_mid
            .unwrap_or_else(|| Vec3::new(z[6], z[7], z[8]));
        (c, p)
    }

    /// Barrier value, or `None` outside the domain of the barrier.
    fn value(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let (c, p) = self.unpack(z);
        let chol = c.cholesky()?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let mut f = -t * log_det;
        for h in self.rows {
            let slack = h.offset - h.normal.dot(&p) - (c * h.normal).norm();
            if !(slack > 0.0) {
                return None;
            }
            f -= slack.ln();
        }
        Some(f)
    }

    fn grad_hess(&self, z: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.nvars();
        let (c, p) = self.unpack(z);
        let w = c.try_inverse().expect("iterate stays positive definite");
        let mut g = DVector::zeros(n);
        let mut hm = DMatrix::zeros(n, n);
        let bases: Vec<Matrix3<f64>> = (0..6).map(basis).collect();
        let wb: Vec<Matrix3<f64>> = bases.iter().map(|e| w * e).collect();
        for k in 0..6 {
            g[k] -= t * wb[k].trace();
            for l in 0..6 {
                hm[(k, l)] += t * (wb[k] * wb[l]).trace();
            }
        }
        for h in self.rows {
            let a = h.normal;
            let m = shape_map(&a);
            let u = c * a;
            let un = u.norm();
            let uh = u / un;
            let slack = h.offset - a.dot(&p) - un;
            let mut gs = DVector::zeros(n);
            let gc = m.transpose() * uh;
            for k in 0..6 {
                gs[k] = gc[k];
            }
            if n == 9 {
                for k in 0..3 {
                    gs[6 + k] = a[k];
                }
            }
            g += &gs / slack;
            let proj = Matrix3::identity() - uh * uh.transpose();
            let hc = m.transpose() * proj * m / (un * slack);
            for k in 0..6 {
                for l in 0..6 {
                    hm[(k, l)] += hc[(k, l)];
                }
            }
            hm += &gs * gs.transpose() / (slack * slack);
        }
        (g, hm)
    }

    fn solve(&self, c0: Matrix3<f64>, p0: Vec3) -> Ellipsoid {
        let n = self.nvars();
        let mut z = DVector::zeros(n);
        for (k, v) in [c0[(0, 0)], c0[(1, 1)], c0[(2, 2)], c0[(0, 1)], c0[(0, 2)], c0[(1, 2)]]
            .into_iter()
            .enumerate()
        {
            z[k] = v;
        }
        if n == 9 {
            for k in 0..3 {
                z[6 + k] = p0[k];
            }
        }
        let s = self.rows.len() as f64;
        let mut t = 1.0;
        loop {
            self.center_step(&mut z, t);
            if s / t < 1e-11 {
                break;
            }
            t *= 8.0;
        }
        let (c, p) = self.unpack(&z);
        Ellipsoid::new(c, p).expect("barrier iterate is positive definite")
    }

    fn center_step(&self, z: &mut DVector<f64>, t: f64) {
        for _ in 0..60 {
            let (g, h) = self.grad_hess(z, t);
            let Some(step) = h.clone().cholesky().map(|ch| ch.solve(&(-&g))).or_else(|| h.lu().solve(&(-&g)))
            else {
                return;
            };
            let decrement = -g.dot(&step);
            if !(decrement > 2e-13) {
                return;
            }
            let f0 = self.value(z, t).expect("current iterate is feasible");
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &*z + alpha * &step;
                if let Some(f) = self.value(&cand, t) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        *z = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                return;
            }
        }
    }
}

/// Overlap in the ellipsoid metric below which a touch is not a collision.
const TOUCH_TOL: f64 = 1e-9;

/// Half-spaces separating every obstacle from the ellipsoid, closest first in
/// the ellipsoid metric, followed by the domain rows.
pub fn separating_polytope(e: &Ellipsoid, ws: &Workspace, margin: f64) -> Result<ConvexPolytope> {
    let cinv = e.shape().try_inverse().expect("shape is positive definite");
    let center = e.center();
    let origin = ConvexBody::point(Vec3::zeros());
    let mut order: Vec<(usize, f64, Vec3)> = Vec::with_capacity(ws.obstacles.len());
    for (k, o) in ws.obstacles.iter().enumerate() {
        let mapped = o.map(|v| cinv * (v - center));
        let cp = closest_points(&mapped, &origin);
        // An inscribed ellipsoid may touch a row that touches an obstacle;
        // round-off then puts it a hair inside.
        if cp.distance <= 1.0 - TOUCH_TOL {
            return Err(Error::SeedInCollision { obstacle: k });
        }
        order.push((k, cp.distance, cp.on_a));
    }
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut poly = ConvexPolytope::default();
    for (k, _, y) in order {
        let o = &ws.obstacles[k];
        if separated(&poly, o, margin) {
            continue;
        }
        let Some(mut h) = Halfspace::new(cinv * y, 0.0) else {
            continue;
        };
        h.offset = o.min_along(&h.normal) - margin;
        poly.push(h);
    }
    Ok(poly.intersect(&ws.domain_polytope()))
}

fn separated(poly: &ConvexPolytope, o: &ConvexBody, margin: f64) -> bool {
    poly.rows()
        .iter()
        .any(|h| o.min_along(&h.normal) - margin >= h.offset - 1e-12)
}

/// Grows a collision-free polytope around `seed` by alternating separation
/// and ellipsoid maximization.
pub fn inflate(seed: &Vec3, ws: &Workspace, mode: InflationMode, cfg: &InflationConfig) -> Result<Inflation> {
    cfg.validate()?;
    let margin = cfg.obstacle_margin;
    let domain_slack = -ws.domain_polytope().max_violation(seed);
    if !(domain_slack > 0.0) {
        return Err(Error::SeedOutsideDomain);
    }
    let mut clearance = domain_slack;
    if let Some((k, d)) = ws.obstacle_clearance(seed) {
        if d <= margin {
            return Err(Error::SeedInCollision { obstacle: k });
        }
        clearance = clearance.min(d - margin);
    }
    let mut ellipsoid = Ellipsoid::ball(*seed, (0.5 * clearance).min(0.05));
    let mut history = vec![ellipsoid.log_det()];
    let mut best: Option<(ConvexPolytope, Ellipsoid)> = None;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let poly = separating_polytope(&ellipsoid, ws, margin)?;
        let next = match mode {
            InflationMode::Mvie => mvie(&poly)?,
            InflationMode::FixedMid => mvie_fixed_mid(&poly, seed)?,
        };
        let gain = next.log_det() - ellipsoid.log_det();
        if gain < 0.0 && best.is_some() {
            // Keep the sequence monotone: the previous set is already valid.
            break;
        }
        history.push(next.log_det());
        ellipsoid = next;
        best = Some((poly, next));
        if gain.exp_m1() < cfg.volume_rel_tol {
            break;
        }
    }
    let (polytope, ellipsoid) = best.expect("at least one iteration runs");
    Ok(Inflation {
        polytope,
        ellipsoid,
        iterations,
        log_det_history: history,
    })
}

/// Polytope around the hull of `points` separating it from every obstacle
/// grown by `margin`.
pub fn set_convex_hull(points: &ConvexBody, ws: &Workspace, margin: f64) -> Result<ConvexPolytope> {
    if points.vertices().iter().any(|v| !ws.domain.contains(v, 0.0)) {
        return Err(Error::HullOutsideDomain);
    }
    let mut order = Vec::with_capacity(ws.obstacles.len());
    for (k, o) in ws.obstacles.iter().enumerate() {
        let cp = closest_points(points, o);
        if cp.distance <= margin + 1e-12 {
            return Err(Error::HullInCollision { obstacle: k });
        }
        order.push((k, cp));
    }
    order.sort_by(|a, b| a.1.distance.total_cmp(&b.1.distance).then(a.0.cmp(&b.0)));

    let mut poly = ConvexPolytope::default();
    for (k, cp) in order {
        let o = &ws.obstacles[k];
        if separated(&poly, o, margin) {
            continue;
        }
        let mut h = Halfspace::new(cp.on_b - cp.on_a, 0.0).expect("positive distance");
        // The obstacle support along `a` equals aᵀp_O for an exact pair;
        // using the vertex minimum absorbs witness round-off.
        h.offset = o.min_along(&h.normal).min(h.normal.dot(&cp.on_b)) - margin;
        poly.push(h);
    }
    Ok(poly.intersect(&ws.domain_polytope()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn box_poly(min: Vec3, max: Vec3) -> ConvexPolytope {
        Aabb::new(min, max).unwrap().to_polytope()
    }

    fn big_ws(obstacles: Vec<ConvexBody>) -> Workspace {
        Workspace::new(Aabb::new(Vec3::repeat(-10.0), Vec3::repeat(10.0)).unwrap(), obstacles)
    }

    #[test]
    fn mvie_of_cube_is_unit_ball() {
        let e = mvie(&box_poly(Vec3::repeat(-1.0), Vec3::repeat(1.0))).unwrap();
        assert!((e.shape() - Matrix3::identity()).amax() < 1e-4);
        assert!(e.center().amax() < 1e-4);
    }

    #[test]
    fn mvie_of_long_box_is_axis_aligned() {
        let e = mvie(&box_poly(v(-2.0, -1.0, -1.0), v(2.0, 1.0, 1.0))).unwrap();
        let expect = Matrix3::from_diagonal(&v(2.0, 1.0, 1.0));
        assert!((e.shape() - expect).amax() < 1e-4);
    }

    #[test]
    fn mvie_rejects_empty_and_unbounded() {
        let empty = ConvexPolytope::from_rows([(v(1.0, 0.0, 0.0), 0.0), (v(-1.0, 0.0, 0.0), -1.0)]).unwrap();
        assert!(matches!(mvie(&empty), Err(Error::EmptySet)));
        let slab = ConvexPolytope::from_rows([(v(1.0, 0.0, 0.0), 1.0), (v(-1.0, 0.0, 0.0), 1.0)]).unwrap();
        assert!(matches!(mvie(&slab), Err(Error::Unbounded)));
    }

    #[test]
    fn fixed_mid_respects_center() {
        let cube = box_poly(Vec3::repeat(-1.0), Vec3::repeat(1.0));
        let e = mvie_fixed_mid(&cube, &Vec3::zeros()).unwrap();
        assert!((e.shape() - Matrix3::identity()).amax() < 1e-4);

        let mid = v(0.5, 0.0, 0.0);
        let e = mvie_fixed_mid(&cube, &mid).unwrap();
        assert_eq!(e.center(), mid);
        assert!((e.shape() * Vec3::x()).norm() <= 0.5 + 1e-7);
        assert!(e.containment_residual(&cube) <= 1e-7);

        assert!(matches!(mvie_fixed_mid(&cube, &v(1.0, 0.0, 0.0)), Err(Error::SeedNotInterior)));
    }

    #[test]
    fn tangent_plane_at_point_obstacle() {
        let ws = big_ws(vec![ConvexBody::point(v(2.0, 0.0, 0.0))]);
        let p = separating_polytope(&Ellipsoid::ball(Vec3::zeros(), 1.0), &ws, 0.0).unwrap();
        assert_eq!(p.num_rows(), 7);
        let h = p.rows()[0];
        assert!((h.normal - Vec3::x()).norm() < 1e-12);
        assert!((h.offset - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_obstacles_gives_domain() {
        let ws = big_ws(vec![]);
        let p = separating_polytope(&Ellipsoid::ball(Vec3::zeros(), 1.0), &ws, 0.0).unwrap();
        assert_eq!(p, ws.domain_polytope());
    }

    #[test]
    fn ellipsoid_overlap_is_reported() {
        let ws = big_ws(vec![ConvexBody::point(v(0.5, 0.0, 0.0))]);
        let r = separating_polytope(&Ellipsoid::ball(Vec3::zeros(), 1.0), &ws, 0.0);
        assert!(matches!(r, Err(Error::SeedInCollision { obstacle: 0 })));
    }

    #[test]
    fn hull_of_point_skips_shadowed_obstacle() {
        let ws = big_ws(vec![ConvexBody::point(v(4.0, 0.0, 0.0)), ConvexBody::point(v(2.0, 0.0, 0.0))]);
        let p = set_convex_hull(&ConvexBody::point(Vec3::zeros()), &ws, 0.0).unwrap();
        assert_eq!(p.num_rows(), 7);
        assert!((p.rows()[0].normal - Vec3::x()).norm() < 1e-12);
        assert!((p.rows()[0].offset - 2.0).abs() < 1e-12);
    }

    #[test]
    fn segment_hull_against_wall() {
        let wall = ConvexBody::cuboid(v(-5.0, 1.0, -5.0), v(5.0, 2.0, 5.0));
        let seg = ConvexBody::new(vec![Vec3::zeros(), v(1.0, 0.0, 0.0)]).unwrap();
        let p = set_convex_hull(&seg, &big_ws(vec![wall]), 0.0).unwrap();
        assert!((p.rows()[0].normal - Vec3::y()).norm() < 1e-12);
        assert!((p.rows()[0].offset - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_collision_and_domain_errors() {
        let ws = big_ws(vec![ConvexBody::cuboid(Vec3::repeat(-1.0), Vec3::repeat(1.0))]);
        assert!(matches!(
            set_convex_hull(&ConvexBody::point(Vec3::zeros()), &ws, 0.0),
            Err(Error::HullInCollision { obstacle: 0 })
        ));
        assert!(matches!(
            set_convex_hull(&ConvexBody::point(Vec3::repeat(20.0)), &ws, 0.0),
            Err(Error::HullOutsideDomain)
        ));
    }

    #[test]
    fn inflate_in_empty_workspace_fills_domain() {
        let ws = Workspace::new(Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)).unwrap(), vec![]);
        let r = inflate(&v(0.3, 0.6, 0.4), &ws, InflationMode::Mvie, &InflationConfig::default()).unwrap();
        assert_eq!(r.polytope, ws.domain_polytope());
        assert!((r.ellipsoid.shape() - Matrix3::identity() * 0.5).amax() < 1e-4);
        assert!(r.log_det_history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn inflate_between_walls_is_bounded_by_gap() {
        let ws = Workspace::new(
            Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)).unwrap(),
            vec![
                ConvexBody::cuboid(v(0.0, 0.0, 0.0), v(1.0, 0.3, 1.0)),
                ConvexBody::cuboid(v(0.0, 0.7, 0.0), v(1.0, 1.0, 1.0)),
            ],
        );
        for mode in [InflationMode::Mvie, InflationMode::FixedMid] {
            let seed = v(0.4, 0.5, 0.5);
            let r = inflate(&seed, &ws, mode, &InflationConfig::default()).unwrap();
            assert!(r.ellipsoid.semi_axes()[0] <= 0.2 + 1e-6);
            assert!(r.polytope.contains(&seed, 1e-9));
            if mode == InflationMode::FixedMid {
                assert_eq!(r.ellipsoid.center(), seed);
            }
        }
    }

    #[test]
    fn inflate_rejects_bad_seeds() {
        let ws = Workspace::new(
            Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)).unwrap(),
            vec![ConvexBody::cuboid(Vec3::repeat(0.4), Vec3::repeat(0.6))],
        );
        let cfg = InflationConfig::default();
        assert!(matches!(
            inflate(&Vec3::repeat(0.5), &ws, InflationMode::Mvie, &cfg),
            Err(Error::SeedInCollision { obstacle: 0 })
        ));
        assert!(matches!(
            inflate(&Vec3::repeat(2.0), &ws, InflationMode::Mvie, &cfg),
            Err(Error::SeedOutsideDomain)
        ));
    }
}
