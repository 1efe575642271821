//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use boundplan::geometry::{Aabb, ConvexBody, ConvexPolytope, Halfspace, Rotation, Vec3};
use boundplan::graph::{size_cost, SetGraph};
use boundplan::inflation::Workspace;
use rand::Rng;

/// Spacing of every grid oracle.
pub const GRID: f64 = 0.01;
/// Largest distance from a point of a box to its nearest grid point.
pub const GRID_GAP: f64 = 0.5 * GRID * 1.732_050_807_568_877_2;

/// Uniformly distributed rotation.
pub fn random_rotation(rng: &mut impl Rng) -> Rotation {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [a * (TAU * u2).sin(), a * (TAU * u2).cos(), b * (TAU * u3).sin(), b * (TAU * u3).cos()];
    Rotation::from_quaternion(q[0], q[1], q[2], q[3]).expect("unit quaternion")
}

pub fn random_in(rng: &mut impl Rng, lo: Vec3, hi: Vec3) -> Vec3 {
    Vec3::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y), rng.gen_range(lo.z..hi.z))
}

/// Oriented box.
#[derive(Clone, Debug)]
pub struct Obb {
    pub center: Vec3,
    pub rot: Rotation,
    pub half: Vec3,
}

impl Obb {
    pub fn random(rng: &mut impl Rng, region: (Vec3, Vec3), half: (f64, f64)) -> Obb {
        Obb {
            center: random_in(rng, region.0, region.1),
            rot: random_rotation(rng),
            half: random_in(rng, Vec3::repeat(half.0), Vec3::repeat(half.1)),
        }
    }

    fn local(&self, x: &Vec3) -> Vec3 {
        self.rot.transpose().apply(&(x - self.center))
    }

    pub fn vertices(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(8);
        for k in 0..8 {
            let s = Vec3::new(
                if k & 1 == 0 { -1.0 } else { 1.0 },
                if k & 2 == 0 { -1.0 } else { 1.0 },
                if k & 4 == 0 { -1.0 } else { 1.0 },
            );
            out.push(self.center + self.rot.apply(&s.component_mul(&self.half)));
        }
        out
    }

    pub fn body(&self) -> ConvexBody {
        ConvexBody::new(self.vertices()).expect("eight vertices")
    }

    pub fn polytope(&self) -> ConvexPolytope {
        let mut rows = Vec::new();
        for axis in 0..3 {
            let n = self.rot.apply(&Vec3::ith(axis, 1.0));
            for sign in [1.0, -1.0] {
                rows.push(Halfspace {
                    normal: sign * n,
                    offset: sign * n.dot(&self.center) + self.half[axis],
                });
            }
        }
        ConvexPolytope::from_halfspaces(rows)
    }

    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        let l = self.local(x);
        (0..3).all(|i| l[i].abs() <= self.half[i] + tol)
    }

    /// Exact distance from `x` to the box.
    pub fn distance_to(&self, x: &Vec3) -> f64 {
        let l = self.local(x);
        let clamped = Vec3::from_fn(|i, _| l[i].clamp(-self.half[i], self.half[i]));
        (l - clamped).norm()
    }

    /// Lattice in the box frame, faces included, with spacing at most
    /// `GRID` along every axis.
    pub fn grid(&self) -> Vec<Vec3> {
        let n: Vec<usize> = (0..3).map(|i| ((2.0 * self.half[i] / GRID).ceil() as usize).max(1)).collect();
        let mut out = Vec::with_capacity((n[0] + 1) * (n[1] + 1) * (n[2] + 1));
        for i in 0..=n[0] {
            for j in 0..=n[1] {
                for k in 0..=n[2] {
                    let l = Vec3::new(
                        -self.half.x + 2.0 * self.half.x * i as f64 / n[0] as f64,
                        -self.half.y + 2.0 * self.half.y * j as f64 / n[1] as f64,
                        -self.half.z + 2.0 * self.half.z * k as f64 / n[2] as f64,
                    );
                    out.push(self.center + self.rot.apply(&l));
                }
            }
        }
        out
    }
}

pub fn unit_domain() -> Aabb {
    Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)).expect("valid box")
}

/// Up to `max_boxes` axis-aligned obstacles in the unit cube, as boxes.
pub fn random_boxes(rng: &mut impl Rng, max_boxes: usize, half: (f64, f64)) -> Vec<Aabb> {
    let n = rng.gen_range(1..=max_boxes);
    (0..n)
        .map(|_| {
            let c = random_in(rng, Vec3::repeat(0.05), Vec3::repeat(0.95));
            let h = random_in(rng, Vec3::repeat(half.0), Vec3::repeat(half.1));
            let lo = (c - h).sup(&Vec3::zeros());
            let hi = (c + h).inf(&Vec3::repeat(1.0));
            Aabb::new(lo, hi).expect("non-degenerate box")
        })
        .collect()
}

pub fn workspace_of(boxes: &[Aabb]) -> Workspace {
    let obstacles = boxes.iter().map(|b| ConvexBody::new(b.corners()).expect("corners")).collect();
    Workspace::new(unit_domain(), obstacles)
}

/// Uniform point at least `clearance` from every box and the domain faces.
pub fn free_point(rng: &mut impl Rng, boxes: &[Aabb], clearance: f64) -> Option<Vec3> {
    for _ in 0..10_000 {
        let p = random_in(rng, Vec3::repeat(clearance), Vec3::repeat(1.0 - clearance));
        if boxes.iter().all(|b| box_distance(b, &p) > clearance) {
            return Some(p);
        }
    }
    None
}

pub fn box_distance(b: &Aabb, p: &Vec3) -> f64 {
    let c = Vec3::from_fn(|i, _| p[i].clamp(b.min[i], b.max[i]));
    (p - c).norm()
}

/// Cheapest start-to-final chain by enumeration of simple vertex paths, with
/// costs recomputed from the sets. Sums run left to right. Branches whose
/// partial cost already reaches the best total are cut; every leg costs at
/// least `c_bias > 0`, so no cut branch could win.
pub fn brute_force_cost(g: &SetGraph) -> Option<f64> {
    let (s, f) = (g.start?, g.final_set?);
    let n = g.vertices.len();
    let shared = |u: usize, v: usize| {
        let (a, b) = (&g.vertices[u], &g.vertices[v]);
        [a.sets.0, a.sets.1].into_iter().find(|x| b.other(*x).is_some())
    };
    let leg = |set: usize, x: &Vec3, y: &Vec3| size_cost(&g.sets[set].ellipsoid, &g.params) * (x - y).norm() + g.params.c_bias;
    let mut best: Option<f64> = None;
    fn walk(
        v: usize,
        cost: f64,
        seen: &mut Vec<bool>,
        n: usize,
        f: usize,
        best: &mut Option<f64>,
        next: &dyn Fn(usize, usize) -> Option<f64>,
        exit: &dyn Fn(usize) -> Option<f64>,
    ) {
        if best.is_some_and(|b| cost >= b) {
            return;
        }
        if let Some(c) = exit(v) {
            let total = cost + c;
            if best.map_or(true, |b| total < b) {
                *best = Some(total);
            }
        }
        for w in 0..n {
            if seen[w] {
                continue;
            }
            if let Some(c) = next(v, w) {
                seen[w] = true;
                walk(w, cost + c, seen, n, f, best, next, exit);
                seen[w] = false;
            }
        }
    }
    let next = |u: usize, v: usize| shared(u, v).map(|k| leg(k, &g.vertices[u].point, &g.vertices[v].point));
    let exit = |v: usize| {
        g.vertices[v]
            .other(f)
            .map(|_| leg(f, &g.vertices[v].point, &g.sets[f].anchor.expect("goal anchor")))
    };
    for v in 0..n {
        if g.vertices[v].other(s).is_none() {
            continue;
        }
        let entry = leg(s, &g.sets[s].anchor.expect("start anchor"), &g.vertices[v].point);
        let mut seen = vec![false; n];
        seen[v] = true;
        walk(v, entry, &mut seen, n, f, &mut best, &next, &exit);
    }
    best
}
