//! Via-point and orientation-split optimization for a fixed set sequence.

use std::cell::RefCell;
use std::f64::consts::PI;

use log::debug;

use super::path::{ReferencePath, RotTerm};
use crate::error::{Error, Result};
use crate::geometry::{ConvexPolytope, Geodesic, Rotation, Vec3};
use crate::solver::Qp;

/// Rows are tightened by this much so solver round-off never leaves a hull
/// point outside its set.
const TIGHTEN: f64 = 1e-9;
const MAX_OUTER: usize = 20;
const DISPLACEMENT_TOL: f64 = 1e-5;
/// Interior extrema within this distance of their row are cut before they
/// are violated.
const NEAR_ACTIVE: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct PathProblem<'a> {
    pub sets: &'a [ConvexPolytope],
    pub set_ids: &'a [usize],
    /// Size cost of every set in the sequence.
    pub size_costs: &'a [f64],
    pub p0: Vec3,
    pub r0: Rotation,
    pub pf: Vec3,
    pub rf: Rotation,
    pub hull_offsets: &'a [Vec3],
    pub w_alpha: f64,
    /// Fix `α` proportional to segment lengths; positions then solve a convex
    /// program.
    pub position_only: bool,
}

/// One sampled containment constraint: hull point `l` against row `s` of
/// the set of segment `seg`, at local parameter `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Anchor {
    seg: usize,
    row: usize,
    l: usize,
    t: f64,
}

struct Context<'a> {
    prob: &'a PathProblem<'a>,
    n: usize,
    omega: Vec3,
    theta: f64,
    /// `R₀ lₗ` for every hull point.
    offsets0: Vec<Vec3>,
    /// Interior cuts found so far. Each is a necessary condition for any
    /// split, so they carry over between calls.
    cuts: RefCell<Vec<Anchor>>,
}

impl<'a> Context<'a> {
    fn var(&self, via: usize) -> Option<usize> {
        if via == 0 || via == self.n {
            None
        } else {
            Some(3 * (via - 1))
        }
    }

    fn fixed(&self, via: usize) -> Vec3 {
        if via == 0 {
            self.prob.p0
        } else {
            self.prob.pf
        }
    }

    fn point(&self, x: &[Vec3], via: usize) -> Vec3 {
        match self.var(via) {
            None => self.fixed(via),
            Some(_) => x[via - 1],
        }
    }

    fn vias(&self, x: &[Vec3]) -> Vec<Vec3> {
        (0..=self.n).map(|j| self.point(x, j)).collect()
    }

    fn objective(&self, x: &[Vec3], alpha: &[f64]) -> f64 {
        let v = self.vias(x);
        let mut f = 0.0;
        for i in 0..self.n {
            f += self.prob.size_costs[i] * (v[i + 1] - v[i]).norm_squared();
        }
        for i in 0..self.n.saturating_sub(1) {
            f += self.prob.w_alpha * self.prob.size_costs[i] * (alpha[i + 1] - alpha[i]).powi(2);
        }
        f
    }

    fn term(&self, seg: usize, row: usize, l: usize) -> RotTerm {
        let a = self.prob.sets[seg].rows()[row].normal;
        RotTerm::new(&a, &self.offsets0[l], &self.omega)
    }

    /// Adds `Σ coeff·p + rhs_shift ≤ rhs` for `a·((1−t) p_seg + t p_seg+1)`,
    /// folding fixed endpoints into the right-hand side. Returns `None` when
    /// no variable is involved, with the constant left-hand side.
    fn position_row(&self, a: &Vec3, seg: usize, t: f64) -> (Vec<(usize, f64)>, f64) {
        let mut coeffs = Vec::with_capacity(6);
        let mut constant = 0.0;
        for (via, w) in [(seg, 1.0 - t), (seg + 1, t)] {
            if w == 0.0 {
                continue;
            }
            match self.var(via) {
                Some(k) => {
                    for d in 0..3 {
                        coeffs.push((k + d, w * a[d]));
                    }
                }
                None => constant += w * a.dot(&self.fixed(via)),
            }
        }
        (coeffs, constant)
    }

    fn add_objective(&self, qp: &mut Qp) {
        for i in 0..self.n {
            let c = self.prob.size_costs[i];
            for d in 0..3 {
                let mut coeffs = Vec::new();
                let mut constant = 0.0;
                match self.var(i + 1) {
                    Some(k) => coeffs.push((k + d, 1.0)),
                    None => constant += self.fixed(i + 1)[d],
                }
                match self.var(i) {
                    Some(k) => coeffs.push((k + d, -1.0)),
                    None => constant -= self.fixed(i)[d],
                }
                if !coeffs.is_empty() {
                    qp.add_squared(&coeffs, constant, c);
                }
            }
        }
    }

    fn add_membership(&self, qp: &mut Qp) {
        for j in 1..self.n {
            let k = self.var(j).expect("interior via-point");
            for set in [&self.prob.sets[j - 1], &self.prob.sets[j]] {
                for h in set.rows() {
                    qp.leq(
                        vec![(k, h.normal.x), (k + 1, h.normal.y), (k + 2, h.normal.z)],
                        h.offset - TIGHTEN,
                    );
                }
            }
        }
    }

    fn path(&self, x: &[Vec3], alpha: &[f64]) -> ReferencePath {
        let vias = self.vias(x);
        let mut knots = vec![0.0];
        for i in 0..self.n {
            knots.push(knots[i] + (vias[i + 1] - vias[i]).norm());
        }
        let g = Geodesic::between(&self.prob.r0, &self.prob.rf);
        ReferencePath {
            via_points: vias,
            knots,
            omega: self.omega,
            theta_total: self.theta,
            geodesic: g.kind,
            alphas: alpha.to_vec(),
            r0: self.prob.r0,
            set_ids: self.prob.set_ids.to_vec(),
            sets: self.prob.sets.to_vec(),
            hull_offsets: self.prob.hull_offsets.to_vec(),
            blends: vec![],
            lead_in: 0.0,
            lead_dir: Vec3::zeros(),
            max_iter_reached: false,
        }
    }

    /// Every (segment, row, hull point) triple.
    fn triples(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for seg in 0..self.n {
            for row in 0..self.prob.sets[seg].num_rows() {
                for l in 0..self.offsets0.len() {
                    out.push((seg, row, l));
                }
            }
        }
        out
    }

    /// Minimizes path length for fixed `alpha` subject to exact hull
    /// containment, by cutting planes at the worst-case parameters.
    fn solve_positions(&self, alpha: &[f64]) -> Option<Vec<Vec3>> {
        let triples = self.triples();
        let mut anchors: Vec<Anchor> = Vec::new();
        for &(seg, row, l) in &triples {
            for t in [0.0, 1.0] {
                anchors.push(Anchor { seg, row, l, t });
            }
        }
        anchors.extend(self.cuts.borrow().iter().copied());
        let starts: Vec<f64> = (0..self.n).map(|i| alpha[..i].iter().sum()).collect();
        for _round in 0..40 {
            let mut qp = Qp::new(3 * (self.n - 1));
            self.add_objective(&mut qp);
            self.add_membership(&mut qp);
            for an in &anchors {
                let h = self.prob.sets[an.seg].rows()[an.row];
                let rot = self.term(an.seg, an.row, an.l).value(starts[an.seg] + an.t * alpha[an.seg]);
                let (coeffs, constant) = self.position_row(&h.normal, an.seg, an.t);
                let rhs = h.offset - TIGHTEN - rot - constant;
                if coeffs.is_empty() {
                    // Fixed endpoint pose: must already fit.
                    if rhs < -TIGHTEN {
                        return None;
                    }
                    continue;
                }
                qp.leq(coeffs, rhs);
            }
            let sol = if self.n == 1 {
                None
            } else {
                Some(qp.solve().ok()?)
            };
            let x: Vec<Vec3> = match &sol {
                Some(s) => (0..self.n - 1)
                    .map(|j| Vec3::new(s.x[3 * j], s.x[3 * j + 1], s.x[3 * j + 2]))
                    .collect(),
                None => vec![],
            };
            let path = self.path(&x, alpha);
            let mut violated = false;
            for &(seg, row, l) in &triples {
                let h = &self.prob.sets[seg].rows()[row];
                let w = path.phi_worst(seg, l, h);
                // Near-active interior extrema are cut early: they tend to
                // become violated as soon as the via-points move.
                if w.value <= -NEAR_ACTIVE {
                    continue;
                }
                let known = w.t <= 0.0
                    || w.t >= 1.0
                    || anchors
                        .iter()
                        .any(|a| a.seg == seg && a.row == row && a.l == l && (a.t - w.t).abs() < 1e-12);
                if known || self.n == 1 {
                    // No variable can move it, or already anchored there.
                    if w.value > 1e-7 || (self.n == 1 && w.value > 0.0) {
                        return None;
                    }
                    continue;
                }
                let an = Anchor { seg, row, l, t: w.t };
                anchors.push(an);
                self.cuts.borrow_mut().push(an);
                if w.value > 0.0 {
                    violated = true;
                }
            }
            if !violated {
                return Some(x);
            }
        }
        None
    }

    /// One linearized step in `(P, α)` with an `α` trust region of `radius`.
    fn linearized_alpha(&self, x: &[Vec3], alpha: &[f64], radius: f64) -> Option<Vec<f64>> {
        let nv = 3 * (self.n - 1);
        let na = self.n;
        let mut qp = Qp::new(nv + na);
        self.add_objective(&mut qp);
        self.add_membership(&mut qp);
        for i in 0..self.n - 1 {
            let c = self.prob.w_alpha * self.prob.size_costs[i];
            qp.add_squared(&[(nv + i + 1, 1.0), (nv + i, -1.0)], 0.0, c);
        }
        for j in 0..na {
            qp.add_squared(&[(nv + j, 1.0)], -alpha[j], 1e-9);
            qp.bound(nv + j, (alpha[j] - radius).max(-PI), (alpha[j] + radius).min(PI));
        }
        qp.eq((0..na).map(|j| (nv + j, 1.0)).collect(), self.theta);

        let path = self.path(x, alpha);
        let starts: Vec<f64> = (0..self.n).map(|i| path.angle_before(i)).collect();
        for (seg, row, l) in self.triples() {
            let h = self.prob.sets[seg].rows()[row];
            let term = self.term(seg, row, l);
            let worst = path.phi_worst(seg, l, &h).t;
            let mut ts = vec![0.0, 1.0];
            if worst > 0.0 && worst < 1.0 {
                ts.push(worst);
            }
            for t in ts {
                let th = starts[seg] + t * alpha[seg];
                let g = term.deriv(th);
                let (mut coeffs, constant) = self.position_row(&h.normal, seg, t);
                let mut shift = 0.0;
                for j in 0..=seg {
                    let w = if j < seg { g } else { g * t };
                    if w != 0.0 {
                        coeffs.push((nv + j, w));
                        shift += w * alpha[j];
                    }
                }
                let rhs = h.offset - TIGHTEN - term.value(th) - constant + shift;
                if coeffs.is_empty() {
                    continue;
                }
                qp.leq(coeffs, rhs);
            }
        }
        let sol = qp.solve().ok()?;
        let mut a: Vec<f64> = (0..na).map(|j| sol.x[nv + j]).collect();
        // Restore the sum exactly.
        let err = a.iter().sum::<f64>() - self.theta;
        let last = na - 1;
        a[last] -= err;
        Some(a)
    }
}

fn proportional_alpha(lengths: &[f64], theta: f64) -> Vec<f64> {
    let total: f64 = lengths.iter().sum();
    if total <= 1e-12 {
        let n = lengths.len() as f64;
        return vec![theta / n; lengths.len()];
    }
    lengths.iter().map(|l| theta * l / total).collect()
}

fn lengths(vias: &[Vec3]) -> Vec<f64> {
    vias.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
}

fn max_displacement(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Shortest via-points and orientation split keeping the end-effector hull in
/// its sets along the whole path.
pub fn optimize_path(prob: &PathProblem) -> Result<ReferencePath> {
    let n = prob.sets.len();
    if n == 0 || prob.size_costs.len() != n || prob.set_ids.len() != n {
        return Err(Error::InvalidInput("set sequence and size costs must be non-empty and aligned".into()));
    }
    if prob.hull_offsets.is_empty() {
        return Err(Error::InvalidInput("end-effector needs at least one hull point".into()));
    }
    if !(prob.w_alpha > 0.0) {
        return Err(Error::InvalidInput("w_alpha must be positive".into()));
    }
    let g = Geodesic::between(&prob.r0, &prob.rf);
    let ctx = Context {
        prob,
        n,
        omega: g.omega,
        theta: g.theta,
        offsets0: prob.hull_offsets.iter().map(|l| prob.r0.apply(l)).collect(),
        cuts: RefCell::new(Vec::new()),
    };
    let pair_of = |j: usize| (prob.set_ids[j.saturating_sub(1)], prob.set_ids[j.min(n - 1)]);

    // Point end-effector positions seed the length-proportional split.
    let seed_alpha = vec![g.theta / n as f64; n];
    let point_lengths = if n == 1 {
        vec![(prob.pf - prob.p0).norm()]
    } else {
        let mut qp = Qp::new(3 * (n - 1));
        ctx.add_objective(&mut qp);
        ctx.add_membership(&mut qp);
        match qp.solve() {
            Ok(s) => {
                let x: Vec<Vec3> = (0..n - 1)
                    .map(|j| Vec3::new(s.x[3 * j], s.x[3 * j + 1], s.x[3 * j + 2]))
                    .collect();
                lengths(&ctx.vias(&x))
            }
            Err(_) => return Err(Error::PathInfeasible { sets: diagnose(&ctx, &seed_alpha, &pair_of) }),
        }
    };
    let mut candidates = vec![proportional_alpha(&point_lengths, g.theta)];
    if n > 1 {
        let mut first = vec![0.0; n];
        first[0] = g.theta;
        let mut last = vec![0.0; n];
        last[n - 1] = g.theta;
        candidates.extend([first, last, seed_alpha.clone()]);
    }

    let mut start = None;
    for a in &candidates {
        if let Some(x) = ctx.solve_positions(a) {
            start = Some((x, a.clone()));
            break;
        }
    }
    let Some((mut x, mut alpha)) = start else {
        return Err(Error::PathInfeasible { sets: diagnose(&ctx, &candidates[0], &pair_of) });
    };
    let mut f = ctx.objective(&x, &alpha);
    let mut max_iter = false;

    if prob.position_only {
        for it in 0.. {
            if it == MAX_OUTER {
                max_iter = true;
                break;
            }
            let next_alpha = proportional_alpha(&lengths(&ctx.vias(&x)), g.theta);
            let Some(nx) = ctx.solve_positions(&next_alpha) else { break };
            let disp = max_displacement(&nx, &x);
            x = nx;
            alpha = next_alpha;
            f = ctx.objective(&x, &alpha);
            if disp < DISPLACEMENT_TOL {
                break;
            }
        }
    } else if n > 1 {
        let mut radius = PI / 4.0;
        let mut accepted = 0;
        loop {
            if accepted == MAX_OUTER {
                max_iter = true;
                break;
            }
            if radius < 1e-7 {
                break;
            }
            let Some(cand_alpha) = ctx.linearized_alpha(&x, &alpha, radius) else {
                radius *= 0.25;
                continue;
            };
            let Some(cand_x) = ctx.solve_positions(&cand_alpha) else {
                radius *= 0.25;
                continue;
            };
            let cand_f = ctx.objective(&cand_x, &cand_alpha);
            if cand_f < f - 1e-12 {
                let disp = max_displacement(&cand_x, &x)
                    .max(cand_alpha.iter().zip(&alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                debug!("path step {accepted}: objective {f:.6e} -> {cand_f:.6e}, displacement {disp:.2e}");
                x = cand_x;
                alpha = cand_alpha;
                f = cand_f;
                accepted += 1;
                radius = (radius * 2.0).min(PI);
                if disp < DISPLACEMENT_TOL {
                    break;
                }
            } else {
                radius *= 0.25;
            }
        }
    }
    debug!("path objective {f:.6e}");

    let mut path = ctx.path(&x, &alpha);
    path.max_iter_reached = max_iter;
    let (exact, seg) = path.exact_violation();
    let (sampled, _) = path.sampled_violation(1000);
    if exact > 1e-9 || sampled > 1e-7 {
        return Err(Error::PathInfeasible { sets: pair_of(seg.max(1)) });
    }
    Ok(path)
}

/// Names the first intersection that cannot hold the hull at the orientation
/// the split `alpha` assigns to it.
fn diagnose(ctx: &Context, alpha: &[f64], pair_of: &dyn Fn(usize) -> (usize, usize)) -> (usize, usize) {
    let mut angle = 0.0;
    for j in 1..ctx.n {
        angle += alpha[j - 1];
        let r = Rotation::exp_unchecked(&ctx.omega, angle);
        let inter = ctx.prob.sets[j - 1].intersect(&ctx.prob.sets[j]);
        let shrunk = ConvexPolytope::from_halfspaces(
            inter
                .rows()
                .iter()
                .map(|h| {
                    let reach = ctx
                        .offsets0
                        .iter()
                        .map(|l| h.normal.dot(&r.apply(l)))
                        .fold(f64::NEG_INFINITY, f64::max);
                    crate::geometry::Halfspace {
                        normal: h.normal,
                        offset: h.offset - reach,
                    }
                })
                .collect(),
        );
        if shrunk.is_empty().is_empty() {
            return pair_of(j);
        }
    }
    pair_of(ctx.n.min(1))
}
