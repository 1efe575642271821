//! Receding-horizon tunnel follower for a point end-effector carrying a rigid
//! hull, with per-point collision sets and online replanning.
//!
//! The robot is a double integrator. Orientation follows the reference path
//! exactly at the progress value assigned to each horizon step, so the
//! horizon program is a QP in the accelerations alone.

use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_points, ConvexBody, ConvexPolytope, Rotation, Vec3};
use crate::inflation::{set_convex_hull, Workspace};
use crate::planner::{plan, plan_with_start_set, PlanRequest, ReferencePath};
use crate::solver::Qp;

/// Rows are tightened by this much so solver round-off stays inside sets.
const TIGHTEN: f64 = 1e-9;
/// Position error beyond which leaving the assigned set is fatal.
pub const TUNNEL_TOL: f64 = 1e-4;
/// Window ahead of the previous progress value searched by projection.
const PROJECTION_WINDOW: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub horizon_steps: usize,
    pub dt: f64,
    /// Per-axis velocity limit.
    pub v_max: f64,
    /// Per-axis acceleration limit.
    pub a_max: f64,
    pub eps_phi: f64,
    pub progress_weight: f64,
    pub deviation_weight: f64,
    pub accel_weight: f64,
    /// Distance to the goal counted as arrival.
    pub goal_tolerance: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 20,
            dt: 0.05,
            v_max: 0.5,
            a_max: 2.0,
            eps_phi: 0.02,
            progress_weight: 10.0,
            deviation_weight: 100.0,
            accel_weight: 1e-4,
            goal_tolerance: 1e-3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("goal_tolerance", self.goal_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("tracker {name} must be positive")));
            }
        }
        let non_negative = [
            ("eps_phi", self.eps_phi),
            ("progress_weight", self.progress_weight),
            ("deviation_weight", self.deviation_weight),
            ("accel_weight", self.accel_weight),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("tracker {name} must be non-negative")));
            }
        }
        if self.horizon_steps < 2 {
            return Err(Error::InvalidInput("horizon needs at least two steps".into()));
        }
        Ok(())
    }
}

/// Point rigidly attached to the end-effector and kept `margin` away from
/// every obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionPoint {
    pub offset: Vec3,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepStatus {
    Optimal,
    /// The horizon program failed and the robot braked instead.
    Degraded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Progress along the path by projection; never decreases.
    pub phi: f64,
    /// Path parameter whose orientation the end-effector currently holds.
    pub orientation_phi: f64,
    /// Predicted positions, the first being the current position.
    pub horizon: Vec<Vec3>,
    pub horizon_phi: Vec<f64>,
    pub active_segment: usize,
    /// Split applied at the previous step while in the same segment.
    #[serde(default)]
    pub last_split: Option<usize>,
    pub collision_points: Vec<CollisionPoint>,
    pub collision_sets: Vec<ConvexPolytope>,
    pub time: f64,
    pub steps: usize,
}

impl TrackerState {
    /// State at rest at the start of `path`.
    pub fn at_rest(path: &ReferencePath, cfg: &TrackerConfig, collision_points: Vec<CollisionPoint>) -> Self {
        let p = path.position(0.0);
        Self {
            position: p,
            velocity: Vec3::zeros(),
            phi: 0.0,
            orientation_phi: 0.0,
            horizon: vec![p; cfg.horizon_steps],
            horizon_phi: vec![0.0; cfg.horizon_steps],
            active_segment: 0,
            last_split: None,
            collision_points,
            collision_sets: Vec::new(),
            time: 0.0,
            steps: 0,
        }
    }

    pub fn orientation(&self, path: &ReferencePath) -> Rotation {
        path.orientation(self.orientation_phi)
    }

    /// World positions of the collision points at horizon step `m`.
    fn collision_point_at(&self, path: &ReferencePath, r: usize, m: usize) -> Vec3 {
        self.horizon[m] + path.orientation(self.horizon_phi[m]).apply(&self.collision_points[r].offset)
    }
}

fn hull_in(path: &ReferencePath, set: &ConvexPolytope, p: &Vec3, phi: f64, tol: f64) -> bool {
    path.hull_points_at(p, &path.orientation(phi))
        .iter()
        .all(|x| set.contains(x, tol))
}

fn hull_violation(path: &ReferencePath, set: &ConvexPolytope, p: &Vec3, phi: f64) -> f64 {
    path.hull_points_at(p, &path.orientation(phi))
        .iter()
        .map(|x| set.max_violation(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// First horizon step (zero-based) whose hull lies in both segment `i`'s set
/// and the next one while being past the knot less `eps_phi`; the horizon
/// length when no step qualifies or `i` is the last segment.
pub fn split_index(state: &TrackerState, path: &ReferencePath, i: usize, eps_phi: f64) -> usize {
    let m_total = state.horizon.len();
    if i + 1 >= path.num_segments() {
        return m_total;
    }
    let (a, b) = (&path.sets[i], &path.sets[i + 1]);
    let threshold = path.knots[i + 1] - eps_phi;
    (0..m_total)
        .find(|&m| {
            let (p, phi) = (&state.horizon[m], state.horizon_phi[m]);
            phi > threshold && hull_in(path, a, p, phi, 0.0) && hull_in(path, b, p, phi, 0.0)
        })
        .unwrap_or(m_total)
}

/// Free polytope containing the segment from `p_now` to `p_hend` and keeping
/// `margin` from every obstacle.
pub fn collision_set_for_point(p_now: &Vec3, p_hend: &Vec3, ws: &Workspace, margin: f64) -> Result<ConvexPolytope> {
    let seg = ConvexBody::new(vec![*p_now, *p_hend])?;
    set_convex_hull(&seg, ws, margin).map_err(|e| match e {
        Error::HullInCollision { .. } | Error::HullOutsideDomain => Error::PredictedCollision { point: 0 },
        e => e,
    })
}

/// Recomputes the set of every collision point from its current position and
/// its position at the end of the previous horizon.
pub fn update_collision_sets(state: &TrackerState, path: &ReferencePath, ws: &Workspace) -> Result<Vec<ConvexPolytope>> {
    let last = state.horizon.len() - 1;
    (0..state.collision_points.len())
        .map(|r| {
            let now = state.position + state.orientation(path).apply(&state.collision_points[r].offset);
            let hend = state.collision_point_at(path, r, last);
            collision_set_for_point(&now, &hend, ws, state.collision_points[r].margin).map_err(|e| match e {
                Error::PredictedCollision { .. } => Error::PredictedCollision { point: r },
                e => e,
            })
        })
        .collect()
}

/// Fallback sets seeded with every predicted position of each collision
/// point. Used when the two-point sets leave the horizon program infeasible;
/// `None` when some hull is not free.
fn horizon_collision_sets(state: &TrackerState, path: &ReferencePath, ws: &Workspace) -> Option<Vec<ConvexPolytope>> {
    (0..state.collision_points.len())
        .map(|r| {
            let pts = (0..state.horizon.len()).map(|m| state.collision_point_at(path, r, m)).collect();
            let body = ConvexBody::new(pts).ok()?;
            set_convex_hull(&body, ws, state.collision_points[r].margin).ok()
        })
        .collect()
}

/// Result of one control step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub acceleration: Vec3,
    pub status: StepStatus,
    pub split_index: usize,
    pub active_segment: usize,
}

/// Condensed double-integrator horizon: positions and velocities as affine
/// maps of the stacked accelerations.
struct Horizon {
    m: usize,
    dt: f64,
    p0: Vec3,
    v0: Vec3,
}

impl Horizon {
    fn nvars(&self) -> usize {
        3 * (self.m - 1)
    }

    /// Coefficients of `dᵀ p_m` in the accelerations, and its constant part.
    fn position_row(&self, d: &Vec3, step: usize) -> (Vec<(usize, f64)>, f64) {
        let dt = self.dt;
        let mut coeffs = Vec::with_capacity(3 * step);
        for k in 0..step {
            let c = dt * dt * (step as f64 - k as f64 - 0.5);
            for (ax, dv) in d.iter().enumerate() {
                if *dv != 0.0 {
                    coeffs.push((3 * k + ax, c * dv));
                }
            }
        }
        (coeffs, d.dot(&(self.p0 + step as f64 * dt * self.v0)))
    }

    fn velocity_row(&self, axis: usize, step: usize) -> (Vec<(usize, f64)>, f64) {
        let coeffs = (0..step).map(|k| (3 * k + axis, self.dt)).collect();
        (coeffs, self.v0[axis])
    }

    fn positions(&self, x: &[f64]) -> Vec<Vec3> {
        let mut p = self.p0;
        let mut v = self.v0;
        let mut out = vec![p];
        for k in 0..self.m - 1 {
            let a = Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
            p += self.dt * v + 0.5 * self.dt * self.dt * a;
            v += self.dt * a;
            out.push(p);
        }
        out
    }

    /// Limits on accelerations, velocities, and rest at the horizon end.
    fn add_dynamics(&self, qp: &mut Qp, v_max: f64, a_max: f64) {
        for i in 0..self.nvars() {
            qp.bound(i, -a_max, a_max);
        }
        for step in 1..self.m {
            for axis in 0..3 {
                let (coeffs, c) = self.velocity_row(axis, step);
                if step == self.m - 1 {
                    qp.eq(coeffs, -c);
                } else {
                    qp.leq(coeffs.clone(), v_max - c);
                    qp.leq(coeffs.into_iter().map(|(i, v)| (i, -v)).collect(), v_max + c);
                }
            }
        }
    }

    /// `p_step + R l ∈ set` for every offset `l` in `offsets` (already
    /// rotated): each row keeps only the farthest offset.
    fn add_set(&self, qp: &mut Qp, set: &ConvexPolytope, offsets: &[Vec3], step: usize, relax: f64) {
        for h in set.rows() {
            let reach = offsets.iter().map(|o| h.normal.dot(o)).fold(f64::NEG_INFINITY, f64::max);
            let (coeffs, c) = self.position_row(&h.normal, step);
            qp.leq(coeffs, h.offset + relax - TIGHTEN - reach - c);
        }
    }
}

/// Tracks one reference path through its sets.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub path: ReferencePath,
    pub workspace: Workspace,
    pub cfg: TrackerConfig,
    pub state: TrackerState,
}

impl Tracker {
    pub fn new(path: ReferencePath, workspace: Workspace, cfg: TrackerConfig, collision_points: Vec<CollisionPoint>) -> Result<Self> {
        cfg.validate()?;
        for c in &collision_points {
            if !(c.margin >= 0.0) {
                return Err(Error::InvalidInput("collision point margins must be non-negative".into()));
            }
        }
        let state = TrackerState::at_rest(&path, &cfg, collision_points);
        Ok(Self {
            path,
            workspace,
            cfg,
            state,
        })
    }

    pub fn goal(&self) -> Vec3 {
        self.path.position(self.path.length())
    }

    /// Whether the end-effector rests at the goal.
    pub fn arrived(&self) -> bool {
        (self.state.position - self.goal()).norm() <= self.cfg.goal_tolerance
            && self.state.velocity.amax() <= self.cfg.goal_tolerance
    }

    fn offsets_at(&self, phi: f64, offsets: &[Vec3]) -> Vec<Vec3> {
        let r = self.path.orientation(phi);
        offsets.iter().map(|l| r.apply(l)).collect()
    }

    /// One control step: solves the horizon program, applies the first
    /// acceleration and shifts the horizon.
    pub fn step(&mut self) -> Result<StepReport> {
        let n_seg = self.path.num_segments();
        let st = &self.state;
        let current = &self.path.sets[st.active_segment];
        if hull_violation(&self.path, current, &st.position, st.orientation_phi) > TUNNEL_TOL {
            return Err(Error::TunnelViolation { step: st.steps });
        }

        // Advance the active segment while the current pose already qualifies.
        // The previous solution moved every step from its split on into the
        // next set, so the split never moves back: the shifted solution then
        // stays feasible.
        let mut split = split_index(&self.state, &self.path, self.state.active_segment, self.cfg.eps_phi);
        if let Some(prev) = self.state.last_split {
            split = split.min(prev.saturating_sub(1));
        }
        while split == 0 && self.state.active_segment + 1 < n_seg {
            self.state.active_segment += 1;
            self.state.last_split = None;
            split = split_index(&self.state, &self.path, self.state.active_segment, self.cfg.eps_phi);
        }
        self.state.collision_sets = update_collision_sets(&self.state, &self.path, &self.workspace)?;

        let mut solved = self.solve_horizon(split);
        if solved.is_none() && !self.state.collision_sets.is_empty() {
            if let Some(sets) = horizon_collision_sets(&self.state, &self.path, &self.workspace) {
                debug!("retrying step {} with horizon-seeded collision sets", self.state.steps);
                self.state.collision_sets = sets;
                solved = self.solve_horizon(split);
            }
        }
        let (x, status) = match solved {
            Some(x) => (x, StepStatus::Optimal),
            None => {
                warn!("horizon program failed at step {}, braking", self.state.steps);
                (self.brake(), StepStatus::Degraded)
            }
        };
        let hz = self.horizon_model();
        let predicted = hz.positions(&x);
        let acceleration = Vec3::new(x[0], x[1], x[2]);
        let active_before = self.state.active_segment;

        let st = &mut self.state;
        let dt = self.cfg.dt;
        st.position += dt * st.velocity + 0.5 * dt * dt * acceleration;
        st.velocity += dt * acceleration;
        st.orientation_phi = st.horizon_phi[1];
        st.time += dt;
        st.steps += 1;
        let m = predicted.len();
        st.horizon = predicted[1..].to_vec();
        st.horizon.push(predicted[m - 1]);
        st.horizon[0] = st.position;
        st.last_split = (split < m).then_some(split);
        if split <= 1 && st.active_segment + 1 < n_seg {
            st.active_segment += 1;
            st.last_split = None;
        }
        self.reproject();

        let st = &self.state;
        let set = &self.path.sets[st.active_segment];
        let v = hull_violation(&self.path, set, &st.position, st.orientation_phi);
        if v > TUNNEL_TOL {
            return Err(Error::TunnelViolation { step: st.steps });
        }
        Ok(StepReport {
            acceleration,
            status,
            split_index: split,
            active_segment: active_before,
        })
    }

    fn horizon_model(&self) -> Horizon {
        Horizon {
            m: self.cfg.horizon_steps,
            dt: self.cfg.dt,
            p0: self.state.position,
            v0: self.state.velocity,
        }
    }

    /// Progress values of the horizon by monotone windowed projection.
    fn reproject(&mut self) {
        let st = &mut self.state;
        let mut lo = st.phi;
        for m in 0..st.horizon.len() {
            let phi = self.path.project(&st.horizon[m], lo, lo + PROJECTION_WINDOW).max(lo);
            st.horizon_phi[m] = phi;
            lo = phi;
        }
        st.phi = st.horizon_phi[0];
    }

    fn solve_horizon(&self, split: usize) -> Option<Vec<f64>> {
        let cfg = &self.cfg;
        let st = &self.state;
        let hz = self.horizon_model();
        let m_total = cfg.horizon_steps;
        let i = st.active_segment;
        let mut qp = Qp::new(hz.nvars());
        hz.add_dynamics(&mut qp, cfg.v_max, cfg.a_max);

        // Tunnel: steps before the split stay in set i, the rest in set i+1.
        for m in 1..m_total {
            let set = if m >= split { &self.path.sets[i + 1] } else { &self.path.sets[i] };
            let offsets = self.offsets_at(st.horizon_phi[m], &self.path.hull_offsets);
            hz.add_set(&mut qp, set, &offsets, m, 0.0);
        }
        // Terminal: once the horizon reaches set i+1, its end may not drift
        // farther from set i+2 than the previous prediction did.
        if split < m_total && i + 2 < self.path.num_segments() {
            let end = st.horizon[m_total - 1];
            for h in self.path.sets[i + 2].rows() {
                let relax = (h.normal.dot(&end) - h.offset).max(0.0) + cfg.eps_phi;
                let (coeffs, c) = hz.position_row(&h.normal, m_total - 1);
                qp.leq(coeffs, h.offset + relax - c);
            }
        }
        self.add_collision_rows(&mut qp, &hz);

        // Progress toward the path end, linearized at the predicted values.
        let phi_end = self.path.length();
        let last = m_total - 1;
        let phi_bar = st.horizon_phi[last];
        let t = self.path.tangent(phi_bar);
        let c = self.path.position(phi_bar);
        let (coeffs, k) = hz.position_row(&t, last);
        if !coeffs.is_empty() {
            qp.add_squared(&coeffs, k - t.dot(&c) + phi_bar - phi_end, cfg.progress_weight);
        }
        // Deviation from the path, measured across the tangent.
        for m in 1..m_total {
            let phi = st.horizon_phi[m];
            let t = self.path.tangent(phi);
            let c = self.path.position(phi);
            for axis in 0..3 {
                let row = Vec3::ith(axis, 1.0) - t * t[axis];
                let (coeffs, k) = hz.position_row(&row, m);
                qp.add_squared(&coeffs, k - row.dot(&c), cfg.deviation_weight);
            }
        }
        for v in 0..hz.nvars() {
            qp.add_squared(&[(v, 1.0)], 0.0, cfg.accel_weight.max(1e-9));
        }
        match qp.solve() {
            Ok(sol) => Some(sol.x.iter().copied().collect()),
            Err(e) => {
                debug!("horizon program: {e}");
                None
            }
        }
    }

    fn add_collision_rows(&self, qp: &mut Qp, hz: &Horizon) {
        let st = &self.state;
        for (r, set) in st.collision_sets.iter().enumerate() {
            let offset = st.collision_points[r].offset;
            for m in 1..self.cfg.horizon_steps {
                let o = self.path.orientation(st.horizon_phi[m]).apply(&offset);
                hz.add_set(qp, set, &[o], m, 0.0);
            }
        }
    }

    /// Stops as fast as possible while staying in the current set; falls back
    /// to unconstrained braking when even that program fails.
    fn brake(&self) -> Vec<f64> {
        let cfg = &self.cfg;
        let st = &self.state;
        let hz = self.horizon_model();
        let set = &self.path.sets[st.active_segment];
        for with_collision in [true, false] {
            let mut qp = Qp::new(hz.nvars());
            hz.add_dynamics(&mut qp, cfg.v_max.max(st.velocity.amax()), cfg.a_max);
            for m in 1..cfg.horizon_steps {
                let offsets = self.offsets_at(st.orientation_phi, &self.path.hull_offsets);
                hz.add_set(&mut qp, set, &offsets, m, 0.0);
            }
            if with_collision {
                self.add_collision_rows(&mut qp, &hz);
            }
            for step in 1..cfg.horizon_steps {
                for axis in 0..3 {
                    let (coeffs, c) = hz.velocity_row(axis, step);
                    qp.add_squared(&coeffs, c, 1.0);
                }
            }
            if let Ok(sol) = qp.solve() {
                return sol.x.iter().copied().collect();
            }
        }
        let mut x = vec![0.0; hz.nvars()];
        let mut v = st.velocity;
        for k in 0..cfg.horizon_steps - 1 {
            for axis in 0..3 {
                let a = (-v[axis] / cfg.dt).clamp(-cfg.a_max, cfg.a_max);
                x[3 * k + axis] = a;
                v[axis] += cfg.dt * a;
            }
        }
        x
    }

    /// Replans toward a new goal from the current horizon and swaps the path
    /// in place.
    pub fn replan(&mut self, template: &PlanRequest, pf: Vec3, rf: Rotation) -> Result<ReplanRecord> {
        let started = Instant::now();
        let st = &self.state;
        let current = &self.path.sets[st.active_segment];
        let r_now = st.orientation(&self.path);
        let p1 = st.horizon[0];
        // Farthest horizon step still inside the current set.
        let h_max = (0..st.horizon.len())
            .rev()
            .find(|&m| current.contains(&st.horizon[m], 1e-9))
            .unwrap_or(0);
        let p_max = st.horizon[h_max];
        let mut req = template.clone();
        req.p0 = p1;
        req.r0 = r_now;
        req.pf = pf;
        req.rf = rf;

        let in_known_set = self.path.sets.iter().any(|s| hull_in(&self.path, s, &p1, st.orientation_phi, 1e-9));
        let mut points = self.path.hull_points_at(&p1, &r_now);
        points.extend(self.path.hull_points_at(&p_max, &self.path.orientation(st.horizon_phi[h_max])));
        let start_set = if in_known_set {
            set_convex_hull(&ConvexBody::new(points)?, &self.workspace, req.inflation.obstacle_margin).ok()
        } else {
            None
        };
        let cold = start_set.is_none();
        let planned = match start_set {
            Some(s) => plan_with_start_set(&req, s)?,
            None => plan(&req)?,
        };
        let mut path = planned.path;
        let lead = self.cfg.eps_phi.max((p_max - p1).norm());
        let v = self.state.velocity;
        path.lead_dir = if v.norm() > 1e-9 { v.normalize() } else { path.tangent(0.0) };
        path.lead_in = lead;
        let plan_time = started.elapsed().as_secs_f64();
        info!("replanned in {plan_time:.3} s, {} sets", path.num_segments());

        self.path = path;
        let st = &mut self.state;
        st.phi = self.path.start_phi();
        st.active_segment = 0;
        st.last_split = None;
        st.orientation_phi = 0.0;
        for hp in st.horizon_phi.iter_mut() {
            *hp = st.phi;
        }
        self.reproject();
        // The pose is held at the new path's start orientation.
        self.state.orientation_phi = 0.0;
        Ok(ReplanRecord {
            time: self.state.time,
            plan_time,
            p_horizon_1: p1,
            p_horizon_max: p_max,
            horizon_max_index: h_max,
            lead_in: lead,
            cold_start: cold,
            set_ids: self.path.set_ids.clone(),
        })
    }
}

/// When a goal change fires during a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Simulated time in seconds.
    Time(f64),
    /// Remaining path length in meters.
    Remaining(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalChange {
    pub trigger: Trigger,
    pub position: Vec3,
    pub orientation: Rotation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub phi: f64,
    pub active_set: usize,
    pub split_index: usize,
    pub status: StepStatus,
    /// Largest hull violation of the assigned set.
    pub tunnel_violation: f64,
    pub collision: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub time: f64,
    pub plan_time: f64,
    pub p_horizon_1: Vec3,
    pub p_horizon_max: Vec3,
    pub horizon_max_index: usize,
    pub lead_in: f64,
    pub cold_start: bool,
    pub set_ids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub steps: Vec<StepRecord>,
    pub replans: Vec<ReplanRecord>,
    pub reached: bool,
    pub duration: f64,
    pub degraded: usize,
    pub collisions: usize,
    pub final_position: Vec3,
}

/// Whether the hull or any collision point touches an obstacle.
pub fn in_collision(tracker: &Tracker) -> bool {
    let st = &tracker.state;
    let r = st.orientation(&tracker.path);
    let hull = ConvexBody::new(tracker.path.hull_points_at(&st.position, &r)).expect("non-empty hull");
    let ws = &tracker.workspace;
    ws.obstacles.iter().any(|o| closest_points(&hull, o).distance <= 1e-9)
        || st.collision_points.iter().any(|c| {
            let p = ConvexBody::point(st.position + r.apply(&c.offset));
            ws.obstacles
                .iter()
                .any(|o| closest_points(&p, o).distance < c.margin - 1e-6)
        })
}

/// Time after which a run without replans counts as stuck.
pub fn time_limit(path: &ReferencePath, cfg: &TrackerConfig) -> f64 {
    4.0 * path.length() / cfg.v_max + 10.0
}

/// Closed-loop run until the final goal is reached or time runs out,
/// applying goal changes at their triggers.
pub fn simulate(tracker: &mut Tracker, events: &[GoalChange], template: &PlanRequest) -> Result<SimulationLog> {
    let mut steps = Vec::new();
    let mut replans = Vec::new();
    let mut pending: Vec<&GoalChange> = events.iter().collect();
    let mut deadline = time_limit(&tracker.path, &tracker.cfg);
    let mut reached = false;
    while tracker.state.time < deadline {
        if let Some(ev) = pending.first() {
            let fire = match ev.trigger {
                Trigger::Time(t) => tracker.state.time >= t,
                Trigger::Remaining(d) => tracker.path.length() - tracker.state.phi <= d,
            };
            if fire {
                let rec = tracker.replan(template, ev.position, ev.orientation)?;
                pending.remove(0);
                deadline = tracker.state.time + time_limit(&tracker.path, &tracker.cfg);
                replans.push(rec);
            }
        }
        if pending.is_empty() && tracker.arrived() {
            reached = true;
            break;
        }
        let report = tracker.step()?;
        let st = &tracker.state;
        let set = &tracker.path.sets[st.active_segment];
        steps.push(StepRecord {
            time: st.time,
            position: st.position,
            velocity: st.velocity,
            acceleration: report.acceleration,
            phi: st.phi,
            active_set: tracker.path.set_ids[st.active_segment],
            split_index: report.split_index,
            status: report.status,
            tunnel_violation: hull_violation(&tracker.path, set, &st.position, st.orientation_phi),
            collision: in_collision(tracker),
        });
    }
    let degraded = steps.iter().filter(|s| s.status == StepStatus::Degraded).count();
    let collisions = steps.iter().filter(|s| s.collision).count();
    Ok(SimulationLog {
        duration: tracker.state.time,
        final_position: tracker.state.position,
        steps,
        replans,
        reached,
        degraded,
        collisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::planner::{optimize_path, EndEffectorModel, PathProblem};

    fn boxp(min: [f64; 3], max: [f64; 3]) -> ConvexPolytope {
        Aabb::new(Vec3::from(min), Vec3::from(max)).unwrap().to_polytope()
    }

    fn ws() -> Workspace {
        Workspace::new(Aabb::new(Vec3::zeros(), Vec3::new(2.0, 2.0, 1.0)).unwrap(), vec![])
    }

    fn path_through(sets: &[ConvexPolytope], p0: Vec3, pf: Vec3, ee: &EndEffectorModel) -> ReferencePath {
        let ids: Vec<usize> = (0..sets.len()).collect();
        let costs = vec![1.0; sets.len()];
        optimize_path(&PathProblem {
            sets,
            set_ids: &ids,
            size_costs: &costs,
            p0,
            r0: Rotation::identity(),
            pf,
            rf: Rotation::identity(),
            hull_offsets: &ee.hull_offsets,
            w_alpha: 0.1,
            position_only: false,
        })
        .unwrap()
    }

    #[test]
    fn straight_path_stays_on_line() {
        let sets = [boxp([0.0; 3], [2.0, 2.0, 1.0])];
        let p0 = Vec3::new(0.2, 0.5, 0.5);
        let pf = Vec3::new(1.2, 0.5, 0.5);
        let path = path_through(&sets, p0, pf, &EndEffectorModel::point());
        let mut t = Tracker::new(path, ws(), TrackerConfig::default(), vec![]).unwrap();
        let rep = t.step().unwrap();
        assert_eq!(rep.status, StepStatus::Optimal);
        assert!(rep.acceleration.x > 0.0);
        for p in &t.state.horizon {
            assert!((p.y - 0.5).abs() < 1e-6 && (p.z - 0.5).abs() < 1e-6);
        }
        let log = simulate(&mut t, &[], &PlanRequest::new(p0, Rotation::identity(), pf, Rotation::identity(), ws(), EndEffectorModel::point())).unwrap();
        assert!(log.reached);
        assert!((log.final_position - pf).norm() < 1e-3);
        assert_eq!(log.collisions, 0);
    }

    #[test]
    fn split_index_scans_membership() {
        let sets = [boxp([0.0, 0.0, 0.0], [1.1, 1.0, 1.0]), boxp([0.9, 0.0, 0.0], [2.0, 1.0, 1.0])];
        let path = path_through(&sets, Vec3::new(0.2, 0.5, 0.5), Vec3::new(1.8, 0.5, 0.5), &EndEffectorModel::point());
        let cfg = TrackerConfig::default();
        let mut st = TrackerState::at_rest(&path, &cfg, vec![]);
        assert_eq!(split_index(&st, &path, 0, cfg.eps_phi), cfg.horizon_steps);
        // Horizon marching across the overlap: first qualifying step is 7.
        for m in 0..cfg.horizon_steps {
            st.horizon[m] = Vec3::new(0.6 + 0.05 * m as f64, 0.5, 0.5);
            st.horizon_phi[m] = path.length();
        }
        let brute = (0..cfg.horizon_steps)
            .find(|&m| {
                sets[0].contains(&st.horizon[m], 0.0)
                    && sets[1].contains(&st.horizon[m], 0.0)
                    && st.horizon_phi[m] > path.knots[1] - cfg.eps_phi
            })
            .unwrap();
        assert_eq!(split_index(&st, &path, 0, cfg.eps_phi), brute);
        assert_eq!(brute, 6, "step 7 of the horizon is the first inside the overlap");
        assert_eq!(split_index(&st, &path, 1, cfg.eps_phi), cfg.horizon_steps);
    }

    #[test]
    fn collision_set_separates_point_obstacle() {
        let ws = Workspace::new(
            Aabb::new(Vec3::repeat(-2.0), Vec3::repeat(2.0)).unwrap(),
            vec![ConvexBody::point(Vec3::new(0.5, 1.0, 0.0))],
        );
        let s = collision_set_for_point(&Vec3::zeros(), &Vec3::x(), &ws, 0.1).unwrap();
        let row = s.rows().iter().find(|h| (h.normal - Vec3::y()).norm() < 1e-9).unwrap();
        assert!((row.offset - 0.9).abs() < 1e-9);
        assert!(s.contains(&Vec3::zeros(), 0.0) && s.contains(&Vec3::x(), 0.0));
        let blocked = collision_set_for_point(&Vec3::zeros(), &Vec3::new(1.0, 2.0, 0.0), &ws, 0.0);
        assert!(matches!(blocked, Err(Error::PredictedCollision { point: 0 })));
    }

    #[test]
    fn corner_path_respects_split() {
        let sets = [boxp([0.0, 0.0, 0.0], [1.5, 0.5, 1.0]), boxp([1.0, 0.0, 0.0], [1.5, 1.8, 1.0])];
        let ee = EndEffectorModel::cuboid(Vec3::repeat(0.05));
        let path = path_through(&sets, Vec3::new(0.2, 0.25, 0.5), Vec3::new(1.25, 1.6, 0.5), &ee);
        let mut t = Tracker::new(path.clone(), ws(), TrackerConfig::default(), vec![]).unwrap();
        let req = PlanRequest::new(Vec3::zeros(), Rotation::identity(), Vec3::zeros(), Rotation::identity(), ws(), ee);
        let log = simulate(&mut t, &[], &req).unwrap();
        assert!(log.reached);
        assert_eq!(log.degraded, 0);
        assert!(log.steps.iter().all(|s| s.tunnel_violation <= 1e-6));
        assert!((log.final_position - path.position(path.length())).norm() <= 1e-3);
    }
}
