//! Set exploration, set-path search and reference path construction.

mod optimize;
mod path;
mod smoothing;

use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use optimize::{optimize_path, PathProblem};
pub use path::{ReferencePath, SegmentExtremum};
pub use smoothing::{fresnel, smooth_corners, Blend};

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, ConvexPolytope, Halfspace, Rotation, Vec3};
use crate::graph::{CostParams, SetGraph, SetPath};
use crate::inflation::{inflate, mvie, set_convex_hull, InflationConfig, InflationMode, Workspace};

/// Rigid hull carried by the end-effector, as offsets in its own frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorModel {
    pub hull_offsets: Vec<Vec3>,
}

impl EndEffectorModel {
    pub fn new(hull_offsets: Vec<Vec3>) -> Result<Self> {
        let ee = Self { hull_offsets };
        ee.validate()?;
        Ok(ee)
    }

    /// Single hull point at the frame origin.
    pub fn point() -> Self {
        Self {
            hull_offsets: vec![Vec3::zeros()],
        }
    }

    /// Axis-aligned box with the given half extents, centered on the origin.
    pub fn cuboid(half: Vec3) -> Self {
        let mut hull_offsets = Vec::with_capacity(8);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    hull_offsets.push(Vec3::new(sx * half.x, sy * half.y, sz * half.z));
                }
            }
        }
        Self { hull_offsets }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hull_offsets.is_empty() {
            return Err(Error::InvalidInput("end-effector hull needs at least one offset".into()));
        }
        if self.hull_offsets.iter().any(|l| !l.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("end-effector offsets must be finite".into()));
        }
        Ok(())
    }

    pub fn points_at(&self, p: &Vec3, r: &Rotation) -> Vec<Vec3> {
        self.hull_offsets.iter().map(|l| p + r.apply(l)).collect()
    }

    pub fn body_at(&self, p: &Vec3, r: &Rotation) -> ConvexBody {
        ConvexBody::new(self.points_at(p, r)).expect("hull has at least one point")
    }
}

/// Whether the hull fits somewhere in `poly` at one of the probe orientations.
pub fn ee_fits(poly: &ConvexPolytope, ee: &EndEffectorModel, probes: &[Rotation]) -> bool {
    probes.iter().any(|r| {
        let offsets: Vec<Vec3> = ee.hull_offsets.iter().map(|l| r.apply(l)).collect();
        let shrunk = ConvexPolytope::from_halfspaces(
            poly.rows()
                .iter()
                .map(|h| {
                    let reach = offsets.iter().map(|o| h.normal.dot(o)).fold(f64::NEG_INFINITY, f64::max);
                    Halfspace {
                        normal: h.normal,
                        offset: h.offset - reach,
                    }
                })
                .collect(),
        );
        !shrunk.is_empty().is_empty()
    })
}

pub const DEFAULT_SAMPLE_ATTEMPTS: usize = 10_000;

/// Uniform domain sample outside every obstacle (grown by `margin`) and every
/// existing set.
pub fn sample_free(
    ws: &Workspace,
    existing: &[&ConvexPolytope],
    margin: f64,
    rng: &mut impl Rng,
    max_attempts: usize,
) -> Result<Vec3> {
    let (lo, hi) = (ws.domain.min, ws.domain.max);
    for _ in 0..max_attempts {
        let x = Vec3::new(
            rng.gen_range(lo.x..=hi.x),
            rng.gen_range(lo.y..=hi.y),
            rng.gen_range(lo.z..=hi.z),
        );
        if existing.iter().any(|s| s.contains(&x, 0.0)) {
            continue;
        }
        if ws.is_free(&x, margin) {
            return Ok(x);
        }
    }
    Err(Error::ExplorationSaturated { attempts: max_attempts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub p0: Vec3,
    pub r0: Rotation,
    pub pf: Vec3,
    pub rf: Rotation,
    pub workspace: Workspace,
    pub ee: EndEffectorModel,
    pub cost: CostParams,
    pub inflation: InflationConfig,
    pub rng_seed: u64,
    /// Largest number of set inflations before giving up.
    pub sample_budget: usize,
    pub w_alpha: f64,
    pub position_only: bool,
    pub smooth: bool,
    pub max_sample_attempts: usize,
}

impl PlanRequest {
    pub fn new(p0: Vec3, r0: Rotation, pf: Vec3, rf: Rotation, workspace: Workspace, ee: EndEffectorModel) -> Self {
        Self {
            p0,
            r0,
            pf,
            rf,
            workspace,
            ee,
            cost: CostParams::default(),
            inflation: InflationConfig::default(),
            rng_seed: 0,
            sample_budget: 200,
            w_alpha: 0.1,
            position_only: false,
            smooth: true,
            max_sample_attempts: DEFAULT_SAMPLE_ATTEMPTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ee.validate()?;
        self.cost.validate()?;
        self.inflation.validate()?;
        if !(self.w_alpha > 0.0 && self.w_alpha.is_finite()) {
            return Err(Error::InvalidInput("w_alpha must be positive".into()));
        }
        if self.sample_budget == 0 {
            return Err(Error::InvalidInput("sample_budget must be positive".into()));
        }
        for (name, p) in [("start", &self.p0), ("goal", &self.pf)] {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} position must be finite")));
            }
        }
        Ok(())
    }

    fn probes(&self) -> [Rotation; 3] {
        [Rotation::identity(), self.r0, self.rf]
    }
}

/// Counters describing one planner run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub inflations: usize,
    pub failed_inflations: usize,
    pub explorations: usize,
    pub refinements: usize,
    pub set_path_searches: usize,
    pub plan_time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Plan {
    pub path: ReferencePath,
    pub graph: SetGraph,
    pub set_path: SetPath,
    pub stats: PlanStats,
}

/// Plans a reference path from the start pose to the goal pose.
pub fn plan(req: &PlanRequest) -> Result<Plan> {
    req.validate()?;
    let hull = req.ee.body_at(&req.p0, &req.r0);
    let s0 = set_convex_hull(&hull, &req.workspace, req.inflation.obstacle_margin).map_err(|e| match e {
        Error::HullInCollision { obstacle } => Error::StartInCollision { obstacle },
        Error::HullOutsideDomain => Error::InvalidInput("start hull leaves the domain".into()),
        e => e,
    })?;
    plan_with_start_set(req, s0)
}

/// Like [`plan`] with a caller-supplied start set that must contain the start
/// hull.
pub fn plan_with_start_set(req: &PlanRequest, s0: ConvexPolytope) -> Result<Plan> {
    let started = Instant::now();
    req.validate()?;
    let ws = &req.workspace;
    let margin = req.inflation.obstacle_margin;
    let hull_f = req.ee.body_at(&req.pf, &req.rf);
    let sf = set_convex_hull(&hull_f, ws, margin).map_err(|e| match e {
        Error::HullInCollision { obstacle } => Error::GoalInCollision { obstacle },
        Error::HullOutsideDomain => Error::InvalidInput("goal hull leaves the domain".into()),
        e => e,
    })?;
    let e0 = mvie(&s0)?;
    let ef = mvie(&sf)?;

    let probes = req.probes();
    let fit = |p: &ConvexPolytope| ee_fits(p, &req.ee, &probes);
    let mut graph = SetGraph::new(req.cost);
    graph.add_start_set(s0, e0, req.p0, &fit);
    graph.add_final_set(sf, ef, req.pf, &fit);

    let mut rng = ChaCha8Rng::seed_from_u64(req.rng_seed);
    let mut stats = PlanStats::default();
    let mut previous: Option<Vec<usize>> = None;
    let mut used_seeds: Vec<Vec3> = Vec::new();
    let budget_error = |graph: SetGraph| Error::BudgetExceeded {
        budget: req.sample_budget,
        graph: Box::new(graph),
    };

    let set_path = loop {
        if graph.connected() {
            let sp = graph.shortest_set_path()?;
            stats.set_path_searches += 1;
            if previous.as_ref() == Some(&sp.sets) {
                break sp;
            }
            debug!("set path {:?} cost {:.4}", sp.sets, sp.cost);
            previous = Some(sp.sets.clone());
            let seeds: Vec<Vec3> = sp
                .vertices
                .iter()
                .map(|&v| graph.vertices[v].point)
                .filter(|p| !used_seeds.contains(p))
                .collect();
            if stats.inflations + seeds.len() > req.sample_budget {
                return Err(budget_error(graph));
            }
            used_seeds.extend(&seeds);
            let grown: Vec<_> = seeds
                .par_iter()
                .map(|s| inflate(s, ws, InflationMode::FixedMid, &req.inflation))
                .collect();
            for g in grown {
                stats.inflations += 1;
                stats.refinements += 1;
                match g {
                    Ok(inf) => {
                        graph.add_set(inf.polytope, inf.ellipsoid, &fit);
                    }
                    Err(e) => {
                        stats.failed_inflations += 1;
                        debug!("refinement inflation skipped: {e}");
                    }
                }
            }
        } else {
            if stats.inflations >= req.sample_budget {
                return Err(budget_error(graph));
            }
            let existing: Vec<&ConvexPolytope> = graph.sets.iter().map(|s| &s.polytope).collect();
            let seed = sample_free(ws, &existing, margin, &mut rng, req.max_sample_attempts)?;
            stats.inflations += 1;
            stats.explorations += 1;
            match inflate(&seed, ws, InflationMode::Mvie, &req.inflation) {
                Ok(inf) => {
                    graph.add_set(inf.polytope, inf.ellipsoid, &fit);
                }
                Err(e) => {
                    stats.failed_inflations += 1;
                    debug!("exploration inflation skipped: {e}");
                }
            }
        }
    };

    debug!("set path fixed after {:.3} s", started.elapsed().as_secs_f64());
    let sets: Vec<ConvexPolytope> = set_path.sets.iter().map(|&s| graph.sets[s].polytope.clone()).collect();
    let costs: Vec<f64> = set_path.sets.iter().map(|&s| graph.sets[s].size_cost).collect();
    let problem = PathProblem {
        sets: &sets,
        set_ids: &set_path.sets,
        size_costs: &costs,
        p0: req.p0,
        r0: req.r0,
        pf: req.pf,
        rf: req.rf,
        hull_offsets: &req.ee.hull_offsets,
        w_alpha: req.w_alpha,
        position_only: req.position_only,
    };
    let mut path = optimize_path(&problem)?;
    debug!("path optimized after {:.3} s", started.elapsed().as_secs_f64());
    if req.smooth {
        path = smooth_corners(&path);
    }
    stats.plan_time = started.elapsed().as_secs_f64();
    info!(
        "planned {} sets, length {:.4} m, {} inflations in {:.3} s",
        set_path.sets.len(),
        path.length(),
        stats.inflations,
        stats.plan_time
    );
    Ok(Plan {
        path,
        graph,
        set_path,
        stats,
    })
}
