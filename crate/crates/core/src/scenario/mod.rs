//! Scenario files, run artifacts, batch benchmarks and plot data.
//!
//! Scenarios and artifacts are JSON; trajectory logs are CSV. Poses are
//! stored as a position plus a (w, x, y, z) quaternion.

mod artifact;
mod bench;
mod plot;

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_points, Aabb, ConvexBody, Rotation, Vec3};
use crate::graph::CostParams;
use crate::inflation::{InflationConfig, Workspace};
use crate::planner::{EndEffectorModel, PlanRequest};
use crate::tracker::{CollisionPoint, GoalChange, TrackerConfig, Trigger};

pub use artifact::{
    canonical_metrics, read_trajectory_csv, run_plan, run_track, write_trajectory_csv, Metrics, PlanOutcome,
    SetRecord, Timing, TrackOutcome,
};
pub use bench::{bench, format_table, BenchReport, BenchRun, ScenarioSummary, Stats, TimingSummary};
pub use plot::{emit_plot_data, polytope_faces, Face, FaceSet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxSpec {
    pub fn to_aabb(&self) -> Result<Aabb> {
        Aabb::new(Vec3::from(self.min), Vec3::from(self.max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub position: [f64; 3],
    /// (w, x, y, z)
    #[serde(default = "identity_quaternion")]
    pub orientation: [f64; 4],
}

fn identity_quaternion() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Pose {
    pub fn rotation(&self) -> Result<Rotation> {
        let [w, x, y, z] = self.orientation;
        Rotation::from_quaternion(w, x, y, z)
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

/// A convex obstacle, given either as vertices or as a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 3]>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub aabb: Option<BoxSpec>,
}

impl ObstacleSpec {
    pub fn body(&self) -> Result<ConvexBody> {
        match (&self.vertices, &self.aabb) {
            (Some(v), None) => ConvexBody::new(v.iter().map(|p| Vec3::from(*p)).collect()),
            (None, Some(b)) => {
                let a = b.to_aabb()?;
                Ok(ConvexBody::cuboid(a.min, a.max))
            }
            _ => Err(Error::InvalidInput("exactly one of `vertices` or `box` is required".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionPointSpec {
    pub name: String,
    pub offset: [f64; 3],
    #[serde(default)]
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub c_bias: f64,
    pub w_size: f64,
    pub w_alpha: f64,
    pub sample_budget: usize,
    pub rng_seed: u64,
    pub position_only: bool,
    pub smooth: bool,
    pub obstacle_margin: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        let c = CostParams::default();
        Self {
            c_bias: c.c_bias,
            w_size: c.w_size,
            w_alpha: 0.1,
            sample_budget: 200,
            rng_seed: 0,
            position_only: false,
            smooth: true,
            obstacle_margin: 0.0,
        }
    }
}

/// Goal change fired during tracking. With `goal_region`, randomized
/// benchmark repetitions draw the goal position uniformly from the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplanEvent {
    pub trigger: Trigger,
    pub goal: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_region: Option<BoxSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// Expected planner error name, for scenarios built to fail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_failure: Option<String>,
    pub domain: BoxSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub start: Pose,
    pub goal: Pose,
    /// Hull offsets in the end-effector frame.
    pub end_effector: Vec<[f64; 3]>,
    #[serde(default)]
    pub collision_points: Vec<CollisionPointSpec>,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub replans: Vec<ReplanEvent>,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{field}: {msg}"))
}

/// Message of a nested error without a repeated kind prefix.
fn cause(e: Error) -> String {
    match e {
        Error::InvalidInput(msg) => msg,
        e => e.to_string(),
    }
}

impl ScenarioFile {
    /// Parses and validates; errors carry the line/column or field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                Error::Parse(inner.to_string())
            } else {
                Error::Parse(format!("{path}: {inner}"))
            }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Pretty JSON in field declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        self.domain.to_aabb().map_err(|e| field_err("domain", cause(e)))?;
        let mut names = HashSet::new();
        for (k, o) in self.obstacles.iter().enumerate() {
            if !names.insert(o.name.as_str()) {
                return Err(field_err(&format!("obstacles[{k}].name"), format!("duplicate name `{}`", o.name)));
            }
            o.body().map_err(|e| field_err(&format!("obstacles[{k}]"), cause(e)))?;
        }
        for (k, c) in self.collision_points.iter().enumerate() {
            if !names.insert(c.name.as_str()) {
                return Err(field_err(
                    &format!("collision_points[{k}].name"),
                    format!("duplicate name `{}`", c.name),
                ));
            }
            if !(c.margin >= 0.0 && c.margin.is_finite()) {
                return Err(field_err(&format!("collision_points[{k}].margin"), "must be non-negative"));
            }
        }
        let mut poses = vec![("start", &self.start), ("goal", &self.goal)];
        let event_names: Vec<String> = (0..self.replans.len()).map(|k| format!("replans[{k}].goal")).collect();
        for (ev, name) in self.replans.iter().zip(&event_names) {
            poses.push((name, &ev.goal));
        }
        for (name, pose) in poses {
            pose.rotation().map_err(|e| field_err(&format!("{name}.orientation"), cause(e)))?;
            if !pose.position.iter().all(|c| c.is_finite()) {
                return Err(field_err(&format!("{name}.position"), "must be finite"));
            }
        }
        for (k, ev) in self.replans.iter().enumerate() {
            let (Trigger::Time(v) | Trigger::Remaining(v)) = ev.trigger;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(field_err(&format!("replans[{k}].trigger"), "must be non-negative"));
            }
            if let Some(r) = &ev.goal_region {
                r.to_aabb().map_err(|e| field_err(&format!("replans[{k}].goal_region"), cause(e)))?;
            }
        }
        EndEffectorModel::new(self.end_effector.iter().map(|p| Vec3::from(*p)).collect())
            .map_err(|e| field_err("end_effector", cause(e)))?;
        self.tracker.validate().map_err(|e| field_err("tracker", cause(e)))?;
        self.plan_request().validate().map_err(|e| field_err("planner", cause(e)))?;
        Ok(())
    }

    pub fn workspace(&self) -> Workspace {
        let obstacles = self.obstacles.iter().map(|o| o.body().expect("validated obstacle")).collect();
        Workspace::new(self.domain.to_aabb().expect("validated domain"), obstacles)
    }

    pub fn end_effector_model(&self) -> EndEffectorModel {
        EndEffectorModel {
            hull_offsets: self.end_effector.iter().map(|p| Vec3::from(*p)).collect(),
        }
    }

    pub fn plan_request(&self) -> PlanRequest {
        let p = &self.planner;
        let mut req = PlanRequest::new(
            self.start.position(),
            self.start.rotation().unwrap_or_default(),
            self.goal.position(),
            self.goal.rotation().unwrap_or_default(),
            self.workspace_unchecked(),
            self.end_effector_model(),
        );
        req.cost = CostParams {
            c_bias: p.c_bias,
            w_size: p.w_size,
        };
        req.inflation = InflationConfig {
            obstacle_margin: p.obstacle_margin,
            ..InflationConfig::default()
        };
        req.w_alpha = p.w_alpha;
        req.sample_budget = p.sample_budget;
        req.rng_seed = p.rng_seed;
        req.position_only = p.position_only;
        req.smooth = p.smooth;
        req
    }

    // Obstacles that fail to build are dropped here; validate reports them.
    fn workspace_unchecked(&self) -> Workspace {
        let domain = self
            .domain
            .to_aabb()
            .unwrap_or_else(|_| Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)).expect("unit box"));
        Workspace::new(domain, self.obstacles.iter().filter_map(|o| o.body().ok()).collect())
    }

    pub fn collision_points(&self) -> Vec<CollisionPoint> {
        self.collision_points
            .iter()
            .map(|c| CollisionPoint {
                offset: Vec3::from(c.offset),
                margin: c.margin,
            })
            .collect()
    }

    /// Goal changes as listed.
    pub fn goal_changes(&self) -> Vec<GoalChange> {
        self.replans
            .iter()
            .map(|ev| GoalChange {
                trigger: ev.trigger,
                position: ev.goal.position(),
                orientation: ev.goal.rotation().expect("validated orientation"),
            })
            .collect()
    }

    /// Goal changes with positions redrawn inside each event's goal region,
    /// keeping only draws whose hull is collision free at the goal
    /// orientation. Events without a region keep their listed goal.
    pub fn randomized_goal_changes(&self, seed: u64) -> Vec<GoalChange> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws = self.workspace();
        let ee = self.end_effector_model();
        let mut out = self.goal_changes();
        for (ev, gc) in self.replans.iter().zip(out.iter_mut()) {
            let Some(region) = ev.goal_region else { continue };
            for _ in 0..1000 {
                let p = Vec3::from_fn(|k, _| rng.gen_range(region.min[k]..=region.max[k]));
                let hull = ee.body_at(&p, &gc.orientation);
                let free = ws.obstacles.iter().all(|o| closest_points(&hull, o).distance > 1e-3)
                    && hull.vertices().iter().all(|v| ws.domain.contains(v, 0.0));
                if free {
                    gc.position = p;
                    break;
                }
            }
        }
        out
    }

    /// Copy with every box obstacle split into eight congruent sub-boxes.
    pub fn with_split_obstacles(&self) -> Result<Self> {
        let mut out = self.clone();
        out.obstacles.clear();
        for o in &self.obstacles {
            let Some(b) = o.aabb else {
                out.obstacles.push(o.clone());
                continue;
            };
            let mid: Vec<f64> = (0..3).map(|k| 0.5 * (b.min[k] + b.max[k])).collect();
            for corner in 0..8 {
                let mut min = b.min;
                let mut max = b.max;
                for k in 0..3 {
                    if corner >> k & 1 == 0 {
                        max[k] = mid[k];
                    } else {
                        min[k] = mid[k];
                    }
                }
                out.obstacles.push(ObstacleSpec {
                    name: format!("{}.{corner}", o.name),
                    vertices: None,
                    aabb: Some(BoxSpec { min, max }),
                });
            }
        }
        out.validate()?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "name": "tiny",
        "domain": {"min": [0, 0, 0], "max": [1, 1, 1]},
        "obstacles": [{"name": "block", "box": {"min": [0.4, 0.4, 0.0], "max": [0.6, 0.6, 0.5]}}],
        "start": {"position": [0.1, 0.1, 0.5], "orientation": [1, 0, 0, 0]},
        "goal": {"position": [0.9, 0.9, 0.5]},
        "end_effector": [[0, 0, 0]]
    }"#;

    #[test]
    fn parses_minimal_file_with_defaults() {
        let sc = ScenarioFile::from_json(MINIMAL).unwrap();
        assert_eq!(sc.planner, PlannerParams::default());
        assert_eq!(sc.goal.orientation, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(sc.workspace().obstacles.len(), 1);
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let a = ScenarioFile::from_json(MINIMAL).unwrap().to_json();
        let b = ScenarioFile::from_json(&a).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_quaternion_names_the_field() {
        let text = MINIMAL.replace(r#""orientation": [1, 0, 0, 0]"#, r#""orientation": [1, 0.1, 0, 0]"#);
        let err = ScenarioFile::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("start.orientation"), "{err}");
    }

    #[test]
    fn type_errors_carry_path_and_line() {
        let text = MINIMAL.replace(r#""position": [0.9, 0.9, 0.5]"#, r#""position": "up""#);
        let err = ScenarioFile::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("goal.position"), "{err}");
        assert!(err.contains("line 7"), "{err}");
    }

    #[test]
    fn missing_version_and_duplicates_rejected() {
        let text = MINIMAL.replace(r#""schema_version": 1,"#, "");
        assert!(ScenarioFile::from_json(&text).unwrap_err().to_string().contains("schema_version"));
        let mut sc = ScenarioFile::from_json(MINIMAL).unwrap();
        sc.obstacles.push(sc.obstacles[0].clone());
        assert!(sc.validate().unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn split_obstacles_cover_the_original() {
        let sc = ScenarioFile::from_json(MINIMAL).unwrap().with_split_obstacles().unwrap();
        assert_eq!(sc.obstacles.len(), 8);
        let vol: f64 = sc
            .obstacles
            .iter()
            .map(|o| {
                let b = o.aabb.unwrap();
                (0..3).map(|k| b.max[k] - b.min[k]).product::<f64>()
            })
            .sum();
        assert!((vol - 0.2 * 0.2 * 0.5).abs() < 1e-12);
    }
}
