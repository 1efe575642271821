use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioFile;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::planner::{plan, Plan, ReferencePath};
use crate::tracker::{simulate, GoalChange, SimulationLog, StepRecord, StepStatus, Tracker};

/// Wall-clock values; excluded from determinism comparisons.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_time: Option<f64>,
    #[serde(default)]
    pub replan_times: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation_length_deg: Option<f64>,
    #[serde(default)]
    pub set_sequence: Vec<usize>,
    #[serde(default)]
    pub max_iter_reached: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reached: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collisions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degraded: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tunnel_violation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replans: Option<usize>,
    pub timing: Timing,
}

impl Metrics {
    fn fail(&mut self, e: &Error) {
        self.success = false;
        self.failure = Some(e.name().to_string());
        self.failure_detail = Some(e.to_string());
    }

    fn add_path(&mut self, path: &ReferencePath) {
        let length: f64 = path.via_points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        self.path_length = Some(length);
        self.orientation_length_deg = Some(path.alphas.iter().map(|a| a.abs()).sum::<f64>().to_degrees());
        self.set_sequence = path.set_ids.clone();
        self.max_iter_reached = path.max_iter_reached;
    }

    /// Trajectory figures recomputed from the log.
    fn add_log(&mut self, log: &SimulationLog) {
        self.trajectory_duration = Some(log.steps.last().map_or(0.0, |s| s.time));
        self.steps = Some(log.steps.len());
        self.reached = Some(log.reached);
        self.collisions = Some(log.steps.iter().filter(|s| s.collision).count());
        self.degraded = Some(log.steps.iter().filter(|s| s.status == StepStatus::Degraded).count());
        self.max_tunnel_violation = Some(log.steps.iter().map(|s| s.tunnel_violation).fold(f64::NEG_INFINITY, f64::max));
        self.replans = Some(log.replans.len());
        self.timing.replan_times = log.replans.iter().map(|r| r.plan_time).collect();
    }

    /// Exit code implied by the recorded failure.
    pub fn exit_code(&self) -> i32 {
        match self.failure.as_deref() {
            None => 0,
            Some("InvalidInput" | "Parse" | "Io") => 1,
            Some("TunnelViolation" | "PredictedCollision" | "Collision" | "GoalNotReached") => 3,
            Some(_) => 2,
        }
    }
}

/// Metrics as JSON with wall-clock timing removed.
pub fn canonical_metrics(m: &Metrics) -> String {
    let mut v = serde_json::to_value(m).expect("metrics serialize");
    v.as_object_mut().expect("metrics object").remove("timing");
    serde_json::to_string_pretty(&v).expect("value serializes")
}

/// One polytope of the set sequence as `A x ≤ b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetRecord {
    pub id: usize,
    pub a: Vec<[f64; 3]>,
    pub b: Vec<f64>,
}

fn set_records(path: &ReferencePath) -> Vec<SetRecord> {
    path.sets
        .iter()
        .zip(&path.set_ids)
        .map(|(s, &id)| SetRecord {
            id,
            a: s.rows().iter().map(|h| h.normal.into()).collect(),
            b: s.rows().iter().map(|h| h.offset).collect(),
        })
        .collect()
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

pub struct PlanOutcome {
    pub scenario: ScenarioFile,
    pub result: Result<Plan>,
    pub metrics: Metrics,
}

/// Runs the planner on a scenario; `seed` and `position_only` override the
/// file's planner parameters.
pub fn run_plan(sc: &ScenarioFile, seed: Option<u64>, position_only: bool) -> PlanOutcome {
    let mut sc = sc.clone();
    if let Some(s) = seed {
        sc.planner.rng_seed = s;
    }
    sc.planner.position_only |= position_only;
    let mut metrics = Metrics {
        scenario: sc.name.clone(),
        seed: sc.planner.rng_seed,
        success: true,
        ..Metrics::default()
    };
    let result = plan(&sc.plan_request());
    match &result {
        Ok(p) => {
            metrics.add_path(&p.path);
            metrics.timing.plan_time = Some(p.stats.plan_time);
        }
        Err(e) => metrics.fail(e),
    }
    PlanOutcome {
        scenario: sc,
        result,
        metrics,
    }
}

impl PlanOutcome {
    /// Writes scenario, path, sets, metrics and optionally the set graph.
    pub fn write(&self, dir: &Path, dump_graph: bool) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("scenario.json"), self.scenario.to_json() + "\n")?;
        if let Ok(p) = &self.result {
            write_json(dir, "path.json", &p.path)?;
            write_json(dir, "sets.json", &set_records(&p.path))?;
            if dump_graph {
                write_json(dir, "graph.json", &p.graph)?;
            }
        } else if let Err(Error::BudgetExceeded { graph, .. }) = &self.result {
            if dump_graph {
                write_json(dir, "graph.json", graph)?;
            }
        }
        write_json(dir, "metrics.json", &self.metrics)
    }
}

pub struct TrackOutcome {
    pub scenario: ScenarioFile,
    /// Present when the path was planned for this run.
    pub plan: Option<PlanOutcome>,
    pub path: Option<ReferencePath>,
    pub log: Option<SimulationLog>,
    pub metrics: Metrics,
}

/// Closed-loop run of a scenario along `path`, or along a freshly planned
/// path when none is given.
pub fn run_track(
    sc: &ScenarioFile,
    path: Option<ReferencePath>,
    seed: Option<u64>,
    goal_changes: Option<Vec<GoalChange>>,
) -> TrackOutcome {
    let (plan_outcome, path) = match path {
        Some(p) => (None, p),
        None => {
            let out = run_plan(sc, seed, false);
            match &out.result {
                Ok(p) => {
                    let path = p.path.clone();
                    (Some(out), path)
                }
                Err(_) => {
                    let metrics = out.metrics.clone();
                    return TrackOutcome {
                        scenario: sc.clone(),
                        plan: Some(out),
                        path: None,
                        log: None,
                        metrics,
                    };
                }
            }
        }
    };
    let mut metrics = plan_outcome.as_ref().map_or_else(
        || Metrics {
            scenario: sc.name.clone(),
            seed: seed.unwrap_or(sc.planner.rng_seed),
            success: true,
            ..Metrics::default()
        },
        |p| p.metrics.clone(),
    );
    metrics.add_path(&path);
    let mut template = sc.plan_request();
    template.rng_seed = metrics.seed;
    let events = goal_changes.unwrap_or_else(|| sc.goal_changes());
    let log = Tracker::new(path.clone(), sc.workspace(), sc.tracker, sc.collision_points())
        .and_then(|mut t| simulate(&mut t, &events, &template));
    let log = match log {
        Ok(log) => Some(log),
        Err(e) => {
            metrics.fail(&e);
            None
        }
    };
    if let Some(log) = &log {
        metrics.add_log(log);
        if metrics.collisions > Some(0) {
            metrics.success = false;
            metrics.failure = Some("Collision".into());
        } else if !log.reached {
            metrics.success = false;
            metrics.failure = Some("GoalNotReached".into());
        }
    }
    TrackOutcome {
        scenario: sc.clone(),
        plan: plan_outcome,
        path: Some(path),
        log,
        metrics,
    }
}

impl TrackOutcome {
    /// Writes the trajectory CSV, replan records and metrics, plus the plan
    /// artifacts. `path.json` holds the initial path.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        if let Some(p) = &self.plan {
            p.write(dir, false)?;
        } else if let Some(path) = &self.path {
            fs::write(dir.join("scenario.json"), self.scenario.to_json() + "\n")?;
            write_json(dir, "path.json", path)?;
            write_json(dir, "sets.json", &set_records(path))?;
        }
        if let Some(log) = &self.log {
            fs::write(dir.join("trajectory.csv"), write_trajectory_csv(&log.steps))?;
            write_json(dir, "replans.json", &log.replans)?;
        }
        write_json(dir, "metrics.json", &self.metrics)
    }
}

const CSV_HEADER: &str =
    "time,x,y,z,vx,vy,vz,ax,ay,az,phi,active_set,split_index,status,tunnel_violation,collision";

/// Trajectory log as CSV; floats use the shortest exact representation.
pub fn write_trajectory_csv(steps: &[StepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in steps {
        let status = match s.status {
            StepStatus::Optimal => "optimal",
            StepStatus::Degraded => "degraded",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.time,
            s.position.x,
            s.position.y,
            s.position.z,
            s.velocity.x,
            s.velocity.y,
            s.velocity.z,
            s.acceleration.x,
            s.acceleration.y,
            s.acceleration.z,
            s.phi,
            s.active_set,
            s.split_index,
            status,
            s.tunnel_violation,
            s.collision as u8
        );
    }
    out
}

pub fn read_trajectory_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Parse("trajectory csv: unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, line)| {
            let bad = |what: &str| Error::Parse(format!("trajectory csv line {}: bad {what}", k + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 16 {
                return Err(bad("field count"));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad("number"));
            let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad("integer"));
            let v3 = |i: usize| -> Result<Vec3> { Ok(Vec3::new(num(i)?, num(i + 1)?, num(i + 2)?)) };
            Ok(StepRecord {
                time: num(0)?,
                position: v3(1)?,
                velocity: v3(4)?,
                acceleration: v3(7)?,
                phi: num(10)?,
                active_set: int(11)?,
                split_index: int(12)?,
                status: match f[13] {
                    "optimal" => StepStatus::Optimal,
                    "degraded" => StepStatus::Degraded,
                    _ => return Err(bad("status")),
                },
                tunnel_violation: num(14)?,
                collision: match f[15] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("collision flag")),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let steps = vec![
            StepRecord {
                time: 0.05,
                position: Vec3::new(0.1, 1.0 / 3.0, -2e-17),
                velocity: Vec3::new(0.5, 0.0, -0.25),
                acceleration: Vec3::new(2.0, -1.999_999_999_9, 0.0),
                phi: std::f64::consts::PI,
                active_set: 3,
                split_index: 20,
                status: StepStatus::Degraded,
                tunnel_violation: -0.0123,
                collision: false,
            };
            2
        ];
        let back = read_trajectory_csv(&write_trajectory_csv(&steps)).unwrap();
        assert_eq!(back, steps);
    }

    #[test]
    fn canonical_metrics_drop_timing() {
        let mut a = Metrics {
            scenario: "x".into(),
            success: true,
            ..Metrics::default()
        };
        let mut b = a.clone();
        a.timing.plan_time = Some(0.1);
        b.timing.plan_time = Some(0.2);
        assert_eq!(canonical_metrics(&a), canonical_metrics(&b));
        assert!(!canonical_metrics(&a).contains("timing"));
    }
}
