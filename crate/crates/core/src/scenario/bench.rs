use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::artifact::{canonical_metrics, run_track, Metrics};
use super::ScenarioFile;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        Some(Stats {
            n: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            avg: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Deterministic per-scenario aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub file: String,
    pub runs: usize,
    pub failures: usize,
    pub failure_kinds: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_failure: Option<String>,
    pub path_length: Option<Stats>,
    pub orientation_length_deg: Option<Stats>,
    pub num_sets: Option<Stats>,
    pub trajectory_duration: Option<Stats>,
    pub replans: usize,
    pub collisions: usize,
    pub degraded: usize,
}

impl ScenarioSummary {
    /// Failures that the scenario does not declare as expected.
    pub fn unexpected_failures(&self) -> usize {
        match &self.expect_failure {
            Some(kind) => self.runs - self.failure_kinds.get(kind).copied().unwrap_or(0),
            None => self.failures,
        }
    }
}

/// Wall-clock aggregate, kept apart from the deterministic report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub name: String,
    pub plan_time: Option<Stats>,
    pub replan_time: Option<Stats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub file: String,
    pub rep: usize,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub reps: usize,
    pub scenarios: Vec<ScenarioSummary>,
    #[serde(skip)]
    pub timing: Vec<TimingSummary>,
    #[serde(skip)]
    pub runs: Vec<BenchRun>,
}

fn stem(file: &Path) -> String {
    file.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

/// Plans and tracks every scenario `reps` times. Repetition `k` uses seed
/// `rng_seed + k`; repetitions after the first redraw goal changes inside
/// their goal regions. Failures are counted, never fatal. With `out`, writes
/// `bench.json`, `bench_timing.json` and per-run metrics under `runs/`;
/// wall-clock figures go only to the timing files.
pub fn bench(files: &[PathBuf], reps: usize, out: Option<&Path>) -> Result<BenchReport> {
    let mut files = files.to_vec();
    files.sort();
    let mut scenarios = Vec::new();
    let mut timing = Vec::new();
    let mut runs = Vec::new();
    for file in &files {
        let name = stem(file);
        let file_str = file.to_string_lossy().into_owned();
        let mut metrics_list = Vec::new();
        let mut expect_failure = None;
        match ScenarioFile::load(file) {
            Ok(sc) => {
                expect_failure = sc.expect_failure.clone();
                for rep in 0..reps {
                    let seed = sc.planner.rng_seed.wrapping_add(rep as u64);
                    let events = if rep == 0 { sc.goal_changes() } else { sc.randomized_goal_changes(seed) };
                    let outcome = run_track(&sc, None, Some(seed), Some(events));
                    info!("{name} rep {rep}: {:?}", outcome.metrics.failure);
                    metrics_list.push(outcome.metrics);
                }
            }
            Err(e) => {
                let m = Metrics {
                    scenario: name.clone(),
                    failure: Some(e.name().into()),
                    failure_detail: Some(e.to_string()),
                    ..Metrics::default()
                };
                metrics_list = vec![m; reps];
            }
        }
        let collect = |f: &dyn Fn(&Metrics) -> Option<f64>| Stats::of(&metrics_list.iter().filter_map(f).collect::<Vec<_>>());
        let mut failure_kinds = BTreeMap::new();
        for m in &metrics_list {
            if let Some(kind) = &m.failure {
                *failure_kinds.entry(kind.clone()).or_insert(0) += 1;
            }
        }
        scenarios.push(ScenarioSummary {
            name: name.clone(),
            file: file_str.clone(),
            runs: metrics_list.len(),
            failures: metrics_list.iter().filter(|m| !m.success).count(),
            failure_kinds,
            expect_failure,
            path_length: collect(&|m| m.path_length),
            orientation_length_deg: collect(&|m| m.orientation_length_deg),
            num_sets: collect(&|m| (!m.set_sequence.is_empty()).then_some(m.set_sequence.len() as f64)),
            trajectory_duration: collect(&|m| m.trajectory_duration),
            replans: metrics_list.iter().filter_map(|m| m.replans).sum(),
            collisions: metrics_list.iter().filter_map(|m| m.collisions).sum(),
            degraded: metrics_list.iter().filter_map(|m| m.degraded).sum(),
        });
        let replan_times: Vec<f64> = metrics_list.iter().flat_map(|m| m.timing.replan_times.clone()).collect();
        timing.push(TimingSummary {
            name: name.clone(),
            plan_time: collect(&|m| m.timing.plan_time),
            replan_time: Stats::of(&replan_times),
        });
        for (rep, metrics) in metrics_list.into_iter().enumerate() {
            runs.push(BenchRun {
                file: file_str.clone(),
                rep,
                metrics,
            });
        }
    }
    let report = BenchReport {
        reps,
        scenarios,
        timing,
        runs,
    };
    if let Some(dir) = out {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("bench.json"), pretty(report))?;
    fs::write(dir.join("bench_timing.json"), pretty(&report.timing))?;
    for run in &report.runs {
        let run_dir = dir.join("runs").join(stem(Path::new(&run.file))).join(format!("rep_{:03}", run.rep));
        fs::create_dir_all(&run_dir)?;
        fs::write(run_dir.join("metrics.json"), canonical_metrics(&run.metrics) + "\n")?;
        fs::write(run_dir.join("timing.json"), pretty(&run.metrics.timing))?;
    }
    Ok(())
}

fn triple(s: &Option<Stats>, digits: usize) -> String {
    match s {
        Some(s) => format!("{:.d$}/{:.d$}/{:.d$}", s.min, s.avg, s.max, d = digits),
        None => "-".into(),
    }
}

/// Human-readable table, one row per scenario, min/avg/max per column.
pub fn format_table(report: &BenchReport) -> String {
    let header = [
        "scenario",
        "runs",
        "fail",
        "t_plan s",
        "t_replan s",
        "l_p m",
        "l_o deg",
        "T_traj s",
        "coll",
    ];
    let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for (s, t) in report.scenarios.iter().zip(&report.timing) {
        let fail = match &s.expect_failure {
            Some(_) => format!("{} (exp)", s.failures),
            None => s.failures.to_string(),
        };
        rows.push(vec![
            s.name.clone(),
            s.runs.to_string(),
            fail,
            triple(&t.plan_time, 3),
            triple(&t.replan_time, 3),
            triple(&s.path_length, 3),
            triple(&s.orientation_length_deg, 1),
            triple(&s.trajectory_duration, 2),
            s.collisions.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (k, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if k == 0 {
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_stats_are_degenerate() {
        let s = Stats::of(&[0.25]).unwrap();
        assert_eq!((s.min, s.avg, s.max, s.n), (0.25, 0.25, 0.25, 1));
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn unexpected_failures_respect_declared_kind() {
        let mut s = ScenarioSummary {
            name: "t".into(),
            file: "t.json".into(),
            runs: 3,
            failures: 3,
            failure_kinds: BTreeMap::from([("PathInfeasible".to_string(), 3)]),
            expect_failure: Some("PathInfeasible".into()),
            path_length: None,
            orientation_length_deg: None,
            num_sets: None,
            trajectory_duration: None,
            replans: 0,
            collisions: 0,
            degraded: 0,
        };
        assert_eq!(s.unexpected_failures(), 0);
        s.expect_failure = None;
        assert_eq!(s.unexpected_failures(), 3);
    }
}
