use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boundplan::error::Error;
use boundplan::planner::ReferencePath;
use boundplan::scenario::{bench, emit_plot_data, format_table, run_plan, run_track, ScenarioFile};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boundplan", version, about = "Convex-set path planning and tunnel-following tracking")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a reference path and write path, sets and metrics.
    Plan {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the set graph.
        #[arg(long)]
        dump_graph: bool,
        /// Split the rotation in proportion to segment length instead of
        /// optimizing it.
        #[arg(long)]
        position_only: bool,
    },
    /// Simulate closed-loop tracking, planning first unless --path is given.
    Track {
        scenario: PathBuf,
        /// A path.json written by `plan`.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plan and track every matching scenario and aggregate the metrics.
    Bench {
        glob: String,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write polylines and face lists for an artifact directory.
    Plot { dir: PathBuf },
}

fn load_path(file: &Path) -> Result<ReferencePath, Error> {
    let text = std::fs::read_to_string(file)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", file.display())))
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.cmd {
        Command::Plan {
            scenario,
            out,
            seed,
            dump_graph,
            position_only,
        } => {
            let sc = ScenarioFile::load(&scenario)?;
            let outcome = run_plan(&sc, seed, position_only);
            outcome.write(&out, dump_graph)?;
            let m = &outcome.metrics;
            match &m.failure_detail {
                Some(detail) => eprintln!("plan failed: {detail}"),
                None => println!(
                    "planned {} sets, {:.4} m, {:.2} deg in {:.3} s",
                    m.set_sequence.len(),
                    m.path_length.unwrap_or(0.0),
                    m.orientation_length_deg.unwrap_or(0.0),
                    m.timing.plan_time.unwrap_or(0.0)
                ),
            }
            Ok(m.exit_code())
        }
        Command::Track { scenario, path, out, seed } => {
            let sc = ScenarioFile::load(&scenario)?;
            let path = path.as_deref().map(load_path).transpose()?;
            let outcome = run_track(&sc, path, seed, None);
            outcome.write(&out)?;
            let m = &outcome.metrics;
            if let Some(kind) = &m.failure {
                eprintln!("track failed: {}", m.failure_detail.as_deref().unwrap_or(kind));
            }
            if let Some(t) = m.trajectory_duration {
                println!(
                    "T_traj {t:.2} s, {} steps, {} replans, {} collisions, {} degraded",
                    m.steps.unwrap_or(0),
                    m.replans.unwrap_or(0),
                    m.collisions.unwrap_or(0),
                    m.degraded.unwrap_or(0)
                );
            }
            Ok(m.exit_code())
        }
        Command::Bench { glob, reps, out } => {
            let files: Vec<PathBuf> = glob::glob(&glob)
                .map_err(|e| Error::InvalidInput(format!("bad glob: {e}")))?
                .filter_map(|p| p.ok())
                .collect();
            if files.is_empty() {
                return Err(Error::InvalidInput(format!("no scenario matches `{glob}`")));
            }
            if reps == 0 {
                return Err(Error::InvalidInput("--reps must be positive".into()));
            }
            let report = bench(&files, reps, out.as_deref())?;
            print!("{}", format_table(&report));
            Ok(0)
        }
        Command::Plot { dir } => {
            for f in emit_plot_data(&dir)? {
                println!("{}", f.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BOUNDPLAN_LOG", "off")).init();
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
