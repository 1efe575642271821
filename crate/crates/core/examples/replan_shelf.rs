//! Runs the bundled shelf scenario, where the goal moves twice mid-motion.

use std::path::Path;

use boundplan::scenario::{run_track, ScenarioFile};

fn main() -> boundplan::error::Result<()> {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/shelf.json");
    let sc = ScenarioFile::load(&file)?;
    let out = run_track(&sc, None, None, None);
    let Some(log) = out.log else {
        eprintln!("failed: {:?}", out.metrics.failure_detail);
        std::process::exit(out.metrics.exit_code());
    };
    for r in &log.replans {
        println!(
            "replan at t = {:.2} s: {} sets, planned in {:.3} s, from {:.3?}",
            r.time,
            r.set_ids.len(),
            r.plan_time,
            r.p_horizon_1.as_slice()
        );
    }
    println!(
        "{} steps, {} collisions, final position {:.4?}",
        log.steps.len(),
        log.collisions,
        log.final_position.as_slice()
    );
    Ok(())
}
