//! Loads a scenario, writes plan and tracking artifacts to a temporary
//! directory, and reads the trajectory back.

use std::path::Path;

use boundplan::scenario::{read_trajectory_csv, run_track, ScenarioFile};

fn main() -> boundplan::error::Result<()> {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/corridor.json");
    let sc = ScenarioFile::load(&file)?;
    println!("{}: {} obstacles, schema {}", sc.name, sc.obstacles.len(), sc.schema_version);

    // Serialization is a fixed point.
    let again = ScenarioFile::from_json(&sc.to_json())?;
    assert_eq!(again, sc);

    // Errors name the offending field.
    let mut value: serde_json::Value = serde_json::from_str(&sc.to_json()).expect("valid json");
    value["start"]["orientation"] = serde_json::json!([2.0, 0.0, 0.0, 0.0]);
    if let Err(e) = ScenarioFile::from_json(&value.to_string()) {
        println!("rejected edit: {e}");
    }
    value["start"]["orientation"] = serde_json::json!("up");
    if let Err(e) = ScenarioFile::from_json(&value.to_string()) {
        println!("rejected edit: {e}");
    }

    let dir = std::env::temp_dir().join("boundplan_scenario_io");
    let out = run_track(&sc, None, None, None);
    out.write(&dir)?;
    let steps = read_trajectory_csv(&std::fs::read_to_string(dir.join("trajectory.csv"))?)?;
    println!("wrote {} with {} trajectory rows", dir.display(), steps.len());
    println!("{}", std::fs::read_to_string(dir.join("metrics.json"))?);
    Ok(())
}
