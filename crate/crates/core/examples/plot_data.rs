//! Writes plot-ready polylines and polytope faces for a planned scenario.

use std::path::Path;

use boundplan::geometry::{Aabb, Vec3};
use boundplan::scenario::{emit_plot_data, polytope_faces, run_plan, ScenarioFile};

fn main() -> boundplan::error::Result<()> {
    let cube = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0))?.to_polytope();
    for f in polytope_faces(&cube) {
        println!("face of row {}: {} vertices", f.row, f.vertices.len());
    }

    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/open_box.json");
    let sc = ScenarioFile::load(&file)?;
    let dir = std::env::temp_dir().join("boundplan_plot_data");
    run_plan(&sc, None, false).write(&dir, false)?;
    for f in emit_plot_data(&dir)? {
        println!("{}", f.display());
    }
    Ok(())
}
