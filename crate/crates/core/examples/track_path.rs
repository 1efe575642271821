//! Plans in an empty room and follows the path with the horizon controller.

use boundplan::geometry::{Aabb, Rotation, Vec3};
use boundplan::inflation::Workspace;
use boundplan::planner::{plan, EndEffectorModel, PlanRequest};
use boundplan::tracker::{simulate, Tracker, TrackerConfig};

fn main() -> boundplan::error::Result<()> {
    let ws = Workspace::new(Aabb::new(Vec3::zeros(), Vec3::repeat(1.0))?, Vec::new());
    let req = PlanRequest::new(
        Vec3::new(0.2, 0.2, 0.2),
        Rotation::identity(),
        Vec3::new(0.8, 0.7, 0.6),
        Rotation::exp(&Vec3::y(), 0.5)?,
        ws.clone(),
        EndEffectorModel::cuboid(Vec3::repeat(0.02)),
    );
    let path = plan(&req)?.path;

    let cfg = TrackerConfig::default();
    let mut tracker = Tracker::new(path, ws, cfg, Vec::new())?;
    let log = simulate(&mut tracker, &[], &req)?;
    for s in log.steps.iter().step_by(10) {
        println!(
            "t {:5.2}  p {:.3?}  |v| {:.3}  set {}  split {}",
            s.time,
            s.position.as_slice(),
            s.velocity.norm(),
            s.active_set,
            s.split_index
        );
    }
    println!(
        "reached {} after {:.2} s, final error {:.2e} m",
        log.reached,
        log.duration,
        (log.final_position - req.pf).norm()
    );
    Ok(())
}
