//! Plans a reference path for a box-shaped end-effector through a gap in a
//! wall while turning it by 90 degrees, and checks containment.

use boundplan::geometry::{Aabb, ConvexBody, Rotation, Vec3};
use boundplan::inflation::Workspace;
use boundplan::planner::{plan, EndEffectorModel, PlanRequest};

fn main() -> boundplan::error::Result<()> {
    let domain = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0))?;
    // Wall at x = 0.5 with a square window around (0.5, 0.5, 0.5).
    let obstacles = vec![
        ConvexBody::cuboid(Vec3::new(0.48, 0.0, 0.0), Vec3::new(0.52, 0.38, 1.0)),
        ConvexBody::cuboid(Vec3::new(0.48, 0.62, 0.0), Vec3::new(0.52, 1.0, 1.0)),
        ConvexBody::cuboid(Vec3::new(0.48, 0.38, 0.0), Vec3::new(0.52, 0.62, 0.38)),
        ConvexBody::cuboid(Vec3::new(0.48, 0.38, 0.62), Vec3::new(0.52, 0.62, 1.0)),
    ];
    let ws = Workspace::new(domain, obstacles);
    let ee = EndEffectorModel::cuboid(Vec3::new(0.04, 0.02, 0.02));
    let rf = Rotation::exp(&Vec3::z(), std::f64::consts::FRAC_PI_2)?;
    let mut req = PlanRequest::new(Vec3::new(0.15, 0.3, 0.3), Rotation::identity(), Vec3::new(0.85, 0.7, 0.6), rf, ws, ee);
    req.rng_seed = 3;

    let plan = plan(&req)?;
    let path = &plan.path;
    println!(
        "{} sets after {} inflations in {:.3} s",
        path.sets.len(),
        plan.stats.inflations,
        plan.stats.plan_time
    );
    for (i, p) in path.via_points.iter().enumerate() {
        println!("  via {i}: {:.4?}", p.as_slice());
    }
    let turn: Vec<f64> = path.alphas.iter().map(|a| a.to_degrees()).collect();
    println!("rotation per segment (deg): {turn:.2?}");
    println!("length {:.4} m", path.length());
    let (worst, _) = path.exact_violation();
    let (sampled, _) = path.sampled_violation(1000);
    println!("containment: exact {worst:.2e}, sampled {sampled:.2e} (negative is inside)");
    Ok(())
}
