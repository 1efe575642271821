//! Grows a collision-free polytope around a seed point between two boxes,
//! then builds the free polytope around a small point cloud.

use boundplan::geometry::{Aabb, ConvexBody, Vec3};
use boundplan::inflation::{inflate, mvie, set_convex_hull, InflationConfig, InflationMode, Workspace};

fn main() -> boundplan::error::Result<()> {
    let domain = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0))?;
    let obstacles = vec![
        ConvexBody::cuboid(Vec3::new(0.3, 0.0, 0.0), Vec3::new(0.5, 0.4, 1.0)),
        ConvexBody::cuboid(Vec3::new(0.3, 0.6, 0.0), Vec3::new(0.5, 1.0, 1.0)),
    ];
    let ws = Workspace::new(domain, obstacles);
    let cfg = InflationConfig {
        obstacle_margin: 0.01,
        ..InflationConfig::default()
    };

    let inf = inflate(&Vec3::new(0.15, 0.5, 0.5), &ws, InflationMode::Mvie, &cfg)?;
    let axes = inf.ellipsoid.semi_axes();
    println!("{} iterations, {} rows", inf.iterations, inf.polytope.num_rows());
    println!("semi-axes {:.3} {:.3} {:.3}", axes.x, axes.y, axes.z);
    println!("log det history {:?}", inf.log_det_history);

    // The gap between the boxes is a valid seed too; its set is a thin slab.
    let gap = inflate(&Vec3::new(0.4, 0.5, 0.5), &ws, InflationMode::FixedMid, &cfg)?;
    println!("gap set center {:?}", gap.ellipsoid.center().as_slice());

    let cloud = ConvexBody::new(vec![Vec3::new(0.7, 0.4, 0.4), Vec3::new(0.8, 0.6, 0.5), Vec3::new(0.75, 0.5, 0.7)])?;
    let hull_set = set_convex_hull(&cloud, &ws, cfg.obstacle_margin)?;
    let e = mvie(&hull_set)?;
    println!(
        "hull set: {} rows, inscribed volume factor {:.4}",
        hull_set.num_rows(),
        e.determinant()
    );
    Ok(())
}
