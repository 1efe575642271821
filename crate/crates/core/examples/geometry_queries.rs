//! Basic convex queries: emptiness, closest points, projection and the
//! constant-axis rotation between two orientations.

use boundplan::geometry::{closest_points, Aabb, ConvexBody, Geodesic, Rotation, Vec3};
use boundplan::graph::project_to_vertex;

fn main() -> boundplan::error::Result<()> {
    let a = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0))?.to_polytope();
    let b = Aabb::new(Vec3::new(0.8, 0.8, 0.8), Vec3::new(2.0, 2.0, 2.0))?.to_polytope();
    let overlap = a.intersect(&b).is_empty();
    println!(
        "overlap empty: {}, Chebyshev radius {:.3}",
        overlap.is_empty(),
        overlap.radius()
    );
    let apart = a.intersect(&Aabb::new(Vec3::repeat(1.5), Vec3::repeat(2.0))?.to_polytope());
    println!("disjoint boxes empty: {}", apart.is_empty().is_empty());

    let tetra = ConvexBody::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()])?;
    let point = ConvexBody::point(Vec3::repeat(1.0));
    let cp = closest_points(&tetra, &point);
    println!(
        "tetrahedron to (1,1,1): distance {:.6} at ({:.4}, {:.4}, {:.4})",
        cp.distance, cp.on_a.x, cp.on_a.y, cp.on_a.z
    );

    let target = Vec3::new(2.0, 0.5, -1.0);
    let p = project_to_vertex(&target, &a)?;
    println!("projection of {:?} onto the unit cube: {:.6?}", target.as_slice(), p.as_slice());

    let r0 = Rotation::identity();
    let rf = Rotation::exp(&Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2)?;
    let g = Geodesic::between(&r0, &rf);
    println!(
        "geodesic: axis {:?}, angle {:.4} rad, halfway rotates x to {:.4?}",
        g.omega.as_slice(),
        g.theta,
        g.at(&r0, 0.5 * g.theta).apply(&Vec3::x()).as_slice()
    );
    Ok(())
}
