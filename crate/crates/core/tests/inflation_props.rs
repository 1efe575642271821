mod common;

use boundplan::error::Error;
use boundplan::geometry::{ConvexBody, Vec3};
use boundplan::inflation::{inflate, set_convex_hull, InflationConfig, InflationMode};
use common::{free_point, random_boxes, random_in, workspace_of};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inflated_sets_hold_seed_and_ellipsoid_and_exclude_obstacles(seed in any::<u64>(), fixed in any::<bool>(), margin in 0.0..0.02f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boxes = random_boxes(&mut rng, 8, (0.03, 0.15));
        let ws = workspace_of(&boxes);
        let Some(p) = free_point(&mut rng, &boxes, margin + 1e-3) else { return Ok(()) };
        let cfg = InflationConfig { obstacle_margin: margin, ..InflationConfig::default() };
        let mode = if fixed { InflationMode::FixedMid } else { InflationMode::Mvie };
        let inf = inflate(&p, &ws, mode, &cfg).unwrap();
        prop_assert!(inf.ellipsoid.containment_residual(&inf.polytope) <= 1e-6);
        prop_assert!(inf.log_det_history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        if fixed {
            prop_assert!((inf.ellipsoid.center() - p).norm() <= 1e-9);
            prop_assert!(inf.polytope.contains(&p, 1e-9));
        }
        for b in &boxes {
            let corners = b.corners();
            let separated = inf.polytope.rows().iter().any(|h| corners.iter().all(|v| h.normal.dot(v) >= h.offset + margin - 1e-9));
            prop_assert!(separated);
        }
        prop_assert!(inf.polytope.is_bounded());
        prop_assert!(ws.domain.contains(&inf.ellipsoid.center(), 1e-9));
    }

    #[test]
    fn hull_sets_contain_their_points(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boxes = random_boxes(&mut rng, 8, (0.03, 0.15));
        let ws = workspace_of(&boxes);
        let Some(c) = free_point(&mut rng, &boxes, 0.05) else { return Ok(()) };
        let pts: Vec<Vec3> = (0..5).map(|_| c + random_in(&mut rng, Vec3::repeat(-0.04), Vec3::repeat(0.04))).collect();
        match set_convex_hull(&ConvexBody::new(pts.clone()).unwrap(), &ws, 0.0) {
            Ok(set) => {
                for p in &pts {
                    prop_assert!(set.contains(p, 1e-9));
                }
            }
            Err(Error::HullInCollision { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

fn excludes_all(set: &boundplan::geometry::ConvexPolytope, boxes: &[boundplan::geometry::Aabb], margin: f64) -> bool {
    boxes.iter().all(|b| {
        let corners = b.corners();
        set.rows().iter().any(|h| corners.iter().all(|v| h.normal.dot(v) >= h.offset + margin - 1e-9))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn obstacle_order_never_breaks_exclusion(seed in any::<u64>(), rot in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut boxes = random_boxes(&mut rng, 8, (0.03, 0.15));
        let Some(p) = free_point(&mut rng, &boxes, 0.01) else { return Ok(()) };
        let k = rot % boxes.len();
        boxes.rotate_left(k);
        boxes.reverse();
        let ws = workspace_of(&boxes);
        let inf = inflate(&p, &ws, InflationMode::Mvie, &InflationConfig::default()).unwrap();
        prop_assert!(excludes_all(&inf.polytope, &boxes, 0.0));
        let hull = set_convex_hull(&ConvexBody::point(p), &ws, 0.0).unwrap();
        prop_assert!(excludes_all(&hull, &boxes, 0.0));
    }

    #[test]
    fn larger_margin_never_enlarges_hull_sets(seed in any::<u64>(), m1 in 0.0..0.02f64, extra in 0.0..0.02f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boxes = random_boxes(&mut rng, 8, (0.03, 0.15));
        let ws = workspace_of(&boxes);
        let Some(c) = free_point(&mut rng, &boxes, 0.05) else { return Ok(()) };
        let body = ConvexBody::point(c);
        let small = set_convex_hull(&body, &ws, m1 + extra).unwrap();
        let large = set_convex_hull(&body, &ws, m1).unwrap();
        for _ in 0..500 {
            let x = random_in(&mut rng, Vec3::zeros(), Vec3::repeat(1.0));
            if small.contains(&x, 0.0) {
                prop_assert!(large.contains(&x, 1e-9));
            }
        }
    }
}
