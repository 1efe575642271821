mod common;

use boundplan::geometry::{closest_points, Geodesic, Rotation, Vec3};
use boundplan::graph::project_to_vertex;
use common::{random_rotation, Obb};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3(lo: f64, hi: f64) -> impl Strategy<Value = Vec3> {
    (lo..hi, lo..hi, lo..hi).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn obb() -> impl Strategy<Value = Obb> {
    (vec3(0.2, 0.8), vec3(0.02, 0.15), any::<u64>()).prop_map(|(center, half, seed)| Obb {
        center,
        rot: random_rotation(&mut ChaCha8Rng::seed_from_u64(seed)),
        half,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closest_points_are_symmetric_and_witnessed(a in obb(), b in obb()) {
        let ab = closest_points(&a.body(), &b.body());
        let ba = closest_points(&b.body(), &a.body());
        prop_assert!((ab.distance - ba.distance).abs() <= 1e-9);
        prop_assert!(((ab.on_a - ab.on_b).norm() - ab.distance).abs() <= 1e-9);
        prop_assert!(a.contains(&ab.on_a, 1e-7) && b.contains(&ab.on_b, 1e-7));
        // No vertex pair or vertex-to-box distance beats the reported minimum.
        for v in a.vertices() {
            prop_assert!(b.distance_to(&v) >= ab.distance - 1e-9);
        }
    }

    #[test]
    fn projection_satisfies_the_variational_inequality(a in obb(), target in vec3(-0.5, 1.5)) {
        let p = project_to_vertex(&target, &a.polytope()).unwrap();
        prop_assert!(a.contains(&p, 1e-7));
        // (target − p) · (v − p) ≤ 0 for every point v of the box; checking
        // the vertices suffices.
        let scale = (target - p).norm().max(1.0);
        for v in a.vertices() {
            prop_assert!((target - p).dot(&(v - p)) <= 1e-7 * scale);
        }
        prop_assert!((project_to_vertex(&p, &a.polytope()).unwrap() - p).norm() <= 1e-7);
    }

    #[test]
    fn shrunken_copy_intersects_and_far_copy_does_not(a in obb(), shift in vec3(-1.0, 1.0)) {
        let mut near = a.clone();
        near.center += 0.5 * a.half.min() * shift.normalize();
        let em = a.polytope().intersect(&near.polytope()).is_empty();
        prop_assert!(!em.is_empty());
        let mut far = a.clone();
        far.center += (2.0 * a.half.norm() + 0.01) * shift.normalize();
        prop_assert!(a.polytope().intersect(&far.polytope()).is_empty().is_empty());
    }

    #[test]
    fn geodesic_reaches_the_goal_rotation(s0 in any::<u64>(), s1 in any::<u64>()) {
        let r0 = random_rotation(&mut ChaCha8Rng::seed_from_u64(s0));
        let rf = random_rotation(&mut ChaCha8Rng::seed_from_u64(s1));
        let g = Geodesic::between(&r0, &rf);
        prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&g.theta));
        prop_assert!(g.at(&r0, g.theta).distance(&rf) <= 1e-7);
        prop_assert!((rf.compose(&r0.transpose()).angle() - g.theta).abs() <= 1e-7);
    }

    #[test]
    fn quaternion_round_trip(seed in any::<u64>()) {
        let r = random_rotation(&mut ChaCha8Rng::seed_from_u64(seed));
        let [w, x, y, z] = r.to_quaternion();
        let back = Rotation::from_quaternion(w, x, y, z).unwrap();
        prop_assert!(back.distance(&r) <= 1e-9);
    }
}
