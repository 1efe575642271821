mod common;

use boundplan::geometry::Vec3;
use boundplan::planner::{plan, EndEffectorModel, PlanRequest};
use boundplan::tracker::{simulate, split_index, CollisionPoint, StepStatus, Tracker, TrackerConfig, TrackerState};
use common::{free_point, random_boxes, random_rotation, workspace_of};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random scene with a planned path, or `None` when the draw is unusable.
fn tracker_for(seed: u64) -> Option<(Tracker, PlanRequest)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes = random_boxes(&mut rng, 4, (0.03, 0.1));
    let p0 = free_point(&mut rng, &boxes, 0.08)?;
    let pf = free_point(&mut rng, &boxes, 0.08)?;
    let ws = workspace_of(&boxes);
    let mut req = PlanRequest::new(
        p0,
        random_rotation(&mut rng),
        pf,
        random_rotation(&mut rng),
        ws.clone(),
        EndEffectorModel::cuboid(Vec3::repeat(0.015)),
    );
    req.rng_seed = seed;
    let path = plan(&req).ok()?.path;
    let points = vec![CollisionPoint {
        offset: Vec3::new(0.0, 0.0, 0.03),
        margin: 0.005,
    }];
    Some((Tracker::new(path, ws, TrackerConfig::default(), points).ok()?, req))
}

#[test]
fn closed_loop_runs_respect_limits_and_sets() {
    let mut runs = 0;
    for seed in 0..12 {
        let Some((mut tracker, req)) = tracker_for(seed) else { continue };
        let cfg = tracker.cfg;
        let log = simulate(&mut tracker, &[], &req).expect("simulation");
        runs += 1;
        assert!(log.reached, "seed {seed}: goal not reached");
        assert!((log.final_position - req.pf).norm() <= 1e-3);
        assert_eq!(log.collisions, 0, "seed {seed}");
        let mut phi = 0.0;
        let mut prev_v = Vec3::zeros();
        for s in &log.steps {
            assert!(s.tunnel_violation <= 1e-6, "seed {seed} t {}: {}", s.time, s.tunnel_violation);
            assert!(s.phi >= phi, "seed {seed}: progress went back");
            phi = s.phi;
            if s.status == StepStatus::Optimal {
                assert!(s.velocity.amax() <= cfg.v_max + 1e-6);
                assert!(s.acceleration.amax() <= cfg.a_max + 1e-6);
            }
            assert!((s.velocity - prev_v).amax() <= cfg.a_max * cfg.dt + 1e-6);
            prev_v = s.velocity;
        }
    }
    assert!(runs >= 6, "only {runs} usable scenes");
}

#[test]
fn split_never_moves_later_within_a_segment() {
    for seed in 0..6 {
        let Some((mut tracker, _)) = tracker_for(seed) else { continue };
        let mut last: Option<(usize, usize)> = None;
        while !tracker.arrived() && tracker.state.time < 30.0 {
            let r = tracker.step().expect("step");
            if let Some((seg, m)) = last {
                if seg == r.active_segment && m < tracker.cfg.horizon_steps {
                    assert!(r.split_index <= m, "seed {seed}: split {m} -> {}", r.split_index);
                }
            }
            last = Some((r.active_segment, r.split_index));
        }
    }
}

#[test]
fn split_index_agrees_with_a_membership_scan() {
    let Some((mut tracker, _)) = (0..12).find_map(tracker_for) else { panic!("no usable scene") };
    let eps = tracker.cfg.eps_phi;
    for _ in 0..200 {
        if tracker.arrived() {
            break;
        }
        tracker.step().expect("step");
        let (st, path) = (&tracker.state, &tracker.path);
        let i = st.active_segment;
        let expected = if i + 1 >= path.num_segments() {
            st.horizon.len()
        } else {
            (0..st.horizon.len())
                .find(|&m| {
                    let r = path.orientation(st.horizon_phi[m]);
                    st.horizon_phi[m] > path.knots[i + 1] - eps
                        && path.hull_points_at(&st.horizon[m], &r).iter().all(|x| {
                            path.sets[i].max_violation(x) <= 0.0 && path.sets[i + 1].max_violation(x) <= 0.0
                        })
                })
                .unwrap_or(st.horizon.len())
        };
        assert_eq!(split_index(st, path, i, eps), expected);
    }
}

#[test]
fn state_survives_serialization_mid_run() {
    let Some((mut tracker, _)) = (0..12).find_map(tracker_for) else { panic!("no usable scene") };
    for _ in 0..15 {
        tracker.step().expect("step");
    }
    let text = serde_json::to_string(&tracker.state).unwrap();
    let back: TrackerState = serde_json::from_str(&text).unwrap();
    assert_eq!(back, tracker.state);
    assert_eq!(back.horizon[0], back.position);
}
