mod common;

use boundplan::geometry::{Aabb, Vec3};
use boundplan::graph::{CostParams, SetGraph};
use boundplan::inflation::mvie;
use common::{brute_force_cost, random_in};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(seed: u64) -> SetGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let boxes: Vec<Aabb> = (0..n)
        .map(|_| {
            let c = random_in(&mut rng, Vec3::repeat(0.15), Vec3::repeat(0.85));
            let h = random_in(&mut rng, Vec3::repeat(0.08), Vec3::repeat(0.25));
            Aabb::new(c - h, c + h).unwrap()
        })
        .collect();
    let params = CostParams {
        c_bias: rng.gen_range(0.01..0.5),
        w_size: rng.gen_range(0.1..1.0),
    };
    let mut g = SetGraph::new(params);
    let fit = |_: &_| true;
    let add = |g: &mut SetGraph, k: usize| {
        let p = boxes[k].to_polytope();
        let e = mvie(&p).unwrap();
        match k {
            0 => g.add_start_set(p, e, boxes[0].center(), &fit),
            1 => g.add_final_set(p, e, boxes[1].center(), &fit),
            _ => g.add_set(p, e, &fit),
        }
    };
    for k in 0..n {
        add(&mut g, k);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn dijkstra_matches_enumeration(seed in any::<u64>()) {
        let g = random_graph(seed);
        let found = g.shortest_set_path().ok().map(|p| p.cost);
        prop_assert_eq!(found, brute_force_cost(&g));
        prop_assert_eq!(found.is_some(), g.connected());
    }

    #[test]
    fn set_sequences_chain_overlapping_sets(seed in any::<u64>()) {
        let g = random_graph(seed);
        let Ok(path) = g.shortest_set_path() else { return Ok(()) };
        prop_assert_eq!(path.sets.first().copied(), g.start);
        prop_assert_eq!(path.sets.last().copied(), g.final_set);
        prop_assert_eq!(path.vertices.len() + 1, path.sets.len());
        for (k, w) in path.sets.windows(2).enumerate() {
            let v = &g.vertices[path.vertices[k]];
            prop_assert!(v.other(w[0]) == Some(w[1]));
            let inter = g.sets[w[0]].polytope.intersect(&g.sets[w[1]].polytope);
            prop_assert!(inter.contains(&v.point, 1e-7));
        }
    }
}
