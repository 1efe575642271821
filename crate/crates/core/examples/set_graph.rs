//! Builds a set graph from a chain of overlapping boxes and searches it.

use boundplan::geometry::{Aabb, Vec3};
use boundplan::graph::{CostParams, SetGraph};
use boundplan::inflation::mvie;

fn main() -> boundplan::error::Result<()> {
    let boxes = [
        ([0.0, 0.0, 0.0], [0.4, 0.4, 0.4]),
        ([0.3, 0.0, 0.0], [0.8, 0.3, 0.3]),
        ([0.3, 0.2, 0.0], [0.6, 0.9, 0.6]),
        ([0.7, 0.0, 0.0], [1.0, 1.0, 0.2]),
        ([0.5, 0.7, 0.0], [1.0, 1.0, 0.5]),
    ];
    let poly = |(lo, hi): ([f64; 3], [f64; 3])| Aabb::new(Vec3::from(lo), Vec3::from(hi)).map(|b| b.to_polytope());
    let any_fit = |_: &_| true;

    let mut graph = SetGraph::new(CostParams::default());
    let s0 = poly(boxes[0])?;
    graph.add_start_set(s0.clone(), mvie(&s0)?, Vec3::repeat(0.1), &any_fit);
    let sf = poly(boxes[4])?;
    graph.add_final_set(sf.clone(), mvie(&sf)?, Vec3::new(0.9, 0.9, 0.3), &any_fit);
    for b in &boxes[1..4] {
        let p = poly(*b)?;
        let connected = graph.add_set(p.clone(), mvie(&p)?, &any_fit);
        println!("added set {}, connected: {connected}", graph.sets.len() - 1);
    }

    let path = graph.shortest_set_path()?;
    println!("set sequence {:?}, cost {:.4}", path.sets, path.cost);
    for &v in &path.vertices {
        let p = graph.vertices[v].point;
        println!("  via intersection {:?} at {:.3?}", graph.vertices[v].sets, p.as_slice());
    }
    Ok(())
}
