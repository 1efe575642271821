//! Graph whose vertices are non-empty pairwise intersections of free-space
//! sets and whose edges connect intersections sharing a parent set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolytope, Ellipsoid, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub c_bias: f64,
    pub w_size: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c_bias: 0.1,
            w_size: 0.5,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_bias > 0.0) {
            return Err(Error::InvalidInput("c_bias must be positive".into()));
        }
        if !(self.w_size > 0.0 && self.w_size <= 1.0) {
            return Err(Error::InvalidInput("w_size must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// `1 + w_size · tanh(½ − det(C)^{1/3})`: below one for large sets.
pub fn size_cost(e: &Ellipsoid, params: &CostParams) -> f64 {
    1.0 + params.w_size * (0.5 - e.determinant().cbrt()).tanh()
}

pub fn edge_cost(p_ab: &Vec3, p_bc: &Vec3, shared: &Ellipsoid, params: &CostParams) -> f64 {
    size_cost(shared, params) * (p_ab - p_bc).norm() + params.c_bias
}

/// Euclidean projection onto a vertex polytope.
pub fn project_to_vertex(target: &Vec3, poly: &ConvexPolytope) -> Result<Vec3> {
    poly.project(target)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetRole {
    Start,
    Final,
    Explored,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphSet {
    pub polytope: ConvexPolytope,
    pub ellipsoid: Ellipsoid,
    pub role: SetRole,
    /// Representative point projected onto new intersections.
    pub anchor: Option<Vec3>,
    pub size_cost: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntersectionVertex {
    /// Parent set ids, smaller first.
    pub sets: (usize, usize),
    pub polytope: ConvexPolytope,
    pub point: Vec3,
}

impl IntersectionVertex {
    pub fn other(&self, set: usize) -> Option<usize> {
        if self.sets.0 == set {
            Some(self.sets.1)
        } else if self.sets.1 == set {
            Some(self.sets.0)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub shared: usize,
    pub cost: f64,
}

/// Result of a shortest-path query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetPath {
    pub sets: Vec<usize>,
    /// Intersection vertices visited, one per set transition.
    pub vertices: Vec<usize>,
    pub cost: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetGraph {
    pub params: CostParams,
    pub sets: Vec<GraphSet>,
    pub vertices: Vec<IntersectionVertex>,
    pub edges: Vec<Edge>,
    pub start: Option<usize>,
    #[serde(rename = "final")]
    pub final_set: Option<usize>,
    /// Intersections with a smaller Chebyshev radius are not admitted.
    pub min_vertex_radius: f64,
}

impl SetGraph {
    pub fn new(params: CostParams) -> Self {
        Self {
            params,
            sets: Vec::new(),
            vertices: Vec::new(),
            edges: Vec::new(),
            start: None,
            final_set: None,
            min_vertex_radius: 1e-6,
        }
    }

    pub fn vertex_id(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.vertices.iter().position(|v| v.sets == key)
    }

    pub fn add_start_set(
        &mut self,
        poly: ConvexPolytope,
        e: Ellipsoid,
        p0: Vec3,
        fit: &dyn Fn(&ConvexPolytope) -> bool,
    ) -> bool {
        let id = self.push_set(poly, e, SetRole::Start, Some(p0));
        self.start = Some(id);
        self.link(id, fit);
        self.connected()
    }

    pub fn add_final_set(
        &mut self,
        poly: ConvexPolytope,
        e: Ellipsoid,
        pf: Vec3,
        fit: &dyn Fn(&ConvexPolytope) -> bool,
    ) -> bool {
        let id = self.push_set(poly, e, SetRole::Final, Some(pf));
        self.final_set = Some(id);
        self.link(id, fit);
        self.connected()
    }

    /// Adds an explored set, creating vertices for every admissible
    /// intersection, and reports whether start and final are now connected.
    pub fn add_set(&mut self, poly: ConvexPolytope, e: Ellipsoid, fit: &dyn Fn(&ConvexPolytope) -> bool) -> bool {
        let id = self.push_set(poly, e, SetRole::Explored, None);
        self.link(id, fit);
        self.connected()
    }

    fn push_set(&mut self, polytope: ConvexPolytope, ellipsoid: Ellipsoid, role: SetRole, anchor: Option<Vec3>) -> usize {
        let size_cost = size_cost(&ellipsoid, &self.params);
        self.sets.push(GraphSet {
            polytope,
            ellipsoid,
            role,
            anchor,
            size_cost,
        });
        self.sets.len() - 1
    }

    fn link(&mut self, a: usize, fit: &dyn Fn(&ConvexPolytope) -> bool) {
        let mut found: Vec<(usize, ConvexPolytope, Vec3)> = Vec::new();
        for b in 0..a {
            let inter = self.sets[a].polytope.intersect(&self.sets[b].polytope);
            let em = inter.is_empty();
            let Some(w) = em.witness() else { continue };
            if em.radius() <= self.min_vertex_radius || !fit(&inter) {
                continue;
            }
            found.push((b, inter, w));
        }
        if found.is_empty() {
            return;
        }

        let mut points: Vec<Option<Vec3>> = vec![None; found.len()];
        for (k, (b, inter, _)) in found.iter().enumerate() {
            if let Some(anchor) = self.sets[*b].anchor {
                if let Ok(p) = inter.project(&anchor) {
                    points[k] = Some(p);
                    if self.sets[a].anchor.is_none() {
                        self.sets[a].anchor = Some(p);
                    }
                }
            }
        }
        if self.sets[a].anchor.is_none() {
            // No anchored neighbor: seed from the closest points of the first
            // two intersections, or the Chebyshev center of a lone one.
            let p = if found.len() >= 2 {
                match found[0].1.closest_pair(&found[1].1) {
                    Ok((x, y)) => {
                        points[1] = Some(y);
                        x
                    }
                    Err(_) => found[0].2,
                }
            } else {
                found[0].2
            };
            points[0] = Some(p);
            self.sets[a].anchor = Some(p);
        }
        let anchor_a = self.sets[a].anchor.expect("anchor assigned above");
        for (k, (b, inter, w)) in found.iter().enumerate() {
            let p = match points[k] {
                Some(p) => p,
                None => inter.project(&anchor_a).unwrap_or(*w),
            };
            if self.sets[*b].anchor.is_none() {
                self.sets[*b].anchor = Some(p);
            }
            points[k] = Some(p);
        }

        for ((b, inter, _), p) in found.into_iter().zip(points) {
            let id = self.vertices.len();
            let key = (b.min(a), b.max(a));
            self.vertices.push(IntersectionVertex {
                sets: key,
                polytope: inter,
                point: p.expect("every point assigned"),
            });
            for other in 0..id {
                let ov = &self.vertices[other];
                let shared = [key.0, key.1].into_iter().find(|s| ov.other(*s).is_some());
                if let Some(shared) = shared {
                    let cost = self.sets[shared].size_cost * (ov.point - self.vertices[id].point).norm()
                        + self.params.c_bias;
                    self.edges.push(Edge {
                        u: other,
                        v: id,
                        shared,
                        cost,
                    });
                }
            }
        }
    }

    /// Whether some chain of intersections links the start and final sets.
    pub fn connected(&self) -> bool {
        let (Some(s), Some(f)) = (self.start, self.final_set) else {
            return false;
        };
        if s == f {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.vertices.len()];
        let mut stack: Vec<usize> = (0..self.vertices.len())
            .filter(|&v| self.vertices[v].other(s).is_some())
            .collect();
        for &v in &stack {
            seen[v] = true;
        }
        while let Some(v) = stack.pop() {
            if self.vertices[v].other(f).is_some() {
                return true;
            }
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, k));
            adj[e.v].push((e.u, k));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Cost of entering vertex `v` from the start point.
    pub fn entry_cost(&self, v: usize) -> Option<f64> {
        let s = self.start?;
        self.vertices[v].other(s)?;
        let set = &self.sets[s];
        Some(set.size_cost * (set.anchor? - self.vertices[v].point).norm() + self.params.c_bias)
    }

    /// Cost of leaving vertex `v` to the goal point.
    pub fn exit_cost(&self, v: usize) -> Option<f64> {
        let f = self.final_set?;
        self.vertices[v].other(f)?;
        let set = &self.sets[f];
        Some(set.size_cost * (self.vertices[v].point - set.anchor?).norm() + self.params.c_bias)
    }

    /// Dijkstra from a virtual source at the start point to a virtual sink at
    /// the goal point. Ties go to the smaller vertex id.
    pub fn shortest_set_path(&self) -> Result<SetPath> {
        let (Some(s), Some(f)) = (self.start, self.final_set) else {
            return Err(Error::NoPath);
        };
        if s == f {
            return Ok(SetPath {
                sets: vec![s],
                vertices: vec![],
                cost: 0.0,
            });
        }
        let n = self.vertices.len();
        let sink = n;
        let adj = self.adjacency();
        let mut dist = vec![f64::INFINITY; n + 1];
        let mut prev: Vec<Option<usize>> = vec![None; n + 1];
        let mut done = vec![false; n + 1];
        let mut heap = BinaryHeap::new();
        for v in 0..n {
            if let Some(c) = self.entry_cost(v) {
                dist[v] = c;
                heap.push(Node { cost: c, id: v });
            }
        }
        while let Some(Node { cost, id }) = heap.pop() {
            if done[id] || cost > dist[id] {
                continue;
            }
            done[id] = true;
            if id == sink {
                break;
            }
            if let Some(c) = self.exit_cost(id) {
                let nd = cost + c;
                if nd < dist[sink] {
                    dist[sink] = nd;
                    prev[sink] = Some(id);
                    heap.push(Node { cost: nd, id: sink });
                }
            }
            for &(w, e) in &adj[id] {
                let nd = cost + self.edges[e].cost;
                if nd < dist[w] {
                    dist[w] = nd;
                    prev[w] = Some(id);
                    heap.push(Node { cost: nd, id: w });
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(Error::NoPath);
        }
        let mut chain = Vec::new();
        let mut cur = prev[sink];
        while let Some(v) = cur {
            chain.push(v);
            cur = prev[v];
        }
        chain.reverse();
        Ok(SetPath {
            sets: self.sets_along(&chain),
            vertices: chain,
            cost: dist[sink],
        })
    }

    /// Set sequence traversed by a vertex chain that starts at the start set
    /// and ends at the final set.
    pub fn sets_along(&self, chain: &[usize]) -> Vec<usize> {
        let s = self.start.expect("start set present");
        let f = self.final_set.expect("final set present");
        let mut seq = vec![s];
        for w in chain.windows(2) {
            let (a, b) = (&self.vertices[w[0]], &self.vertices[w[1]]);
            let shared = [a.sets.0, a.sets.1]
                .into_iter()
                .find(|x| b.other(*x).is_some())
                .expect("consecutive vertices share a set");
            seq.push(shared);
        }
        seq.push(f);
        seq.dedup();
        seq
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("graph serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Node {
    cost: f64,
    id: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
