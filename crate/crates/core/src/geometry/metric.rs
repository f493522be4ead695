use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::mesh::Mesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    vertex: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken by vertex index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest edge-path distances on the mesh graph, an upper estimate of the
/// inner (intrinsic path) metric of the domain.
#[derive(Debug, Clone)]
pub struct InnerMetric {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl InnerMetric {
    pub fn new(mesh: &Mesh) -> Self {
        let mut adjacency = vec![Vec::new(); mesh.n_vertices()];
        for (a, b) in mesh.edges() {
            let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
            let len = (q[0] - p[0]).hypot(q[1] - p[1]);
            adjacency[a].push((b, len));
            adjacency[b].push((a, len));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(v, _)| v);
        }
        Self { adjacency }
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    /// Dijkstra from `source`; unreachable vertices get `f64::INFINITY`.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adjacency.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(State { dist: 0.0, vertex: source });
        while let Some(State { dist: d, vertex }) = heap.pop() {
            if d > dist[vertex] {
                continue;
            }
            for &(next, w) in &self.adjacency[vertex] {
                let nd = d + w;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(State { dist: nd, vertex: next });
                }
            }
        }
        dist
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.adjacency.len();
        if i >= n || j >= n {
            return Err(Error::invalid(format!("vertex index out of range ({i}, {j}) for {n} vertices")));
        }
        if i == j {
            return Ok(0.0);
        }
        let d = self.distances_from(i)[j];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Disconnected { from: i, target: j })
        }
    }
}

/// Inner-metric distance between two vertices (shortest path along mesh edges).
pub fn inner_metric(mesh: &Mesh, i: usize, j: usize) -> Result<f64> {
    InnerMetric::new(mesh).distance(i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_annulus, build_unit_square, Mesh};
    use proptest::prelude::*;

    fn euclid(m: &Mesh, i: usize, j: usize) -> f64 {
        let (p, q) = (m.vertices()[i], m.vertices()[j]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    #[test]
    fn zero_on_diagonal_and_dominates_chord() {
        let m = build_unit_square(4).unwrap();
        assert_eq!(inner_metric(&m, 3, 3).unwrap(), 0.0);
        let d = inner_metric(&m, 0, 24).unwrap();
        // diagonal cut direction: straight path along rising diagonals
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(inner_metric(&m, 0, 4).unwrap() >= euclid(&m, 0, 4));
        assert!(inner_metric(&m, 0, 99).is_err());
    }

    #[test]
    fn disconnected_mesh_reported() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0], [6.0, 5.0], [5.0, 6.0]];
        let t = vec![[0, 1, 2], [3, 4, 5]];
        let b = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]
            .iter()
            .map(|&(a, b)| (a, b, "s".to_string()))
            .collect();
        let m = Mesh::from_parts(v, t, b, vec![]).unwrap();
        assert!(matches!(inner_metric(&m, 0, 4), Err(Error::Disconnected { .. })));
    }

    #[test]
    fn annulus_path_goes_around_the_hole() {
        let m = build_annulus(0.5, 1.0, 2, 32).unwrap();
        // vertices 0 and 16 on the inner ring are diametrically opposite
        let d = inner_metric(&m, 0, 16).unwrap();
        assert!(d > 1.5, "{d}");
        assert!(d >= euclid(&m, 0, 16));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn metric_axioms(i in 0usize..81, j in 0usize..81, k in 0usize..81) {
            let m = build_unit_square(8).unwrap();
            let im = InnerMetric::new(&m);
            let dij = im.distance(i, j).unwrap();
            prop_assert!((dij - im.distance(j, i).unwrap()).abs() <= 1e-14 * (1.0 + dij));
            prop_assert!(dij <= im.distance(i, k).unwrap() + im.distance(k, j).unwrap() + 1e-12);
            prop_assert_eq!(dij == 0.0, i == j);
            prop_assert!(dij >= euclid(&m, i, j) - 1e-15);
            // three edge directions: the detour factor is at most sqrt(2)
            prop_assert!(dij <= 2f64.sqrt() * euclid(&m, i, j) + 1e-12);
        }
    }
}
