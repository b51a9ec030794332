use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Single-source shortest-path lengths over the mesh edge graph.
///
/// This approximates the polyhedral geodesic from above. Vertices on a
/// different connected component than the source hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicTable {
    pub source_index: usize,
    pub distances: Vec<f64>,
}

impl GeodesicTable {
    pub fn distance_to(&self, vertex: usize) -> f64 {
        self.distances[vertex]
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Weighted adjacency lists with Euclidean edge lengths.
pub(crate) fn edge_graph(mesh: &TriangleMesh) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); mesh.n_vertices()];
    let v = mesh.vertices();
    for (a, b) in mesh.edges() {
        let w = (v[a] - v[b]).norm();
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    adj
}

pub fn geodesic_distances(mesh: &TriangleMesh, source: usize) -> Result<GeodesicTable> {
    let n = mesh.n_vertices();
    if source >= n {
        return Err(Error::InvalidArgument(format!(
            "source vertex {source} out of range for {n} vertices"
        )));
    }
    Ok(dijkstra(&edge_graph(mesh), source))
}

pub(crate) fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> GeodesicTable {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut done = vec![false; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        vertex: source,
    });
    while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry { dist: nd, vertex: v });
            }
        }
    }
    GeodesicTable {
        source_index: source,
        distances: dist,
    }
}
