//! Undirected simple graphs in compressed adjacency form, plus the lattice
//! wrapper produced by the sampler.

use serde::{Deserialize, Serialize};

use crate::error::{LrpError, Result};
use crate::lattice::Lattice;
use crate::params::LrpParams;

/// Simple undirected graph; adjacency lists are sorted and symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicates (in either
    /// orientation) collapse to a single edge; self-loops and out-of-range
    /// endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Graph> {
        let mut canon: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(LrpError::invalid(format!(
                    "edge ({u},{v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(LrpError::invalid(format!("self-loop at vertex {u}")));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical(n, &canon))
    }

    /// `edges` must be sorted, deduplicated, with `u < v < n`.
    fn from_canonical(n: usize, edges: &[(u32, u32)]) -> Graph {
        let mut deg = vec![0usize; n];
        for &(u, v) in edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; offsets[n]];
        for &(u, v) in edges {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Graph { offsets, neighbors }
    }

    pub fn empty(n: usize) -> Graph {
        Graph {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn complete(n: usize) -> Graph {
        let mut e = Vec::new();
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                e.push((u, v));
            }
        }
        Self::from_canonical(n, &e)
    }

    pub fn cycle(n: usize) -> Graph {
        let e: Vec<(u32, u32)> = (0..n as u32).map(|i| (i, (i + 1) % n as u32)).collect();
        Self::from_edges(n, &e).expect("cycle edges valid")
    }

    pub fn path(n: usize) -> Graph {
        let e: Vec<(u32, u32)> = (1..n as u32).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &e).expect("path edges valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn degree(&self, v: u32) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    /// Position of `v` inside the adjacency list of `u`, if adjacent.
    pub fn edge_slot(&self, u: u32, v: u32) -> Option<usize> {
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|p| self.offsets[u as usize] + p)
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.edge_slot(u, v).is_some()
    }

    pub fn degrees(&self) -> Vec<u32> {
        (0..self.num_vertices() as u32)
            .map(|v| self.degree(v) as u32)
            .collect()
    }

    /// Total number of oriented edges (sum of degrees).
    pub fn degree_sum(&self) -> usize {
        self.neighbors.len()
    }

    /// Undirected edges with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.num_vertices() as u32).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Subgraph induced by `vertices` (any order, no duplicates). Local
    /// vertex `i` corresponds to global `map[i]`; `map` is sorted.
    pub fn induced_subgraph(&self, vertices: &[u32]) -> (Graph, Vec<u32>) {
        let mut map = vertices.to_vec();
        map.sort_unstable();
        map.dedup();
        let mut local = vec![u32::MAX; self.num_vertices()];
        for (i, &g) in map.iter().enumerate() {
            local[g as usize] = i as u32;
        }
        let mut edges = Vec::new();
        for (i, &g) in map.iter().enumerate() {
            for &h in self.neighbors(g) {
                let j = local[h as usize];
                if j != u32::MAX && (i as u32) < j {
                    edges.push((i as u32, j));
                }
            }
        }
        edges.sort_unstable();
        (Self::from_canonical(map.len(), &edges), map)
    }

    /// Adds edges (duplicates ignored).
    pub fn with_extra_edges(&self, extra: &[(u32, u32)]) -> Result<Graph> {
        let mut all: Vec<(u32, u32)> = self.edges().collect();
        all.extend_from_slice(extra);
        Graph::from_edges(self.num_vertices(), &all)
    }
}

/// Erdős–Rényi `G(n, p)` drawn pair by pair from a seeded stream.
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    use rand::Rng;
    let mut rng = crate::rng::stream(seed, &[0x6e70]);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_canonical(n, &edges)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: Option<LrpParams>,
    pub seed: Option<u64>,
    /// Names of the stage filters whose edges are present.
    pub stages: Vec<String>,
}

/// A sampled configuration on a box or torus.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    pub lattice: Lattice,
    pub graph: Graph,
    pub provenance: Provenance,
}

impl LatticeGraph {
    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }
}

pub fn build_graph(
    lattice: Lattice,
    edges: &[(u32, u32)],
    params: Option<&LrpParams>,
    provenance: Provenance,
) -> Result<LatticeGraph> {
    let graph = Graph::from_edges(lattice.num_vertices(), edges)?;
    let mut provenance = provenance;
    if provenance.params.is_none() {
        provenance.params = params.cloned();
    }
    Ok(LatticeGraph {
        lattice,
        graph,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Geometry;
    use proptest::prelude::*;

    #[test]
    fn path_degrees() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 2, 2, 1]);
    }

    #[test]
    fn empty_edge_list() {
        let g = Graph::from_edges(4, &[]).unwrap();
        assert_eq!(g.degrees(), vec![0; 4]);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn duplicates_collapse() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 1, 0]);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
        assert!(Graph::from_edges(3, &[(1, 1)]).is_err());
        let l = Lattice::new(1, 1, Geometry::Box).unwrap();
        assert!(build_graph(l, &[(0, 7)], None, Provenance::default()).is_err());
    }

    #[test]
    fn induced_subgraph_keeps_internal_edges() {
        let g = Graph::cycle(6);
        let (h, map) = g.induced_subgraph(&[4, 0, 5, 1]);
        assert_eq!(map, vec![0, 1, 4, 5]);
        let e: Vec<_> = h.edges().collect();
        assert_eq!(e, vec![(0, 1), (0, 3), (2, 3)]);
    }

    proptest! {
        #[test]
        fn invariants_hold(edges in proptest::collection::vec((0u32..30, 0u32..30), 0..120)) {
            let edges: Vec<_> = edges.into_iter().filter(|(u, v)| u != v).collect();
            let g = Graph::from_edges(30, &edges).unwrap();
            for u in 0..30u32 {
                let nb = g.neighbors(u);
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(!nb.contains(&u));
                prop_assert_eq!(g.degree(u), nb.len());
                for &v in nb {
                    prop_assert!(g.has_edge(v, u));
                }
            }
        }
    }
}
