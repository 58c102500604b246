//! Components, hop distances, diameters and degree statistics.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{LrpError, Result};
use crate::graph::{Graph, LatticeGraph};
use crate::rng::stream;

/// Per-vertex component ids, contiguous from 0 in descending size order.
/// Equal sizes are ordered by smallest member vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    /// Id of the largest component, if the graph is non-empty.
    pub fn largest(&self) -> Option<u32> {
        (!self.sizes.is_empty()).then_some(0)
    }

    pub fn members(&self, component: u32) -> Vec<u32> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == component)
            .map(|(v, _)| v as u32)
            .collect()
    }

    pub fn largest_members(&self) -> Vec<u32> {
        self.largest().map(|c| self.members(c)).unwrap_or_default()
    }
}

struct Dsu {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

pub fn connected_components(graph: &Graph) -> ComponentLabeling {
    let n = graph.num_vertices();
    let mut dsu = Dsu::new(n);
    for (u, v) in graph.edges() {
        dsu.union(u, v);
    }
    // root -> (size, min vertex); vertices are scanned ascending so the
    // first visit of a root is its minimum member
    let mut root_order: Vec<u32> = Vec::new();
    let mut seen = vec![false; n];
    let roots: Vec<u32> = (0..n as u32).map(|v| dsu.find(v)).collect();
    for &r in &roots {
        if !seen[r as usize] {
            seen[r as usize] = true;
            root_order.push(r);
        }
    }
    // stable sort keeps min-vertex order among equal sizes
    root_order.sort_by_key(|&r| std::cmp::Reverse(dsu.size[r as usize]));
    let mut id_of_root = vec![u32::MAX; n];
    for (i, &r) in root_order.iter().enumerate() {
        id_of_root[r as usize] = i as u32;
    }
    ComponentLabeling {
        labels: roots.iter().map(|&r| id_of_root[r as usize]).collect(),
        sizes: root_order.iter().map(|&r| dsu.size[r as usize] as usize).collect(),
    }
}

/// `n_2`, or 0 when fewer than two components exist.
pub fn second_largest_size(labeling: &ComponentLabeling) -> usize {
    labeling.sizes.get(1).copied().unwrap_or(0)
}

/// Hop distances from `source`; unreachable vertices get `|V|`.
pub fn bfs_distances(graph: &Graph, source: u32) -> Vec<u32> {
    let n = graph.num_vertices();
    let unreachable = n as u32;
    let mut dist = vec![unreachable; n];
    let mut queue = std::collections::VecDeque::new();
    dist[source as usize] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u as usize];
        for &w in graph.neighbors(u) {
            if dist[w as usize] == unreachable {
                dist[w as usize] = du + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Eccentricity and a farthest vertex (smallest index among ties).
fn eccentricity(graph: &Graph, source: u32) -> (u32, u32) {
    let dist = bfs_distances(graph, source);
    let mut best = (0, source);
    for (v, &d) in dist.iter().enumerate() {
        if d > best.0 {
            best = (d, v as u32);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterMode {
    Exact,
    TwoSweepLower,
}

/// Default size cap for exact all-pairs diameters.
pub const EXACT_DIAMETER_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiameterEstimate {
    pub value: u32,
    pub exact: bool,
}

fn ensure_connected(graph: &Graph) -> Result<()> {
    let n = graph.num_vertices();
    if n == 0 {
        return Err(LrpError::invalid("empty component"));
    }
    let dist = bfs_distances(graph, 0);
    if dist.iter().any(|&d| d as usize == n) {
        return Err(LrpError::invalid("component is not connected"));
    }
    Ok(())
}

/// Diameter of a connected graph (pass a component's induced subgraph).
pub fn component_diameter(graph: &Graph, mode: DiameterMode) -> Result<DiameterEstimate> {
    component_diameter_capped(graph, mode, EXACT_DIAMETER_CAP)
}

pub fn component_diameter_capped(
    graph: &Graph,
    mode: DiameterMode,
    cap: usize,
) -> Result<DiameterEstimate> {
    ensure_connected(graph)?;
    let n = graph.num_vertices();
    match mode {
        DiameterMode::Exact => {
            if n > cap {
                return Err(LrpError::invalid(format!(
                    "exact diameter requested on {n} vertices above cap {cap}"
                )));
            }
            let value = (0..n as u32)
                .into_par_iter()
                .map(|s| eccentricity(graph, s).0)
                .max()
                .unwrap_or(0);
            Ok(DiameterEstimate { value, exact: true })
        }
        DiameterMode::TwoSweepLower => Ok(DiameterEstimate {
            value: two_sweep_lower(graph, 4),
            exact: false,
        }),
    }
}

/// Iterated double sweep from a maximum-degree vertex; a lower bound on
/// the diameter.
pub fn two_sweep_lower(graph: &Graph, rounds: usize) -> u32 {
    let n = graph.num_vertices();
    if n == 0 {
        return 0;
    }
    let start = (0..n as u32)
        .max_by_key(|&v| (graph.degree(v), std::cmp::Reverse(v)))
        .unwrap();
    let mut best = 0;
    let (_, mut a) = eccentricity(graph, start);
    for _ in 0..rounds.max(1) {
        let (e, b) = eccentricity(graph, a);
        if e <= best {
            break;
        }
        best = e;
        a = b;
    }
    best
}

/// Upper bound `min_v 2 ecc(v)` over `samples` random vertices.
pub fn eccentricity_upper(graph: &Graph, samples: usize, seed: u64) -> u32 {
    let n = graph.num_vertices();
    if n == 0 {
        return 0;
    }
    let mut rng = stream(seed, &[0xECC]);
    (0..samples.max(1))
        .map(|_| 2 * eccentricity(graph, rng.random_range(0..n as u32)).0)
        .min()
        .unwrap()
}

pub fn max_degree(graph: &Graph, region: &[u32]) -> Result<usize> {
    if region.is_empty() {
        return Err(LrpError::invalid("empty region"));
    }
    Ok(region.iter().map(|&v| graph.degree(v)).max().unwrap())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeEstimate {
    /// Samples where the origin lies outside the largest cluster of `Λ_N`.
    pub conditioning_events: usize,
    pub escapes: usize,
    pub frequency: f64,
}

/// Empirical `P(0 <-> outside Λ_N | 0 ∉ C¹(N))` over an ensemble of graphs
/// sampled on boxes strictly containing `Λ_N`.
pub fn escape_vs_giant(graphs: &[LatticeGraph], n: u64) -> Result<EscapeEstimate> {
    let mut events = 0;
    let mut escapes = 0;
    for g in graphs {
        if g.lattice.n <= n {
            return Err(LrpError::invalid(format!(
                "sample box N={} does not strictly contain Λ_{n}",
                g.lattice.n
            )));
        }
        let inner: Vec<u32> = (0..g.num_vertices() as u32)
            .filter(|&v| {
                g.lattice
                    .coords(v)
                    .iter()
                    .all(|c| c.unsigned_abs() <= n)
            })
            .collect();
        let origin = g.lattice.origin();
        let (sub, map) = g.graph.induced_subgraph(&inner);
        let lab = connected_components(&sub);
        let o_local = map.binary_search(&origin).expect("origin inside Λ_N");
        if lab.labels[o_local] == 0 {
            continue;
        }
        events += 1;
        let dist = bfs_distances(&g.graph, origin);
        let out = dist.iter().enumerate().any(|(v, &d)| {
            (d as usize) < g.num_vertices() && map.binary_search(&(v as u32)).is_err()
        });
        if out {
            escapes += 1;
        }
    }
    if events == 0 {
        return Err(LrpError::InsufficientData(
            "insufficient conditioning events".into(),
        ));
    }
    Ok(EscapeEstimate {
        conditioning_events: events,
        escapes,
        frequency: escapes as f64 / events as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn two_triangles() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    /// Connected components by repeated BFS, ordered like the labeling.
    fn oracle_sizes(g: &Graph) -> Vec<usize> {
        let n = g.num_vertices();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n as u32 {
            if seen[s as usize] {
                continue;
            }
            let d = bfs_distances(g, s);
            let members: usize = d.iter().filter(|&&x| (x as usize) < n).count();
            for (v, &x) in d.iter().enumerate() {
                if (x as usize) < n {
                    seen[v] = true;
                }
            }
            comps.push(members);
        }
        comps.sort_by(|a, b| b.cmp(a));
        comps
    }

    #[test]
    fn triangles_and_empty() {
        let lab = connected_components(&two_triangles());
        assert_eq!(lab.sizes, vec![3, 3]);
        assert_eq!(lab.labels, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(second_largest_size(&lab), 3);
        let e = connected_components(&Graph::empty(7));
        assert_eq!(e.sizes, vec![1; 7]);
        assert_eq!(second_largest_size(&connected_components(&Graph::complete(4))), 0);
    }

    #[test]
    fn tie_broken_by_smallest_vertex() {
        let g = Graph::from_edges(4, &[(2, 3), (0, 1)]).unwrap();
        let lab = connected_components(&g);
        assert_eq!(lab.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn lrp_instance_matches_bfs_oracle() {
        use crate::lattice::Lattice;
        use crate::params::{Geometry, LrpParams};
        use crate::sampler::{sample_edges, PairPredicate};
        let l = Lattice::new(1, 200, Geometry::Box).unwrap();
        let p = LrpParams::new(1, 1.5, 1.0).unwrap();
        let e = sample_edges(&l, &PairPredicate::all(), &p, 42).unwrap();
        let g = Graph::from_edges(l.num_vertices(), &e).unwrap();
        let lab = connected_components(&g);
        assert_eq!(lab.sizes, oracle_sizes(&g));
        for (u, v) in g.edges() {
            assert_eq!(lab.labels[u as usize], lab.labels[v as usize]);
        }
    }

    #[test]
    fn distances_small() {
        assert_eq!(bfs_distances(&Graph::path(3), 0), vec![0, 1, 2]);
        assert_eq!(bfs_distances(&Graph::complete(4), 2), vec![1, 1, 0, 1]);
        assert_eq!(bfs_distances(&Graph::empty(3), 0), vec![0, 3, 3]);
    }

    #[test]
    fn diameters_small() {
        let c6 = Graph::cycle(6);
        assert_eq!(component_diameter(&c6, DiameterMode::Exact).unwrap().value, 3);
        let star = Graph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        assert_eq!(component_diameter(&star, DiameterMode::Exact).unwrap().value, 2);
        assert_eq!(component_diameter(&star, DiameterMode::TwoSweepLower).unwrap().value, 2);
        assert!(component_diameter(&two_triangles(), DiameterMode::Exact).is_err());
        assert!(component_diameter_capped(&c6, DiameterMode::Exact, 5).is_err());
    }

    fn floyd_warshall(g: &Graph) -> Vec<Vec<u32>> {
        let n = g.num_vertices();
        let inf = n as u32;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (u, v) in g.edges() {
            d[u as usize][v as usize] = 1;
            d[v as usize][u as usize] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] < inf && d[k][j] < inf && d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = stream(seed, &[1]);
        let mut e = Vec::new();
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                if rng.random::<f64>() < p {
                    e.push((u, v));
                }
            }
        }
        Graph::from_edges(n, &e).unwrap()
    }

    #[test]
    fn bfs_matches_floyd_warshall() {
        for seed in 0..20 {
            let g = random_graph(40 + seed as usize, 0.06, seed);
            let fw = floyd_warshall(&g);
            for s in 0..g.num_vertices() as u32 {
                assert_eq!(bfs_distances(&g, s), fw[s as usize]);
            }
        }
    }

    #[test]
    fn two_sweep_never_exceeds_exact() {
        let mut equal = 0;
        let mut total = 0;
        for seed in 0..200 {
            let g = random_graph(30 + (seed as usize % 170), 0.04, seed);
            let lab = connected_components(&g);
            let (h, _) = g.induced_subgraph(&lab.largest_members());
            if h.num_vertices() < 2 {
                continue;
            }
            let exact = component_diameter(&h, DiameterMode::Exact).unwrap().value;
            let lower = two_sweep_lower(&h, 4);
            let upper = eccentricity_upper(&h, 4, seed);
            assert!(lower <= exact && exact <= upper);
            total += 1;
            equal += usize::from(lower == exact);
            if total == 50 {
                break;
            }
        }
        assert_eq!(total, 50);
        println!("two-sweep exact on {equal}/{total}");
    }

    #[test]
    fn max_degree_cases() {
        let k5 = Graph::complete(5);
        assert_eq!(max_degree(&k5, &[0, 1, 2, 3, 4]).unwrap(), 4);
        assert_eq!(max_degree(&Graph::empty(3), &[0, 1, 2]).unwrap(), 0);
        assert!(max_degree(&k5, &[]).is_err());
    }

    #[test]
    fn escape_degenerate_cases() {
        use crate::graph::{build_graph, Provenance};
        use crate::lattice::Lattice;
        use crate::params::Geometry;
        let l = Lattice::new(1, 4, Geometry::Box).unwrap();
        let all: Vec<(u32, u32)> = (0..9u32).flat_map(|u| (u + 1..9).map(move |v| (u, v))).collect();
        let full = build_graph(l, &all, None, Provenance::default()).unwrap();
        assert!(matches!(
            escape_vs_giant(&[full], 2),
            Err(LrpError::InsufficientData(_))
        ));
        let empty = build_graph(l, &[], None, Provenance::default()).unwrap();
        let est = escape_vs_giant(&[empty.clone(), empty], 2).unwrap();
        assert_eq!(est.frequency, 0.0);
        assert_eq!(est.conditioning_events, 2);
    }

    proptest! {
        #[test]
        fn labeling_invariant_under_relabeling(
            edges in proptest::collection::vec((0u32..25, 0u32..25), 0..40),
            perm_seed in any::<u64>(),
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|(u, v)| u != v).collect();
            let g = Graph::from_edges(25, &edges).unwrap();
            let mut perm: Vec<u32> = (0..25).collect();
            let mut rng = stream(perm_seed, &[]);
            for i in (1..25).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let pe: Vec<_> = edges.iter().map(|&(u, v)| (perm[u as usize], perm[v as usize])).collect();
            let h = Graph::from_edges(25, &pe).unwrap();
            let a = connected_components(&g);
            let b = connected_components(&h);
            prop_assert_eq!(&a.sizes, &b.sizes);
            for u in 0..25usize {
                for v in 0..25usize {
                    let same_a = a.labels[u] == a.labels[v];
                    let same_b = b.labels[perm[u] as usize] == b.labels[perm[v] as usize];
                    prop_assert_eq!(same_a, same_b);
                }
            }
            prop_assert_eq!(a.sizes.iter().sum::<usize>(), 25);
        }

        #[test]
        fn triangle_inequality(
            edges in proptest::collection::vec((0u32..20, 0u32..20), 0..50),
            a in 0u32..20, b in 0u32..20, c in 0u32..20,
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|(u, v)| u != v).collect();
            let g = Graph::from_edges(20, &edges).unwrap();
            let da = bfs_distances(&g, a);
            let db = bfs_distances(&g, b);
            // sentinel 20 behaves as infinity only when both legs are finite
            if da[b as usize] < 20 && db[c as usize] < 20 {
                prop_assert!(da[c as usize] <= da[b as usize] + db[c as usize]);
            }
        }
    }
}
