//! Spectral gaps of simple random walks and multicommodity-flow bounds.
//!
//! For a flow `f` routing `π(x)π(y)` between every ordered pair, the
//! congestion `ρ(f) = max_e f(e) / (π(a)P(a,b))` with edge loads
//! `f(e) = Σ_{γ∋e} f(γ)|γ|` satisfies `1/(1-λ₂) ≤ ρ(f)`, so `1/ρ(f)` is a
//! certified lower bound on the gap.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::cluster::bfs_distances;
use crate::error::{LrpError, Result};
use crate::graph::Graph;
use crate::rng::stream;

/// Largest chain accepted by the dense solvers.
pub const DENSE_CAP: usize = 4000;

/// Simple random walk on a connected graph, optionally lazy: with
/// probability `holding` the walk stays put, otherwise it moves to a
/// uniform neighbour. Stationary weights are `π(x) ∝ deg(x)` either way.
#[derive(Debug, Clone)]
pub struct ReversibleChain {
    graph: Graph,
    holding: f64,
    degree_sum: f64,
}

impl ReversibleChain {
    pub fn new(graph: Graph) -> Result<Self> {
        let n = graph.num_vertices();
        if n < 2 || graph.num_edges() == 0 {
            return Err(LrpError::invalid("chain needs a connected graph with an edge"));
        }
        if bfs_distances(&graph, 0).iter().any(|&d| d as usize == n) {
            return Err(LrpError::invalid("graph is disconnected"));
        }
        let degree_sum = graph.degree_sum() as f64;
        Ok(ReversibleChain {
            graph,
            holding: 0.0,
            degree_sum,
        })
    }

    /// Lazy version holding with probability `holding`.
    pub fn lazy(&self, holding: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&holding) {
            return Err(LrpError::invalid("holding probability must lie in [0,1)"));
        }
        Ok(ReversibleChain {
            holding,
            ..self.clone()
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn holding(&self) -> f64 {
        self.holding
    }

    pub fn pi(&self, x: u32) -> f64 {
        self.graph.degree(x) as f64 / self.degree_sum
    }

    pub fn stationary(&self) -> Vec<f64> {
        (0..self.len() as u32).map(|x| self.pi(x)).collect()
    }

    pub fn transition(&self, x: u32, y: u32) -> f64 {
        let mv = if self.graph.has_edge(x, y) {
            (1.0 - self.holding) / self.graph.degree(x) as f64
        } else {
            0.0
        };
        if x == y {
            mv + self.holding
        } else {
            mv
        }
    }

    /// Edge measure `π(a)P(a,b)` of an oriented edge, identical for all.
    pub fn edge_measure(&self) -> f64 {
        (1.0 - self.holding) / self.degree_sum
    }

    pub fn is_bipartite(&self) -> bool {
        let n = self.len();
        let mut color = vec![u8::MAX; n];
        let mut q = VecDeque::new();
        color[0] = 0;
        q.push_back(0u32);
        while let Some(u) = q.pop_front() {
            for &w in self.graph.neighbors(u) {
                if color[w as usize] == u8::MAX {
                    color[w as usize] = 1 - color[u as usize];
                    q.push_back(w);
                } else if color[w as usize] == color[u as usize] {
                    return false;
                }
            }
        }
        true
    }

    /// Dense symmetrized kernel `D^{1/2} P D^{-1/2}`.
    pub fn symmetrized_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n as u32 {
            let dx = self.graph.degree(x) as f64;
            m[(x as usize, x as usize)] += self.holding;
            for &y in self.graph.neighbors(x) {
                let dy = self.graph.degree(y) as f64;
                m[(x as usize, y as usize)] += (1.0 - self.holding) / (dx * dy).sqrt();
            }
        }
        m
    }

    pub fn transition_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n as u32 {
            m[(x as usize, x as usize)] += self.holding;
            let dx = self.graph.degree(x) as f64;
            for &y in self.graph.neighbors(x) {
                m[(x as usize, y as usize)] += (1.0 - self.holding) / dx;
            }
        }
        m
    }

    fn apply_symmetrized(&self, v: &[f64], out: &mut [f64], inv_sqrt_deg: &[f64]) {
        let h = self.holding;
        out.par_iter_mut().enumerate().for_each(|(x, o)| {
            let acc: f64 = self
                .graph
                .neighbors(x as u32)
                .iter()
                .map(|&y| v[y as usize] * inv_sqrt_deg[y as usize])
                .sum();
            *o = h * v[x] + (1.0 - h) * inv_sqrt_deg[x] * acc;
        });
    }

    /// One step of a row distribution: `out = mu P`.
    pub fn push_row(&self, mu: &[f64], out: &mut [f64]) {
        let h = self.holding;
        for (y, o) in out.iter_mut().enumerate() {
            let acc: f64 = self
                .graph
                .neighbors(y as u32)
                .iter()
                .map(|&x| mu[x as usize] / self.graph.degree(x) as f64)
                .sum();
            *o = h * mu[y] + (1.0 - h) * acc;
        }
    }
}

fn sorted_eigenvalues(chain: &ReversibleChain) -> Result<Vec<f64>> {
    if chain.len() > DENSE_CAP {
        return Err(LrpError::invalid(format!(
            "dense spectrum requested on {} states above cap {DENSE_CAP}",
            chain.len()
        )));
    }
    let eig = SymmetricEigen::new(chain.symmetrized_dense());
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(ev)
}

/// `1 - λ₂` from a dense symmetric eigensolve.
pub fn spectral_gap_exact(chain: &ReversibleChain) -> Result<f64> {
    Ok(1.0 - sorted_eigenvalues(chain)?[1])
}

/// All eigenvalues of the kernel, descending.
pub fn spectrum_exact(chain: &ReversibleChain) -> Result<Vec<f64>> {
    sorted_eigenvalues(chain)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub gap: f64,
    /// Residual norm of the Ritz pair; an eigenvalue lies within it.
    pub error_bound: f64,
    pub iterations: usize,
}

/// Lanczos with full reorthogonalization on the symmetrized kernel,
/// restricted to the complement of `√π`.
pub fn spectral_gap_iterative(chain: &ReversibleChain, tol: f64) -> Result<GapEstimate> {
    spectral_gap_iterative_with(chain, tol, 0x1a2c, 3000)
}

pub fn spectral_gap_iterative_with(
    chain: &ReversibleChain,
    tol: f64,
    seed: u64,
    max_iter: usize,
) -> Result<GapEstimate> {
    let n = chain.len();
    if n == 2 {
        // the complement of √π is one-dimensional
        return spectral_gap_exact(chain).map(|gap| GapEstimate {
            gap,
            error_bound: 0.0,
            iterations: 1,
        });
    }
    let inv_sqrt_deg: Vec<f64> = (0..n as u32)
        .map(|x| 1.0 / (chain.graph.degree(x) as f64).sqrt())
        .collect();
    let top: Vec<f64> = (0..n as u32)
        .map(|x| chain.pi(x).sqrt())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let project_out = |v: &mut [f64], basis: &[Vec<f64>]| {
        for q in std::iter::once(&top).chain(basis.iter()) {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    };
    let mut rng = stream(seed, &[n as u64]);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    project_out(&mut q, &[]);
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= norm);

    let max_iter = max_iter.min(n - 1);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_residual = f64::INFINITY;
    for j in 0..max_iter {
        chain.apply_symmetrized(&basis[j], &mut w, &inv_sqrt_deg);
        let a = dot(&w, &basis[j]);
        alphas.push(a);
        // full reorthogonalization, twice for stability
        project_out(&mut w, &basis);
        project_out(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        let k = j + 1;
        let check = k % 5 == 0 || k == max_iter || b < 1e-12;
        if check {
            let mut t = DMatrix::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alphas[i];
                if i + 1 < k {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (idx, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let residual = b * eig.eigenvectors[(k - 1, idx)].abs();
            last_residual = residual;
            if residual <= tol || b < 1e-12 {
                return Ok(GapEstimate {
                    gap: 1.0 - theta,
                    error_bound: residual,
                    iterations: k,
                });
            }
        }
        if k == max_iter {
            break;
        }
        betas.push(b);
        let next: Vec<f64> = w.iter().map(|x| x / b).collect();
        basis.push(next);
    }
    Err(LrpError::NonConvergence {
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Weighted simple paths stored contiguously.
#[derive(Debug, Clone, Default)]
pub struct Flow {
    vertices: Vec<u32>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
}

impl Flow {
    pub fn new() -> Self {
        Flow {
            vertices: Vec::new(),
            offsets: vec![0],
            weights: Vec::new(),
        }
    }

    pub fn push_path(&mut self, path: &[u32], weight: f64) {
        self.vertices.extend_from_slice(path);
        self.offsets.push(self.vertices.len());
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn path(&self, i: usize) -> (&[u32], f64) {
        (
            &self.vertices[self.offsets[i]..self.offsets[i + 1]],
            self.weights[i],
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        (0..self.len()).map(move |i| self.path(i))
    }

    /// Longest path, in edges.
    pub fn max_path_len(&self) -> usize {
        self.iter().map(|(p, _)| p.len() - 1).max().unwrap_or(0)
    }
}

/// Demand violations beyond this relative error are rejected.
pub const DEMAND_RTOL: f64 = 1e-12;

/// Validates the flow and returns the oriented-edge loads (indexed by
/// adjacency slot).
pub fn edge_loads(chain: &ReversibleChain, flow: &Flow) -> Result<Vec<f64>> {
    let g = &chain.graph;
    let n = chain.len();
    let mut loads = vec![0.0; g.degree_sum()];
    let mut demand: HashMap<(u32, u32), f64> = HashMap::with_capacity(n * n);
    let mut mark = vec![usize::MAX; n];
    for (i, (path, w)) in flow.iter().enumerate() {
        if path.len() < 2 {
            return Err(LrpError::invalid(format!("path {i} has no edge")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(LrpError::invalid(format!("path {i} has weight {w}")));
        }
        let len = (path.len() - 1) as f64;
        for &v in path {
            if v as usize >= n {
                return Err(LrpError::invalid(format!("path {i} leaves the chain")));
            }
            if mark[v as usize] == i {
                return Err(LrpError::invalid(format!("path {i} is not simple")));
            }
            mark[v as usize] = i;
        }
        for e in path.windows(2) {
            let slot = g.edge_slot(e[0], e[1]).ok_or_else(|| {
                LrpError::invalid(format!("path {i} uses non-edge ({},{})", e[0], e[1]))
            })?;
            loads[slot] += w * len;
        }
        *demand.entry((path[0], *path.last().unwrap())).or_insert(0.0) += w;
    }
    for x in 0..n as u32 {
        for y in 0..n as u32 {
            if x == y {
                continue;
            }
            let want = chain.pi(x) * chain.pi(y);
            let got = demand.get(&(x, y)).copied().unwrap_or(0.0);
            if (got - want).abs() > DEMAND_RTOL * want {
                return Err(LrpError::invalid(format!(
                    "demand of pair ({x},{y}) is {got:e}, expected {want:e}"
                )));
            }
        }
    }
    Ok(loads)
}

/// `ρ(f)`; errors on any demand or path violation.
pub fn flow_congestion(chain: &ReversibleChain, flow: &Flow) -> Result<f64> {
    let loads = edge_loads(chain, flow)?;
    let q = chain.edge_measure();
    Ok(loads.iter().fold(0.0f64, |m, &l| m.max(l)) / q)
}

/// `1/ρ(f)`, a lower bound on `1 - λ₂`.
pub fn gap_lower_bound_from_flow(chain: &ReversibleChain, flow: &Flow) -> Result<f64> {
    Ok(1.0 / flow_congestion(chain, flow)?)
}

pub const DEFAULT_GEODESIC_CAP: usize = 16;

/// Demand split equally over BFS geodesics (up to `cap` per pair in
/// lexicographic order; mass of the geodesics beyond the cap goes to the
/// lexicographically least one).
pub fn geodesic_flow(chain: &ReversibleChain) -> Flow {
    geodesic_flow_capped(chain, DEFAULT_GEODESIC_CAP)
}

pub fn geodesic_flow_capped(chain: &ReversibleChain, cap: usize) -> Flow {
    let g = &chain.graph;
    let n = chain.len();
    let cap = cap.max(1);
    let dist: Vec<Vec<u32>> = (0..n as u32)
        .into_par_iter()
        .map(|y| bfs_distances(g, y))
        .collect();
    let per_source: Vec<Flow> = (0..n as u32)
        .into_par_iter()
        .map(|x| {
            let mut flow = Flow::new();
            let dist_x = &dist[x as usize];
            // number of geodesics from x, saturating
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by_key(|&v| dist_x[v as usize]);
            let mut count = vec![0f64; n];
            count[x as usize] = 1.0;
            for &v in &order {
                if v == x {
                    continue;
                }
                count[v as usize] = g
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| dist_x[u as usize] + 1 == dist_x[v as usize])
                    .map(|&u| count[u as usize])
                    .sum();
            }
            for y in 0..n as u32 {
                if y == x {
                    continue;
                }
                let paths = enumerate_geodesics(g, x, y, &dist[y as usize], cap);
                let total = count[y as usize];
                let demand = chain.pi(x) * chain.pi(y);
                let share = demand / total;
                let listed = paths.len() as f64;
                for (i, p) in paths.iter().enumerate() {
                    let w = if i == 0 {
                        share + (total - listed) * share
                    } else {
                        share
                    };
                    flow.push_path(p, w);
                }
            }
            flow
        })
        .collect();
    let mut out = Flow::new();
    for f in per_source {
        for (p, w) in f.iter() {
            out.push_path(p, w);
        }
    }
    out
}

/// Up to `cap` shortest paths from `x` to `y` in lexicographic order.
fn enumerate_geodesics(g: &Graph, x: u32, y: u32, dist_y: &[u32], cap: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut path = vec![x];
    fn rec(g: &Graph, y: u32, dist_y: &[u32], cap: usize, path: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if out.len() >= cap {
            return;
        }
        let u = *path.last().unwrap();
        if u == y {
            out.push(path.clone());
            return;
        }
        for &w in g.neighbors(u) {
            if dist_y[w as usize] + 1 == dist_y[u as usize] {
                path.push(w);
                rec(g, y, dist_y, cap, path, out);
                path.pop();
                if out.len() >= cap {
                    return;
                }
            }
        }
    }
    rec(g, y, dist_y, cap, &mut path, &mut out);
    out
}

/// Coarse graph on parts: `i ~ k` when some fine edge joins them.
pub fn coarse_graph(fine: &Graph, part_of: &[u32], num_parts: usize) -> Graph {
    let mut edges = Vec::new();
    for (u, v) in fine.edges() {
        let (a, b) = (part_of[u as usize], part_of[v as usize]);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    Graph::from_edges(num_parts, &edges).expect("part ids in range")
}

/// One fine edge per coarse edge: for parts `i < k`, the lexicographically
/// least `(x, y)` with `x` in `i`, `y` in `k`.
#[derive(Debug, Clone, Default)]
pub struct DesignatedEdges {
    map: HashMap<(u32, u32), (u32, u32)>,
}

impl DesignatedEdges {
    pub fn from_partition(fine: &Graph, part_of: &[u32]) -> Self {
        let mut map: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
        for x in 0..fine.num_vertices() as u32 {
            for &y in fine.neighbors(x) {
                let (i, k) = (part_of[x as usize], part_of[y as usize]);
                if i < k {
                    map.entry((i, k))
                        .and_modify(|e| {
                            if (x, y) < *e {
                                *e = (x, y)
                            }
                        })
                        .or_insert((x, y));
                }
            }
        }
        DesignatedEdges { map }
    }

    pub fn insert(&mut self, i: u32, k: u32, x: u32, y: u32) {
        if i < k {
            self.map.insert((i, k), (x, y));
        } else {
            self.map.insert((k, i), (y, x));
        }
    }

    pub fn remove(&mut self, i: u32, k: u32) {
        self.map.remove(&(i.min(k), i.max(k)));
    }

    /// Fine edge leaving part `i` into part `k`.
    pub fn oriented(&self, i: u32, k: u32) -> Option<(u32, u32)> {
        if i < k {
            self.map.get(&(i, k)).copied()
        } else {
            self.map.get(&(k, i)).map(|&(x, y)| (y, x))
        }
    }
}

/// BFS geodesics inside each part's induced subgraph.
#[derive(Debug, Clone)]
pub struct IntraPartGeodesics {
    members: Vec<Vec<u32>>,
    local: Vec<u32>,
    /// `parents[p][s * len + t]` = predecessor of `t` on the BFS tree from `s`.
    parents: Vec<Vec<u32>>,
    diameters: Vec<u32>,
}

impl IntraPartGeodesics {
    pub fn compute(fine: &Graph, part_of: &[u32], num_parts: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); num_parts];
        let mut local = vec![0u32; fine.num_vertices()];
        for (v, &p) in part_of.iter().enumerate() {
            local[v] = members[p as usize].len() as u32;
            members[p as usize].push(v as u32);
        }
        let results: Vec<Result<(Vec<u32>, u32)>> = members
            .par_iter()
            .enumerate()
            .map(|(p, mem)| {
                let (sub, _) = fine.induced_subgraph(mem);
                let len = mem.len();
                let mut parents = vec![u32::MAX; len * len];
                let mut diam = 0;
                for s in 0..len as u32 {
                    let mut dist = vec![u32::MAX; len];
                    dist[s as usize] = 0;
                    parents[s as usize * len + s as usize] = s;
                    let mut q = VecDeque::from([s]);
                    while let Some(u) = q.pop_front() {
                        for &w in sub.neighbors(u) {
                            if dist[w as usize] == u32::MAX {
                                dist[w as usize] = dist[u as usize] + 1;
                                parents[s as usize * len + w as usize] = u;
                                q.push_back(w);
                            }
                        }
                    }
                    if dist.contains(&u32::MAX) {
                        return Err(LrpError::invalid(format!("part {p} is not connected")));
                    }
                    diam = diam.max(*dist.iter().max().unwrap());
                }
                Ok((parents, diam))
            })
            .collect();
        let mut parents = Vec::with_capacity(num_parts);
        let mut diameters = Vec::with_capacity(num_parts);
        for r in results {
            let (p, d) = r?;
            parents.push(p);
            diameters.push(d);
        }
        Ok(IntraPartGeodesics {
            members,
            local,
            parents,
            diameters,
        })
    }

    pub fn max_diameter(&self) -> u32 {
        self.diameters.iter().copied().max().unwrap_or(0)
    }

    /// Appends the geodesic from `x` to `y` (same part), excluding `x`.
    fn extend_path(&self, part: u32, x: u32, y: u32, out: &mut Vec<u32>) {
        let mem = &self.members[part as usize];
        let len = mem.len();
        let (ls, mut lt) = (self.local[x as usize], self.local[y as usize]);
        let start = out.len();
        let table = &self.parents[part as usize];
        while lt != ls {
            out.push(mem[lt as usize]);
            lt = table[ls as usize * len + lt as usize];
        }
        out[start..].reverse();
    }

    pub fn geodesic(&self, part: u32, x: u32, y: u32) -> Vec<u32> {
        let mut p = vec![x];
        self.extend_path(part, x, y, &mut p);
        p
    }
}

/// Lifts a coarse flow on parts to the fine graph: same-part demand uses the
/// intra-part geodesic, cross-part demand follows each coarse path through
/// designated edges with intra-part geodesics in between, weighted by
/// `f_c(η)/(π_c(i)π_c(k)) · π(x)π(y)`.
pub fn interpolated_flow(
    fine: &ReversibleChain,
    part_of: &[u32],
    coarse: &ReversibleChain,
    coarse_flow: &Flow,
    designated: &DesignatedEdges,
    geodesics: &IntraPartGeodesics,
) -> Result<Flow> {
    let n = fine.len();
    if part_of.len() != n {
        return Err(LrpError::invalid("partition does not cover the fine chain"));
    }
    let k = coarse.len();
    if part_of.iter().any(|&p| p as usize >= k) {
        return Err(LrpError::invalid("part id outside the coarse chain"));
    }
    let mut by_pair: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (i, (p, _)) in coarse_flow.iter().enumerate() {
        by_pair.entry((p[0], *p.last().unwrap())).or_default().push(i);
    }
    // validate designated edges for every coarse edge used
    for (p, _) in coarse_flow.iter() {
        for e in p.windows(2) {
            if designated.oriented(e[0], e[1]).is_none() {
                return Err(LrpError::invalid(format!(
                    "no designated fine edge for coarse edge ({},{})",
                    e[0], e[1]
                )));
            }
        }
    }
    let chunks: Vec<Flow> = (0..n as u32)
        .into_par_iter()
        .map(|x| {
            let mut flow = Flow::new();
            let i = part_of[x as usize];
            let mut buf = Vec::new();
            for y in 0..n as u32 {
                if y == x {
                    continue;
                }
                let kk = part_of[y as usize];
                let demand = fine.pi(x) * fine.pi(y);
                if i == kk {
                    flow.push_path(&geodesics.geodesic(i, x, y), demand);
                    continue;
                }
                let scale = demand / (coarse.pi(i) * coarse.pi(kk));
                for &pi in by_pair.get(&(i, kk)).map(|v| v.as_slice()).unwrap_or(&[]) {
                    let (eta, w) = coarse_flow.path(pi);
                    buf.clear();
                    buf.push(x);
                    let mut cur = x;
                    for e in eta.windows(2) {
                        let (a, b) = designated.oriented(e[0], e[1]).unwrap();
                        geodesics.extend_path(e[0], cur, a, &mut buf);
                        buf.push(b);
                        cur = b;
                    }
                    geodesics.extend_path(kk, cur, y, &mut buf);
                    flow.push_path(&buf, w * scale);
                }
            }
            flow
        })
        .collect();
    let mut out = Flow::new();
    for c in chunks {
        for (p, w) in c.iter() {
            out.push_path(p, w);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingTime {
    Finite(u64),
    /// Periodic chain: total variation never drops below `1/2`-ish.
    NeverBipartite,
}

/// Smallest `t` with `max_x ||P^t(x,·) - π||_TV <= eps`.
pub fn mixing_time_tv(chain: &ReversibleChain, eps: f64, max_steps: u64) -> Result<MixingTime> {
    let n = chain.len();
    if n > DENSE_CAP {
        return Err(LrpError::invalid("mixing time limited to the dense cap"));
    }
    if chain.holding == 0.0 && chain.is_bipartite() {
        return Ok(MixingTime::NeverBipartite);
    }
    let pi = chain.stationary();
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let mut r = vec![0.0; n];
            r[x] = 1.0;
            r
        })
        .collect();
    let tv = |r: &[f64]| 0.5 * r.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
    for t in 1..=max_steps {
        rows.par_iter_mut().for_each(|r| {
            let mut next = vec![0.0; n];
            chain.push_row(r, &mut next);
            *r = next;
        });
        let worst = rows.par_iter().map(|r| tv(r)).reduce(|| 0.0, f64::max);
        if worst <= eps {
            return Ok(MixingTime::Finite(t));
        }
    }
    Err(LrpError::NonConvergence {
        iterations: max_steps as usize,
        residual: f64::NAN,
    })
}
