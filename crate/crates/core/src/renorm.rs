//! Staged construction of a connected partition of the largest cluster in
//! a box.
//!
//! Five disjoint pair sets are revealed in order:
//!
//! 1. pairs inside one `N4` block (block cores `C*`);
//! 2. core–core pairs in different `N4` blocks with `|x-y|_inf <= N2`;
//! 3. every other pair with `|x-y|_inf <= N3` (the graph `X_{N3}`);
//! 4. pairs with a non-core endpoint and `|x-y|_inf > N3`;
//! 5. core–core pairs with `|x-y|_inf > N2`.
//!
//! Their union is every pair of the region. Each stage's predicate depends
//! only on earlier stages, and each stage draws from its own stream, so the
//! union has the law of a one-shot sample.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{component_diameter, connected_components, DiameterMode};
use crate::error::{LrpError, Result};
use crate::fit::median;
use crate::graph::{build_graph, Graph, LatticeGraph, Provenance};
use crate::lattice::Lattice;
use crate::params::{Geometry, LrpParams};
use crate::sampler::{sample_stage_edges, Clause, PairPredicate};

/// Label of a vertex that no part has claimed.
pub const UNALLOCATED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderMode {
    /// Sides from the asymptotic formulas.
    #[serde(rename = "paper_formula")]
    Formula,
    /// Explicit sides, ordering still enforced.
    #[serde(rename = "toy_override")]
    ToyOverride,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderOverrides {
    pub n1: Option<u64>,
    pub n2: Option<u64>,
    pub n3: Option<u64>,
    pub n4: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub n4: u64,
    pub s_prime: f64,
    pub rho: f64,
    pub feasible: bool,
    pub mode: LadderMode,
    pub explanation: Option<String>,
}

impl ScaleLadder {
    pub fn sides(&self) -> [u64; 4] {
        [self.n1, self.n2, self.n3, self.n4]
    }
}

fn saturating_u64(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        0
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x as u64
    }
}

fn ordering_problems(n0: u64, n1: u64, n2: u64, n3: u64, n4: u64) -> Vec<String> {
    let mut why = Vec::new();
    if n1 > n0 {
        why.push(format!("N1={n1} exceeds N={n0}"));
    }
    if n2 >= n1 {
        why.push(format!("N2={n2} is not below N1={n1}"));
    }
    if n3 >= n2 {
        why.push(format!("N3={n3} is not below N2={n2}"));
    }
    if n4 >= n3 {
        why.push(format!("N4={n4} is not below N3={n3}"));
    }
    if n4 < 2 {
        why.push(format!("N4={n4} is below 2"));
    }
    why
}

/// Builds the scale ladder. Infeasible ladders are returned with
/// `feasible = false` and an explanation; only malformed inputs error.
pub fn make_ladder(
    n: u64,
    params: &LrpParams,
    s_prime: f64,
    rho: f64,
    mode: LadderMode,
    overrides: &LadderOverrides,
) -> Result<ScaleLadder> {
    params.validate()?;
    let d = params.d as f64;
    if !(s_prime > params.s && s_prime < 2.0 * d) {
        return Err(LrpError::invalid(format!(
            "s' = {s_prime} must lie in (s, 2d) = ({}, {})",
            params.s,
            2.0 * d
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(LrpError::invalid(format!("rho = {rho} must lie in (0, 1)")));
    }
    let (n1, n2, n3, n4) = match mode {
        LadderMode::Formula => {
            let n1 = overrides.n1.unwrap_or(n);
            let l1 = (n1 as f64).ln();
            let n2 = saturating_u64(
                ((n1 as f64).powf((params.s - d) / d) * l1.max(0.0).powf(3.0 / d)).floor(),
            );
            let n3 = saturating_u64((n2 as f64).sqrt().floor());
            let n4 = saturating_u64(
                (n as f64).ln().max(0.0).powf(2.0 / (2.0 * d - s_prime)).ceil(),
            );
            (n1, n2, n3, n4)
        }
        LadderMode::ToyOverride => {
            let get = |v: Option<u64>, name: &str| {
                v.ok_or_else(|| LrpError::invalid(format!("toy ladder needs {name}")))
            };
            (
                get(overrides.n1, "n1")?,
                get(overrides.n2, "n2")?,
                get(overrides.n3, "n3")?,
                get(overrides.n4, "n4")?,
            )
        }
    };
    let why = ordering_problems(n, n1, n2, n3, n4);
    Ok(ScaleLadder {
        n0: n,
        n1,
        n2,
        n3,
        n4,
        s_prime,
        rho,
        feasible: why.is_empty(),
        mode,
        explanation: (!why.is_empty()).then(|| why.join("; ")),
    })
}

/// Axis-aligned blocks of one scale tiling a box region. Intervals are
/// shared by every axis; blocks are indexed row-major with the first axis
/// slowest, like lattice vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    pub d: usize,
    /// Nominal side; blocks at the far boundary may be shorter, or up to
    /// half a side longer.
    pub side: u64,
    intervals: Vec<(u64, u64)>,
    axis_of: Vec<u32>,
}

impl BlockGrid {
    fn from_intervals(d: usize, side: u64, intervals: Vec<(u64, u64)>, region_side: u64) -> Self {
        let mut axis_of = vec![0u32; region_side as usize];
        for (i, &(a, b)) in intervals.iter().enumerate() {
            for o in a..b {
                axis_of[o as usize] = i as u32;
            }
        }
        BlockGrid {
            d,
            side,
            intervals,
            axis_of,
        }
    }

    /// Single-scale tiling of the region by blocks of side `side`.
    pub fn uniform(lattice: &Lattice, side: u64) -> Result<Self> {
        Ok(Self::nested(lattice, &[side])?.pop().unwrap())
    }

    /// Nested tilings: each block at scale `sides[j+1]` is obtained by
    /// tiling one block of scale `sides[j]`, clipped at its far edge. A far
    /// remnant shorter than half a side is merged into the block before it.
    pub fn nested(lattice: &Lattice, sides: &[u64]) -> Result<Vec<Self>> {
        if lattice.geometry != Geometry::Box {
            return Err(LrpError::invalid("block grids are defined on box regions"));
        }
        let region = lattice.side();
        let mut out = Vec::with_capacity(sides.len());
        let mut parents = vec![(0u64, region)];
        for &s in sides {
            if s == 0 {
                return Err(LrpError::invalid("block side must be positive"));
            }
            let mut iv = Vec::new();
            for &(a, b) in &parents {
                let first = iv.len();
                let mut x = a;
                while x < b {
                    iv.push((x, (x + s).min(b)));
                    x += s;
                }
                // a sliver shorter than half a side joins its neighbour
                let last = iv.len() - 1;
                if last > first && 2 * (iv[last].1 - iv[last].0) < s {
                    iv[last - 1].1 = b;
                    iv.pop();
                }
            }
            let count = (iv.len() as u128).pow(lattice.d as u32);
            if count > u32::MAX as u128 {
                return Err(LrpError::invalid("too many blocks"));
            }
            out.push(Self::from_intervals(lattice.d, s, iv.clone(), region));
            parents = iv;
        }
        Ok(out)
    }

    /// Longest block side along any axis.
    pub fn max_extent(&self) -> u64 {
        self.intervals.iter().map(|(a, b)| b - a).max().unwrap_or(0)
    }

    pub fn per_axis(&self) -> usize {
        self.intervals.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.per_axis().pow(self.d as u32)
    }

    pub fn axis_indices(&self, block: u32) -> Vec<usize> {
        let k = self.per_axis();
        let mut out = vec![0; self.d];
        let mut b = block as usize;
        for i in (0..self.d).rev() {
            out[i] = b % k;
            b /= k;
        }
        out
    }

    fn block_from_axes(&self, axes: &[usize]) -> u32 {
        let k = self.per_axis();
        axes.iter().fold(0usize, |acc, &a| acc * k + a) as u32
    }

    /// Per-axis offset ranges `[start, end)` of a block.
    pub fn block_ranges(&self, block: u32) -> Vec<(u64, u64)> {
        self.axis_indices(block)
            .into_iter()
            .map(|i| self.intervals[i])
            .collect()
    }

    pub fn block_volume(&self, block: u32) -> u64 {
        self.block_ranges(block).iter().map(|(a, b)| b - a).product()
    }

    pub fn block_of(&self, lattice: &Lattice, v: u32) -> u32 {
        let oc = lattice.offset_coords(v);
        let axes: Vec<usize> = oc.iter().map(|&o| self.axis_of[o as usize] as usize).collect();
        self.block_from_axes(&axes)
    }

    pub fn labels(&self, lattice: &Lattice) -> Vec<u32> {
        (0..lattice.num_vertices() as u32)
            .into_par_iter()
            .map(|v| self.block_of(lattice, v))
            .collect()
    }

    /// The block of `coarse` containing block `block` of this (finer) grid.
    pub fn parent_in(&self, block: u32, coarse: &BlockGrid) -> u32 {
        let axes: Vec<usize> = self
            .axis_indices(block)
            .into_iter()
            .map(|i| coarse.axis_of[self.intervals[i].0 as usize] as usize)
            .collect();
        coarse.block_from_axes(&axes)
    }

    /// Blocks at `l_inf` distance 1 (sharing a face, edge or corner).
    pub fn neighbours(&self, block: u32) -> Vec<u32> {
        let k = self.per_axis() as i64;
        let base = self.axis_indices(block);
        let mut out = Vec::new();
        let total = 3usize.pow(self.d as u32);
        for code in 0..total {
            let mut c = code;
            let mut axes = Vec::with_capacity(self.d);
            let mut ok = true;
            let mut same = true;
            for &b in &base {
                let delta = (c % 3) as i64 - 1;
                c /= 3;
                same &= delta == 0;
                let a = b as i64 + delta;
                ok &= (0..k).contains(&a);
                axes.push(a as usize);
            }
            if ok && !same {
                out.push(self.block_from_axes(&axes));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn adjacent_pairs(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for b in 0..self.num_blocks() as u32 {
            for c in self.neighbours(b) {
                if b < c {
                    out.push((b, c));
                }
            }
        }
        out
    }
}

/// Outcome of one stage event with the measured quantities behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFlag {
    pub ok: bool,
    pub measures: BTreeMap<String, f64>,
    pub reason: Option<String>,
}

impl StageFlag {
    fn new() -> Self {
        StageFlag {
            ok: true,
            measures: BTreeMap::new(),
            reason: None,
        }
    }

    fn measure(&mut self, name: &str, v: f64) {
        self.measures.insert(name.to_string(), v);
    }

    fn fail(&mut self, why: String) {
        self.ok = false;
        match &mut self.reason {
            Some(r) => {
                r.push_str("; ");
                r.push_str(&why);
            }
            None => self.reason = Some(why),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFlags {
    pub o: StageFlag,
    pub a: StageFlag,
    pub e: StageFlag,
    pub f: StageFlag,
    pub r: StageFlag,
}

impl StageFlags {
    /// `O ∧ A ∧ E ∧ F`, under which the partition invariants must hold.
    pub fn core_events(&self) -> bool {
        self.o.ok && self.a.ok && self.e.ok && self.f.ok
    }

    pub fn compact(&self) -> String {
        let b = |f: &StageFlag| if f.ok { '1' } else { '0' };
        format!(
            "O{}A{}E{}F{}R{}",
            b(&self.o),
            b(&self.a),
            b(&self.e),
            b(&self.f),
            b(&self.r)
        )
    }
}

/// Thresholds for events E and F and the final size check in R. Default
/// `rho1`/`rho3` are the ladder's density target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventThresholds {
    pub rho1: Option<f64>,
    pub rho2: f64,
    pub rho3: Option<f64>,
    pub rho4: f64,
    /// Multiplies `N4^{s-d} ln² N`, the bound on small `X_{N3}` clusters.
    pub small_cluster_factor: f64,
    /// Multiplies `N4^{s-d} ln³ N`, the bound on phase-2 diameter growth.
    pub diameter_increment_factor: f64,
    /// Multiplies `N4^{s-d} ln⁴ N`, the bound on final small components.
    pub final_small_factor: f64,
}

impl Default for EventThresholds {
    fn default() -> Self {
        EventThresholds {
            rho1: None,
            rho2: 3.0,
            rho3: None,
            rho4: 4.0,
            small_cluster_factor: 1.0,
            diameter_increment_factor: 1.0,
            final_small_factor: 1.0,
        }
    }
}

/// One cell of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub id: u32,
    /// Index of the anchoring block in its grid.
    pub anchor_block: u32,
    /// Sorted region vertex indices.
    pub vertices: Vec<u32>,
    pub volume: usize,
    /// Degree sum inside the part's induced subgraph.
    pub internal_degree_sum: usize,
    /// `None` when the induced subgraph is disconnected.
    pub diameter: Option<u32>,
    pub core_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Side of the anchoring blocks.
    pub block_side: u64,
    /// Part id per region vertex, [`UNALLOCATED`] outside the partition.
    pub part_of: Vec<u32>,
    pub parts: Vec<Part>,
    pub flags: Option<StageFlags>,
}

impl Partition {
    pub fn covered(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.parts.iter().flat_map(|p| p.vertices.iter().copied()).collect();
        v.sort_unstable();
        v
    }
}

/// Builds parts from per-vertex block labels; part ids follow anchor order.
fn parts_from_labels(graph: &Graph, label: &[u32], core: &[bool], block_side: u64) -> (Vec<u32>, Vec<Part>) {
    let mut by_block: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (v, &l) in label.iter().enumerate() {
        if l != UNALLOCATED {
            by_block.entry(l).or_default().push(v as u32);
        }
    }
    let blocks: Vec<(u32, Vec<u32>)> = by_block.into_iter().collect();
    let parts: Vec<Part> = blocks
        .into_par_iter()
        .enumerate()
        .map(|(id, (anchor, vertices))| {
            let (sub, _) = graph.induced_subgraph(&vertices);
            let diameter = component_diameter(&sub, DiameterMode::Exact)
                .ok()
                .map(|d| d.value);
            Part {
                id: id as u32,
                anchor_block: anchor,
                volume: vertices.len(),
                internal_degree_sum: sub.degree_sum(),
                diameter,
                core_count: vertices.iter().filter(|&&v| core[v as usize]).count(),
                vertices,
            }
        })
        .collect();
    let _ = block_side;
    let mut part_of = vec![UNALLOCATED; label.len()];
    for p in &parts {
        for &v in &p.vertices {
            part_of[v as usize] = p.id;
        }
    }
    (part_of, parts)
}

/// Layered allocation: sources keep their label; a vertex at graph
/// distance `k > 0` from the sources takes the smallest label among its
/// neighbours at distance `k - 1`. Every label class is connected whenever
/// its sources are. Returns labels and distances ([`UNALLOCATED`] when
/// unreachable).
pub fn layered_allocation(graph: &Graph, source_label: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let n = graph.num_vertices();
    let mut dist = vec![UNALLOCATED; n];
    let mut order: Vec<u32> = Vec::with_capacity(n);
    for (v, &l) in source_label.iter().enumerate() {
        if l != UNALLOCATED {
            dist[v] = 0;
            order.push(v as u32);
        }
    }
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &w in graph.neighbors(u) {
            if dist[w as usize] == UNALLOCATED {
                dist[w as usize] = dist[u as usize] + 1;
                order.push(w);
            }
        }
    }
    let mut label = source_label.to_vec();
    // BFS order is by layer; labels only read the previous layer
    for &v in &order {
        let k = dist[v as usize];
        if k == 0 {
            continue;
        }
        label[v as usize] = graph
            .neighbors(v)
            .iter()
            .filter(|&&w| dist[w as usize] == k - 1)
            .map(|&w| label[w as usize])
            .min()
            .unwrap();
    }
    (label, dist)
}

/// Stage 1: block cores.
#[derive(Debug, Clone)]
pub struct BlockCores {
    pub grid: BlockGrid,
    pub cell: Arc<Vec<u32>>,
    pub edges: Vec<(u32, u32)>,
    /// Largest internal component of each block (sorted vertices).
    pub cores: Vec<Vec<u32>>,
    pub occupied: Vec<bool>,
    /// Union of the cores of occupied blocks.
    pub core_mask: Arc<Vec<bool>>,
    pub flag_o: StageFlag,
}

/// Same-cell pairs; `extent` is the longest block side of the cell grid.
pub fn stage1_predicate(cell: &Arc<Vec<u32>>, extent: u64) -> PairPredicate {
    PairPredicate::all()
        .linf(1, extent.saturating_sub(1).max(1))
        .and(Clause::SameCell(cell.clone()))
}

fn block_cores(
    lattice: &Lattice,
    grid: BlockGrid,
    params: &LrpParams,
    rho: f64,
    seed: u64,
) -> Result<BlockCores> {
    let cell = Arc::new(grid.labels(lattice));
    let edges = sample_stage_edges(lattice, &stage1_predicate(&cell, grid.max_extent()), params, seed, 1)?;
    let g = Graph::from_edges(lattice.num_vertices(), &edges)?;
    let lab = connected_components(&g);
    // components come ordered by size, then smallest vertex
    let nb = grid.num_blocks();
    let mut winner = vec![UNALLOCATED; nb];
    let mut rep = vec![UNALLOCATED; lab.sizes.len()];
    for (v, &c) in lab.labels.iter().enumerate() {
        if rep[c as usize] == UNALLOCATED {
            rep[c as usize] = v as u32;
        }
    }
    for (c, &r) in rep.iter().enumerate() {
        let b = cell[r as usize] as usize;
        if winner[b] == UNALLOCATED {
            winner[b] = c as u32;
        }
    }
    let mut cores = vec![Vec::new(); nb];
    for (v, &c) in lab.labels.iter().enumerate() {
        let b = cell[v] as usize;
        if winner[b] == c {
            cores[b].push(v as u32);
        }
    }
    let occupied: Vec<bool> = (0..nb)
        .map(|b| cores[b].len() as f64 >= rho * grid.block_volume(b as u32) as f64)
        .collect();
    let mut mask = vec![false; lattice.num_vertices()];
    for (b, c) in cores.iter().enumerate() {
        if occupied[b] {
            for &v in c {
                mask[v as usize] = true;
            }
        }
    }
    let mut flag = StageFlag::new();
    let min_density = (0..nb)
        .map(|b| cores[b].len() as f64 / grid.block_volume(b as u32) as f64)
        .fold(f64::INFINITY, f64::min);
    let empty = occupied.iter().filter(|&&o| !o).count();
    flag.measure("min_core_density", min_density);
    flag.measure("rho", rho);
    flag.measure("unoccupied_blocks", empty as f64);
    flag.measure("blocks", nb as f64);
    if empty > 0 {
        flag.fail(format!("{empty} of {nb} blocks below density {rho}"));
    }
    Ok(BlockCores {
        grid,
        cell,
        edges,
        cores,
        occupied,
        core_mask: Arc::new(mask),
        flag_o: flag,
    })
}

fn check_ladder(lattice: &Lattice, ladder: &ScaleLadder) -> Result<Vec<BlockGrid>> {
    if !ladder.feasible {
        return Err(LrpError::Infeasible(
            ladder
                .explanation
                .clone()
                .unwrap_or_else(|| "infeasible ladder".into()),
        ));
    }
    BlockGrid::nested(lattice, &ladder.sides())
}

pub fn stage1_block_cores(
    lattice: &Lattice,
    ladder: &ScaleLadder,
    params: &LrpParams,
    seed: u64,
) -> Result<BlockCores> {
    let grids = check_ladder(lattice, ladder)?;
    block_cores(lattice, grids[3].clone(), params, ladder.rho, seed)
}

/// Half the median core density of full-size `N4` blocks in a pilot run.
pub fn calibrate_rho(lattice: &Lattice, params: &LrpParams, n4: u64, seed: u64) -> Result<f64> {
    let grid = BlockGrid::uniform(lattice, n4)?;
    let full = n4.pow(lattice.d as u32);
    let bc = block_cores(lattice, grid, params, 0.5, seed)?;
    let dens: Vec<f64> = (0..bc.grid.num_blocks())
        .filter(|&b| bc.grid.block_volume(b as u32) == full)
        .map(|b| bc.cores[b].len() as f64 / full as f64)
        .collect();
    if dens.is_empty() {
        return Err(LrpError::InsufficientData("no full-size pilot block".into()));
    }
    Ok((0.5 * median(&dens)).clamp(f64::MIN_POSITIVE, 0.999))
}

/// Stage 2: linking adjacent cores.
#[derive(Debug, Clone)]
pub struct CoreLinks {
    pub edges: Vec<(u32, u32)>,
    /// Region-indexed graph of stage-1 and stage-2 edges among core vertices.
    pub core_graph: Graph,
    pub unlinked_pairs: Vec<(u32, u32)>,
    pub core_connected: bool,
    pub flag_a: StageFlag,
}

pub fn stage2_predicate(stage1: &BlockCores, n2: u64) -> PairPredicate {
    PairPredicate::all()
        .linf(1, n2)
        .and(Clause::BothIn(stage1.core_mask.clone()))
        .and(Clause::DifferentCell(stage1.cell.clone()))
}

pub fn stage2_link_cores(
    lattice: &Lattice,
    stage1: &BlockCores,
    ladder: &ScaleLadder,
    params: &LrpParams,
    seed: u64,
) -> Result<CoreLinks> {
    let edges = sample_stage_edges(lattice, &stage2_predicate(stage1, ladder.n2), params, seed, 2)?;
    let core = &stage1.core_mask;
    let mut all: Vec<(u32, u32)> = stage1
        .edges
        .iter()
        .copied()
        .filter(|&(u, v)| core[u as usize] && core[v as usize])
        .collect();
    all.extend_from_slice(&edges);
    let core_graph = Graph::from_edges(lattice.num_vertices(), &all)?;
    let mut linked = std::collections::HashSet::new();
    for &(u, v) in &edges {
        let (a, b) = (stage1.cell[u as usize], stage1.cell[v as usize]);
        linked.insert((a.min(b), a.max(b)));
    }
    let mut unlinked = Vec::new();
    let mut considered = 0;
    for (a, b) in stage1.grid.adjacent_pairs() {
        if stage1.occupied[a as usize] && stage1.occupied[b as usize] {
            considered += 1;
            if !linked.contains(&(a, b)) {
                unlinked.push((a, b));
            }
        }
    }
    let core_vertices: Vec<u32> = (0..lattice.num_vertices() as u32)
        .filter(|&v| core[v as usize])
        .collect();
    let core_connected = if core_vertices.is_empty() {
        false
    } else {
        let (sub, _) = core_graph.induced_subgraph(&core_vertices);
        connected_components(&sub).sizes.len() == 1
    };
    let mut flag = StageFlag::new();
    flag.measure("adjacent_occupied_pairs", considered as f64);
    flag.measure("unlinked_pairs", unlinked.len() as f64);
    flag.measure("core_connected", core_connected as u8 as f64);
    if !unlinked.is_empty() {
        flag.fail(format!(
            "{} adjacent core pairs without a direct edge",
            unlinked.len()
        ));
    }
    if considered == 0 && stage1.occupied.iter().filter(|&&o| o).count() >= 2 {
        flag.fail("no adjacent occupied blocks".into());
    }
    Ok(CoreLinks {
        edges,
        core_graph,
        unlinked_pairs: unlinked,
        core_connected,
        flag_a: flag,
    })
}

/// Result of one allocation phase.
#[derive(Debug, Clone)]
pub struct Allocation {
    /// Pairs revealed by this phase.
    pub edges: Vec<(u32, u32)>,
    /// Cumulative revealed graph after this phase.
    pub graph: Graph,
    /// `N2` block per allocated vertex.
    pub label: Vec<u32>,
    /// Distance to the seed set of this phase.
    pub layer: Vec<u32>,
    pub partition: Partition,
    pub flag: StageFlag,
}

pub fn stage3_predicate(stage1: &BlockCores, n3: u64) -> PairPredicate {
    PairPredicate::all()
        .linf(1, n3)
        .and(Clause::EitherOutside(stage1.core_mask.clone()))
        .and(Clause::DifferentCell(stage1.cell.clone()))
}

pub fn stage4_predicate(stage1: &BlockCores, n3: u64) -> PairPredicate {
    PairPredicate::all()
        .linf(n3 + 1, u64::MAX)
        .and(Clause::EitherOutside(stage1.core_mask.clone()))
        .and(Clause::DifferentCell(stage1.cell.clone()))
}

pub fn stage5_predicate(stage1: &BlockCores, n2: u64) -> PairPredicate {
    PairPredicate::all()
        .linf(n2 + 1, u64::MAX)
        .and(Clause::BothIn(stage1.core_mask.clone()))
        .and(Clause::DifferentCell(stage1.cell.clone()))
}

fn ln_n(ladder: &ScaleLadder) -> f64 {
    (ladder.n0 as f64).ln().max(1.0)
}

fn scale_term(ladder: &ScaleLadder, params: &LrpParams, log_power: i32) -> f64 {
    (ladder.n4 as f64).powf(params.s - params.d as f64) * ln_n(ladder).powi(log_power)
}

fn volume_checks(
    flag: &mut StageFlag,
    partition: &Partition,
    grid2: &BlockGrid,
    lo: f64,
    hi: f64,
) {
    let mut present = vec![false; grid2.num_blocks()];
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    for p in &partition.parts {
        present[p.anchor_block as usize] = true;
        let r = p.volume as f64 / grid2.block_volume(p.anchor_block) as f64;
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    let missing = present.iter().filter(|&&x| !x).count();
    flag.measure("min_volume_ratio", if missing > 0 { 0.0 } else { rmin });
    flag.measure("max_volume_ratio", rmax);
    flag.measure("blocks_without_part", missing as f64);
    if missing > 0 {
        flag.fail(format!("{missing} N2 blocks have no part"));
    }
    if rmin < lo {
        flag.fail(format!("part volume ratio {rmin:.4} below {lo}"));
    }
    if rmax > hi {
        flag.fail(format!("part volume ratio {rmax:.4} above {hi}"));
    }
}

fn block_label_of_core(stage1: &BlockCores, grid2: &BlockGrid) -> Vec<u32> {
    let mut label = vec![UNALLOCATED; stage1.cell.len()];
    for (b, core) in stage1.cores.iter().enumerate() {
        if !stage1.occupied[b] {
            continue;
        }
        let anchor = stage1.grid.parent_in(b as u32, grid2);
        for &v in core {
            label[v as usize] = anchor;
        }
    }
    label
}

/// Phase 1: reveal `X_{N3}` and allocate the core's component to `N2`
/// blocks by layered BFS from the core.
#[allow(clippy::too_many_arguments)]
pub fn allocate_phase1(
    lattice: &Lattice,
    stage1: &BlockCores,
    stage2: &CoreLinks,
    grid2: &BlockGrid,
    ladder: &ScaleLadder,
    params: &LrpParams,
    thresholds: &EventThresholds,
    seed: u64,
) -> Result<Allocation> {
    let edges = sample_stage_edges(lattice, &stage3_predicate(stage1, ladder.n3), params, seed, 3)?;
    let mut all = stage1.edges.clone();
    all.extend_from_slice(&stage2.edges);
    all.extend_from_slice(&edges);
    let graph = Graph::from_edges(lattice.num_vertices(), &all)?;
    let seeds = block_label_of_core(stage1, grid2);
    let (label, layer) = layered_allocation(&graph, &seeds);
    let (part_of, parts) = parts_from_labels(&graph, &label, &stage1.core_mask, grid2.side);
    let partition = Partition {
        block_side: grid2.side,
        part_of,
        parts,
        flags: None,
    };
    // clusters of X_{N3} that avoid the core
    let lab = connected_components(&graph);
    let mut touches = vec![false; lab.sizes.len()];
    for (v, &c) in lab.labels.iter().enumerate() {
        if stage1.core_mask[v] {
            touches[c as usize] = true;
        }
    }
    let max_small = (0..lab.sizes.len())
        .filter(|&c| !touches[c])
        .map(|c| lab.sizes[c])
        .max()
        .unwrap_or(0);
    let small_bound = thresholds.small_cluster_factor * scale_term(ladder, params, 2);
    let mut flag = StageFlag::new();
    flag.measure("max_small_cluster", max_small as f64);
    flag.measure("small_cluster_bound", small_bound);
    let diam = partition.parts.iter().filter_map(|p| p.diameter).max().unwrap_or(0);
    flag.measure("max_part_diameter", diam as f64);
    flag.measure(
        "disconnected_parts",
        partition.parts.iter().filter(|p| p.diameter.is_none()).count() as f64,
    );
    let rho1 = thresholds.rho1.unwrap_or(ladder.rho);
    volume_checks(&mut flag, &partition, grid2, rho1, thresholds.rho2);
    if max_small as f64 > small_bound {
        flag.fail(format!(
            "small cluster of size {max_small} exceeds {small_bound:.1}"
        ));
    }
    Ok(Allocation {
        edges,
        graph,
        label,
        layer,
        partition,
        flag,
    })
}

/// Phase 2: reveal long pairs touching non-core vertices and attach the
/// newly connected small clusters by the same layered rule.
#[allow(clippy::too_many_arguments)]
pub fn allocate_phase2(
    lattice: &Lattice,
    stage1: &BlockCores,
    phase1: &Allocation,
    grid2: &BlockGrid,
    ladder: &ScaleLadder,
    params: &LrpParams,
    thresholds: &EventThresholds,
    seed: u64,
) -> Result<Allocation> {
    let edges = sample_stage_edges(lattice, &stage4_predicate(stage1, ladder.n3), params, seed, 4)?;
    let graph = phase1.graph.with_extra_edges(&edges)?;
    let (label, layer) = layered_allocation(&graph, &phase1.label);
    let (part_of, parts) = parts_from_labels(&graph, &label, &stage1.core_mask, grid2.side);
    let partition = Partition {
        block_side: grid2.side,
        part_of,
        parts,
        flags: None,
    };
    let mut flag = StageFlag::new();
    let before: BTreeMap<u32, Option<u32>> = phase1
        .partition
        .parts
        .iter()
        .map(|p| (p.anchor_block, p.diameter))
        .collect();
    let mut max_inc = 0i64;
    for p in &partition.parts {
        if let (Some(Some(b)), Some(a)) = (before.get(&p.anchor_block), p.diameter) {
            max_inc = max_inc.max(a as i64 - *b as i64);
        }
    }
    let inc_bound = thresholds.diameter_increment_factor * scale_term(ladder, params, 3);
    flag.measure("max_diameter_increment", max_inc as f64);
    flag.measure("diameter_increment_bound", inc_bound);
    flag.measure(
        "attached_vertices",
        layer.iter().filter(|&&k| k != UNALLOCATED && k > 0).count() as f64,
    );
    let rho3 = thresholds.rho3.unwrap_or(ladder.rho);
    volume_checks(&mut flag, &partition, grid2, rho3, thresholds.rho4);
    if max_inc as f64 > inc_bound {
        flag.fail(format!(
            "diameter grew by {max_inc}, above {inc_bound:.1}"
        ));
    }
    Ok(Allocation {
        edges,
        graph,
        label,
        layer,
        partition,
        flag,
    })
}

/// Final stage: remaining long core–core pairs and the `N1`-level parts.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub edges: Vec<(u32, u32)>,
    pub graph: LatticeGraph,
    pub partition: Partition,
    pub components_stable: bool,
    pub flag_r: StageFlag,
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_n1_parts(
    lattice: &Lattice,
    stage1: &BlockCores,
    phase2: &Allocation,
    grids: &[BlockGrid],
    ladder: &ScaleLadder,
    params: &LrpParams,
    thresholds: &EventThresholds,
    earlier_ok: bool,
    seed: u64,
) -> Result<Assembled> {
    let edges = sample_stage_edges(lattice, &stage5_predicate(stage1, ladder.n2), params, seed, 5)?;
    let mut all: Vec<(u32, u32)> = phase2.graph.edges().collect();
    all.extend_from_slice(&edges);
    let provenance = Provenance {
        params: Some(params.clone()),
        seed: Some(seed),
        stages: (1..=5).map(|k| format!("stage{k}")).collect(),
    };
    let graph = build_graph(lattice.clone(), &all, Some(params), provenance)?;
    let before = connected_components(&phase2.graph);
    let components_stable = edges
        .iter()
        .all(|&(u, v)| before.labels[u as usize] == before.labels[v as usize]);
    let after = connected_components(&graph.graph);
    let max_small = after.sizes.get(1).copied().unwrap_or(0);
    let (g1, g2) = (&grids[0], &grids[1]);
    let n1_label: Vec<u32> = phase2
        .label
        .iter()
        .map(|&l| {
            if l == UNALLOCATED {
                UNALLOCATED
            } else {
                g2.parent_in(l, g1)
            }
        })
        .collect();
    let (part_of, parts) = parts_from_labels(&graph.graph, &n1_label, &stage1.core_mask, g1.side);
    let disconnected = parts.iter().filter(|p| p.diameter.is_none()).count();
    let bound = thresholds.final_small_factor * scale_term(ladder, params, 4);
    let mut flag = StageFlag::new();
    flag.measure("components_stable", components_stable as u8 as f64);
    flag.measure("second_component", max_small as f64);
    flag.measure("final_small_bound", bound);
    flag.measure("disconnected_n1_parts", disconnected as f64);
    if !earlier_ok {
        flag.fail("an earlier stage event failed".into());
    }
    if !components_stable {
        flag.fail("long core edges merged components".into());
    }
    if max_small as f64 > bound {
        flag.fail(format!("second component {max_small} above {bound:.1}"));
    }
    Ok(Assembled {
        edges,
        graph,
        partition: Partition {
            block_side: g1.side,
            part_of,
            parts,
            flags: None,
        },
        components_stable,
        flag_r: flag,
    })
}

/// Every stage of one construction.
#[derive(Debug, Clone)]
pub struct RenormRun {
    pub ladder: ScaleLadder,
    pub seed: u64,
    pub grids: Vec<BlockGrid>,
    pub stage1: BlockCores,
    pub stage2: CoreLinks,
    pub phase1: Allocation,
    pub phase2: Allocation,
    pub assembled: Assembled,
}

impl RenormRun {
    pub fn flags(&self) -> StageFlags {
        StageFlags {
            o: self.stage1.flag_o.clone(),
            a: self.stage2.flag_a.clone(),
            e: self.phase1.flag.clone(),
            f: self.phase2.flag.clone(),
            r: self.assembled.flag_r.clone(),
        }
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.assembled.graph
    }

    /// Parts anchored at `N2` blocks after both allocation phases.
    pub fn partition_n2(&self) -> Partition {
        let mut p = self.phase2.partition.clone();
        p.flags = Some(self.flags());
        p
    }

    pub fn partition_n1(&self) -> Partition {
        let mut p = self.assembled.partition.clone();
        p.flags = Some(self.flags());
        p
    }

    /// Stage predicates in reveal order.
    pub fn stage_predicates(&self) -> Vec<PairPredicate> {
        vec![
            stage1_predicate(&self.stage1.cell, self.stage1.grid.max_extent()),
            stage2_predicate(&self.stage1, self.ladder.n2),
            stage3_predicate(&self.stage1, self.ladder.n3),
            stage4_predicate(&self.stage1, self.ladder.n3),
            stage5_predicate(&self.stage1, self.ladder.n2),
        ]
    }

    /// Partition invariant violations: disjointness, cover of the largest
    /// component, connected parts, core containment, connected core under
    /// O and A.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = &self.assembled.graph.graph;
        let part = &self.phase2.partition;
        let mut seen = vec![false; g.num_vertices()];
        for p in &part.parts {
            for &v in &p.vertices {
                if seen[v as usize] {
                    out.push(format!("vertex {v} in two parts"));
                }
                seen[v as usize] = true;
            }
        }
        let lab = connected_components(g);
        let c1 = lab.largest_members();
        let covered = part.covered();
        if covered != c1 {
            out.push(format!(
                "parts cover {} vertices, largest component has {}",
                covered.len(),
                c1.len()
            ));
        }
        for p in &part.parts {
            let (sub, _) = g.induced_subgraph(&p.vertices);
            if connected_components(&sub).sizes.len() != 1 {
                out.push(format!("part anchored at block {} is disconnected", p.anchor_block));
            }
        }
        let grid2 = &self.grids[1];
        for (b, core) in self.stage1.cores.iter().enumerate() {
            if !self.stage1.occupied[b] {
                continue;
            }
            let anchor = self.stage1.grid.parent_in(b as u32, grid2);
            for &v in core {
                let id = part.part_of[v as usize];
                if id == UNALLOCATED || part.parts[id as usize].anchor_block != anchor {
                    out.push(format!("core vertex {v} outside the part of block {anchor}"));
                    break;
                }
            }
        }
        // phase 1 partitions C(3, core) into parts connected in X_{N3}
        let x3 = &self.phase1.graph;
        let lab3 = connected_components(x3);
        let mut meets = vec![false; lab3.sizes.len()];
        for (v, &c) in lab3.labels.iter().enumerate() {
            if self.stage1.core_mask[v] {
                meets[c as usize] = true;
            }
        }
        let c3: Vec<u32> = (0..x3.num_vertices() as u32)
            .filter(|&v| meets[lab3.labels[v as usize] as usize])
            .collect();
        if self.phase1.partition.covered() != c3 {
            out.push("phase-1 parts do not cover the core's X_{N3} component".into());
        }
        for p in &self.phase1.partition.parts {
            let (sub, _) = x3.induced_subgraph(&p.vertices);
            if connected_components(&sub).sizes.len() != 1 {
                out.push(format!(
                    "phase-1 part anchored at block {} is disconnected",
                    p.anchor_block
                ));
            }
        }
        if self.stage1.flag_o.ok && self.stage2.flag_a.ok && !self.stage2.core_connected {
            out.push("core graph disconnected under O and A".into());
        }
        out
    }
}

/// Runs all five stages on a box region.
pub fn run_renorm(
    lattice: &Lattice,
    params: &LrpParams,
    ladder: &ScaleLadder,
    thresholds: &EventThresholds,
    seed: u64,
) -> Result<RenormRun> {
    if lattice.geometry != Geometry::Box || params.geometry != Geometry::Box {
        return Err(LrpError::invalid("the staged construction runs on box regions"));
    }
    if ladder.n0 != lattice.n {
        return Err(LrpError::invalid(format!(
            "ladder built for N={} but region has N={}",
            ladder.n0, lattice.n
        )));
    }
    let grids = check_ladder(lattice, ladder)?;
    let stage1 = block_cores(lattice, grids[3].clone(), params, ladder.rho, seed)?;
    let stage2 = stage2_link_cores(lattice, &stage1, ladder, params, seed)?;
    let phase1 = allocate_phase1(lattice, &stage1, &stage2, &grids[1], ladder, params, thresholds, seed)?;
    let phase2 = allocate_phase2(lattice, &stage1, &phase1, &grids[1], ladder, params, thresholds, seed)?;
    let earlier = stage1.flag_o.ok && stage2.flag_a.ok && phase1.flag.ok && phase2.flag.ok;
    let assembled = assemble_n1_parts(
        lattice, &stage1, &phase2, &grids, ladder, params, thresholds, earlier, seed,
    )?;
    Ok(RenormRun {
        ladder: ladder.clone(),
        seed,
        grids,
        stage1,
        stage2,
        phase1,
        phase2,
        assembled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    pub id: u32,
    pub anchor_block: u32,
    pub volume: usize,
    pub internal_degree_sum: usize,
    pub diameter: Option<u32>,
    pub core_count: usize,
    /// `min_x deg_H(x)/deg(x)` over the part.
    pub min_degree_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub parts: Vec<PartReport>,
    pub volume_min: usize,
    pub volume_max: usize,
    pub volume_spread: f64,
    pub max_diameter: Option<u32>,
    pub min_degree_ratio: f64,
    pub flags: Option<StageFlags>,
}

/// Per-part volume, diameter and degree ratio of a partition of `graph`.
pub fn partition_diagnostics(graph: &Graph, partition: &Partition) -> PartitionReport {
    let parts: Vec<PartReport> = partition
        .parts
        .par_iter()
        .map(|p| {
            let mut member = std::collections::HashSet::with_capacity(p.vertices.len());
            member.extend(p.vertices.iter().copied());
            let ratio = p
                .vertices
                .iter()
                .map(|&v| {
                    let d = graph.degree(v);
                    if d == 0 {
                        1.0
                    } else {
                        graph.neighbors(v).iter().filter(|w| member.contains(w)).count() as f64
                            / d as f64
                    }
                })
                .fold(1.0f64, f64::min);
            PartReport {
                id: p.id,
                anchor_block: p.anchor_block,
                volume: p.volume,
                internal_degree_sum: p.internal_degree_sum,
                diameter: p.diameter,
                core_count: p.core_count,
                min_degree_ratio: ratio,
            }
        })
        .collect();
    let vmin = parts.iter().map(|p| p.volume).min().unwrap_or(0);
    let vmax = parts.iter().map(|p| p.volume).max().unwrap_or(0);
    let max_diameter = if parts.iter().all(|p| p.diameter.is_some()) {
        parts.iter().filter_map(|p| p.diameter).max()
    } else {
        None
    };
    PartitionReport {
        volume_min: vmin,
        volume_max: vmax,
        volume_spread: if vmin > 0 { vmax as f64 / vmin as f64 } else { f64::INFINITY },
        max_diameter,
        min_degree_ratio: parts.iter().map(|p| p.min_degree_ratio).fold(1.0, f64::min),
        flags: partition.flags.clone(),
        parts,
    }
}

/// A partition with a single part holding every vertex of `graph`.
pub fn single_part(graph: &Graph) -> Partition {
    let label = vec![0u32; graph.num_vertices()];
    let core = vec![false; graph.num_vertices()];
    let (part_of, parts) = parts_from_labels(graph, &label, &core, 0);
    Partition {
        block_side: 0,
        part_of,
        parts,
        flags: None,
    }
}
