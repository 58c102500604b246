//! Edge sampling without visiting every pair.
//!
//! Pairs are grouped by distance class (squared Euclidean distance, plus the
//! isotropy class inside the short-range table). For each class the number
//! of open pairs is drawn from `Binomial(n_r, p_r)` and that many distinct
//! pairs are then placed uniformly inside the class. This is equal in law to
//! independent Bernoulli trials on every pair. Set-based predicate clauses
//! are applied afterwards as an independent thinning of the open pairs,
//! which keeps the law exact on the matched subset.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{LrpError, Result};
use crate::lattice::Lattice;
use crate::params::{isotropy_class, squared_norm, Geometry, LrpParams};
use crate::rng::{derive_seed, stream};

/// One conjunct of a [`PairPredicate`].
#[derive(Debug, Clone)]
pub enum Clause {
    /// `min <= |x - y|_inf <= max`.
    Linf { min: u64, max: u64 },
    /// Both endpoints inside the mask.
    BothIn(Arc<Vec<bool>>),
    /// At least one endpoint outside the mask.
    EitherOutside(Arc<Vec<bool>>),
    /// Both endpoints carry the same cell label.
    SameCell(Arc<Vec<u32>>),
    DifferentCell(Arc<Vec<u32>>),
    /// Complement of another predicate (e.g. of pairs revealed earlier).
    Not(Box<PairPredicate>),
}

/// Constraint on unordered vertex pairs: a conjunction of clauses.
#[derive(Debug, Clone, Default)]
pub struct PairPredicate {
    clauses: Vec<Clause>,
    never: bool,
}

impl PairPredicate {
    /// Matches every pair.
    pub fn all() -> Self {
        PairPredicate::default()
    }

    /// Matches nothing.
    pub fn empty() -> Self {
        PairPredicate {
            clauses: Vec::new(),
            never: true,
        }
    }

    pub fn and(mut self, clause: Clause) -> Self {
        self.clauses.push(clause);
        self
    }

    pub fn linf(self, min: u64, max: u64) -> Self {
        self.and(Clause::Linf { min, max })
    }

    pub fn is_empty(&self) -> bool {
        self.never
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    fn linf_bounds(&self) -> (u64, u64) {
        let mut lo = 1;
        let mut hi = u64::MAX;
        for c in &self.clauses {
            if let Clause::Linf { min, max } = c {
                lo = lo.max(*min);
                hi = hi.min(*max);
            }
        }
        (lo, hi)
    }

    /// True when only length clauses are present, so class multiplicities
    /// are exact without enumeration.
    fn length_only(&self) -> bool {
        self.clauses.iter().all(|c| matches!(c, Clause::Linf { .. }))
    }

    pub fn matches(&self, lattice: &Lattice, u: u32, v: u32) -> bool {
        if u == v {
            return false;
        }
        self.matches_with(u, v, &mut || lattice.linf(u, v))
    }

    fn matches_with(&self, u: u32, v: u32, linf: &mut dyn FnMut() -> u64) -> bool {
        if self.never {
            return false;
        }
        let mut cached: Option<u64> = None;
        for c in &self.clauses {
            let ok = match c {
                Clause::Linf { min, max } => {
                    let l = *cached.get_or_insert_with(&mut *linf);
                    l >= *min && l <= *max
                }
                Clause::BothIn(m) => m[u as usize] && m[v as usize],
                Clause::EitherOutside(m) => !(m[u as usize] && m[v as usize]),
                Clause::SameCell(c) => c[u as usize] == c[v as usize],
                Clause::DifferentCell(c) => c[u as usize] != c[v as usize],
                Clause::Not(p) => {
                    let l = *cached.get_or_insert_with(&mut *linf);
                    !p.matches_with(u, v, &mut || l)
                }
            };
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Pairs at one squared distance (and, below the cutoff, one isotropy
/// class) that pass the predicate's length clauses.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceClass {
    pub sq_dist: u64,
    pub shape: Option<Vec<u32>>,
    pub multiplicity: u64,
    pub probability: f64,
}

#[derive(Debug, Clone)]
struct Group {
    sq: u64,
    shape: Option<Vec<u32>>,
    probability: f64,
    disps: Vec<Vec<i64>>,
    /// Prefix sums of base counts; `cum[j]` is the first index of `disps[j]`.
    cum: Vec<u64>,
    total: u64,
}

/// Canonical half-space displacements (first nonzero coordinate positive)
/// with `lo <= |d|_inf <= hi`, paired with their number of base points.
fn displacements(lattice: &Lattice, lo: u64, hi: u64) -> Vec<(Vec<i64>, u64)> {
    let m = lattice.side();
    let d = lattice.d;
    let reach: i64 = match lattice.geometry {
        Geometry::Box => m as i64 - 1,
        Geometry::Torus => lattice.n as i64,
    };
    let hi = hi.min(reach.max(0) as u64) as i64;
    let mut out = Vec::new();
    if hi < lo as i64 || reach == 0 {
        return out;
    }
    let mut cur = vec![-hi; d];
    loop {
        let linf = cur.iter().map(|c| c.unsigned_abs()).max().unwrap();
        let first_pos = cur.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0);
        if first_pos && linf >= lo && linf <= hi as u64 {
            let count = match lattice.geometry {
                Geometry::Box => cur.iter().map(|c| m - c.unsigned_abs()).product(),
                Geometry::Torus => m.pow(d as u32),
            };
            out.push((cur.clone(), count));
        }
        let mut k = d;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] < hi {
                cur[k] += 1;
                for c in cur.iter_mut().skip(k + 1) {
                    *c = -hi;
                }
                break;
            }
        }
    }
}

fn build_groups(lattice: &Lattice, predicate: &PairPredicate, params: &LrpParams) -> Result<Vec<Group>> {
    if params.d != lattice.d {
        return Err(LrpError::invalid("parameter and lattice dimensions differ"));
    }
    if params.geometry != lattice.geometry {
        return Err(LrpError::invalid("parameter and lattice geometries differ"));
    }
    if predicate.never {
        return Ok(Vec::new());
    }
    let (lo, hi) = predicate.linf_bounds();
    let mut disps = displacements(lattice, lo, hi);
    let key = |dx: &Vec<i64>| {
        let sq = squared_norm(dx);
        let shape = params.is_short_range(sq).then(|| isotropy_class(dx));
        (sq, shape)
    };
    disps.sort_by(|a, b| key(&a.0).cmp(&key(&b.0)).then_with(|| a.0.cmp(&b.0)));
    let mut groups: Vec<Group> = Vec::new();
    for (dx, count) in disps {
        let (sq, shape) = key(&dx);
        let same = groups
            .last()
            .is_some_and(|g| g.sq == sq && g.shape == shape);
        if !same {
            groups.push(Group {
                sq,
                shape,
                probability: params.probability_of_canonical(&dx),
                disps: Vec::new(),
                cum: Vec::new(),
                total: 0,
            });
        }
        let g = groups.last_mut().unwrap();
        g.cum.push(g.total);
        g.total += count;
        g.disps.push(dx);
    }
    Ok(groups)
}

impl Group {
    fn decode(&self, lattice: &Lattice, idx: u64) -> (u32, u32) {
        let j = match self.cum.binary_search(&idx) {
            Ok(j) => j,
            Err(j) => j - 1,
        };
        let dx = &self.disps[j];
        let mut b = idx - self.cum[j];
        let m = lattice.side();
        let d = lattice.d;
        let mut x = vec![0u64; d];
        let mut y = vec![0u64; d];
        for k in (0..d).rev() {
            match lattice.geometry {
                Geometry::Box => {
                    let len = m - dx[k].unsigned_abs();
                    let lo = if dx[k] < 0 { dx[k].unsigned_abs() } else { 0 };
                    x[k] = lo + b % len;
                    b /= len;
                    y[k] = (x[k] as i64 + dx[k]) as u64;
                }
                Geometry::Torus => {
                    x[k] = b % m;
                    b /= m;
                    y[k] = (x[k] as i64 + dx[k]).rem_euclid(m as i64) as u64;
                }
            }
        }
        let u = lattice.index_of_offset(&x);
        let v = lattice.index_of_offset(&y);
        (u.min(v), u.max(v))
    }

    fn sample<R: Rng>(&self, lattice: &Lattice, rng: &mut R) -> Vec<(u32, u32)> {
        let n = self.total;
        let p = self.probability;
        let k = if p <= 0.0 || n == 0 {
            0
        } else if p >= 1.0 {
            n
        } else {
            Binomial::new(n, p).expect("valid binomial").sample(rng)
        };
        if k == 0 {
            return Vec::new();
        }
        if k == n {
            return (0..n).map(|i| self.decode(lattice, i)).collect();
        }
        index::sample(rng, n as usize, k as usize)
            .into_iter()
            .map(|i| self.decode(lattice, i as u64))
            .collect()
    }
}

/// Distance classes of pairs matched by `predicate`, ordered by squared
/// distance. Multiplicities are exact; predicates with set clauses are
/// counted by enumeration.
pub fn enumerate_distance_classes(
    lattice: &Lattice,
    predicate: &PairPredicate,
    params: &LrpParams,
) -> Result<Vec<DistanceClass>> {
    let groups = build_groups(lattice, predicate, params)?;
    let exact_by_length = predicate.length_only();
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let multiplicity = if exact_by_length {
            g.total
        } else {
            (0..g.total)
                .filter(|&i| {
                    let (u, v) = g.decode(lattice, i);
                    predicate.matches(lattice, u, v)
                })
                .count() as u64
        };
        if multiplicity > 0 {
            out.push(DistanceClass {
                sq_dist: g.sq,
                shape: g.shape,
                multiplicity,
                probability: g.probability,
            });
        }
    }
    Ok(out)
}

fn sample_stage(
    lattice: &Lattice,
    predicate: &PairPredicate,
    params: &LrpParams,
    seed: u64,
    stage: u64,
) -> Result<Vec<(u32, u32)>> {
    let groups = build_groups(lattice, predicate, params)?;
    let length_only = predicate.length_only();
    let per_class: Vec<Vec<(u32, u32)>> = groups
        .par_iter()
        .enumerate()
        .map(|(ci, g)| {
            let mut rng = stream(seed, &[stage, ci as u64]);
            let mut e = g.sample(lattice, &mut rng);
            if !length_only {
                e.retain(|&(u, v)| predicate.matches(lattice, u, v));
            }
            e
        })
        .collect();
    let mut edges: Vec<(u32, u32)> = per_class.into_iter().flatten().collect();
    edges.sort_unstable();
    Ok(edges)
}

/// Independent Bernoulli sample of every pair matched by `predicate`.
/// Output is sorted with `u < v`.
pub fn sample_edges(
    lattice: &Lattice,
    predicate: &PairPredicate,
    params: &LrpParams,
    seed: u64,
) -> Result<Vec<(u32, u32)>> {
    sample_stage(lattice, predicate, params, seed, 0)
}

/// Samples stage `stage` of a staged construction with the stream the
/// staged API would use for that index.
pub fn sample_stage_edges(
    lattice: &Lattice,
    predicate: &PairPredicate,
    params: &LrpParams,
    seed: u64,
    stage: usize,
) -> Result<Vec<(u32, u32)>> {
    sample_stage(lattice, predicate, params, seed, stage as u64)
}

fn total_pairs(lattice: &Lattice) -> u128 {
    let n = lattice.num_vertices() as u128;
    n * n.saturating_sub(1) / 2
}

/// Largest region checked exhaustively for stage overlap.
pub const EXHAUSTIVE_PAIR_CAP: u128 = 4_000_000;
const OVERLAP_PROBES: usize = 200_000;

/// Errors if any unordered pair matches more than one predicate. Small
/// regions are checked exhaustively, larger ones by random probing.
pub fn check_disjoint(lattice: &Lattice, stages: &[PairPredicate], seed: u64) -> Result<()> {
    let n = lattice.num_vertices() as u32;
    let check = |u: u32, v: u32| -> Result<()> {
        let hits: Vec<usize> = stages
            .iter()
            .enumerate()
            .filter(|(_, p)| p.matches(lattice, u, v))
            .map(|(i, _)| i)
            .collect();
        if hits.len() > 1 {
            return Err(LrpError::invalid(format!(
                "stage predicates {hits:?} overlap on pair ({u},{v})"
            )));
        }
        Ok(())
    };
    if total_pairs(lattice) <= EXHAUSTIVE_PAIR_CAP {
        for u in 0..n {
            for v in u + 1..n {
                check(u, v)?;
            }
        }
    } else {
        let mut rng = stream(derive_seed(seed, &[u64::MAX]), &[]);
        for _ in 0..OVERLAP_PROBES {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v {
                check(u.min(v), u.max(v))?;
            }
        }
    }
    Ok(())
}

/// Samples each stage from its own stream keyed by `(seed, stage index)`.
/// Stage `k`'s output does not depend on later stages.
pub fn staged_reveal(
    lattice: &Lattice,
    stages: &[PairPredicate],
    params: &LrpParams,
    seed: u64,
) -> Result<Vec<Vec<(u32, u32)>>> {
    check_disjoint(lattice, stages, seed)?;
    let out: Vec<Vec<(u32, u32)>> = stages
        .iter()
        .enumerate()
        .map(|(k, p)| sample_stage(lattice, p, params, seed, k as u64))
        .collect::<Result<_>>()?;
    // pairs drawn by one stage must never satisfy another
    for (k, edges) in out.iter().enumerate() {
        for &(u, v) in edges {
            if stages
                .iter()
                .enumerate()
                .any(|(j, p)| j != k && p.matches(lattice, u, v))
            {
                return Err(LrpError::invalid(format!(
                    "stage predicates overlap on sampled pair ({u},{v})"
                )));
            }
        }
    }
    Ok(out)
}

/// Pair-by-pair sample with one hashed uniform per pair, so configurations
/// for different parameters are coupled monotonically. Quadratic cost; for
/// small regions only.
pub fn coupled_sample(lattice: &Lattice, params: &LrpParams, seed: u64) -> Result<Vec<(u32, u32)>> {
    if total_pairs(lattice) > 50_000_000 {
        return Err(LrpError::invalid("coupled sampling limited to small regions"));
    }
    let n = lattice.num_vertices() as u32;
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let dx = lattice.displacement(u, v);
            let p = params.probability_of_canonical(&dx);
            if crate::rng::hashed_uniform(seed, &[u as u64, v as u64]) < p {
                out.push((u, v));
            }
        }
    }
    Ok(out)
}
