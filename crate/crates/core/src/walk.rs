//! Heat kernels of the simple random walk by exact row propagation, the
//! return-probability series `ψ_t = P_{2t}(x,x)/deg(x)`, a Monte Carlo
//! collision cross-check, and trajectory statistics.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{LrpError, Result};
use crate::fit::{fit_power_law, FitResult};
use crate::graph::{Graph, LatticeGraph};
use crate::rng::stream;

/// Poisson mass left out of a uniformization sum.
pub const UNIFORMIZATION_NEGLECT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `P(x,y) = 1/deg(x)`, integer times.
    Discrete,
    /// Holding probability ½, integer times.
    Lazy,
    /// Unit-rate jumps, real times.
    Continuous,
}

impl Mode {
    fn holding(self) -> f64 {
        match self {
            Mode::Lazy => 0.5,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMethod {
    ExactPropagation,
    Uniformization,
    McCollision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSeries {
    pub start: u32,
    pub start_degree: usize,
    pub mode: Mode,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub method: PsiMethod,
    pub stderr: Option<Vec<f64>>,
}

impl PsiSeries {
    pub fn is_exact(&self) -> bool {
        self.method != PsiMethod::McCollision
    }

    /// `P_{2t}(x,x)` at each grid point.
    pub fn return_probabilities(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v * self.start_degree as f64)
            .collect()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.times.iter().copied().zip(self.values.iter().copied()).collect()
    }
}

fn check_start(graph: &Graph, x: u32) -> Result<()> {
    if x as usize >= graph.num_vertices() {
        return Err(LrpError::invalid(format!("start vertex {x} out of range")));
    }
    if graph.degree(x) == 0 {
        return Err(LrpError::invalid(format!("start vertex {x} is isolated")));
    }
    Ok(())
}

fn check_time(t: f64, mode: Mode) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LrpError::invalid(format!("time {t} must be finite and nonnegative")));
    }
    if mode != Mode::Continuous && t.fract() != 0.0 {
        return Err(LrpError::invalid(format!("discrete time {t} is not an integer")));
    }
    Ok(())
}

/// One application of the kernel to a row distribution. Each output entry
/// sums its neighbours in adjacency order, so results do not depend on
/// the thread count.
pub fn push_row(graph: &Graph, holding: f64, mu: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    scratch
        .iter_mut()
        .zip(mu)
        .enumerate()
        .for_each(|(x, (s, &m))| {
            let d = graph.degree(x as u32);
            *s = if d == 0 { 0.0 } else { m / d as f64 };
        });
    let scratch = &*scratch;
    let body = |(y, o): (usize, &mut f64)| {
        let acc: f64 = graph
            .neighbors(y as u32)
            .iter()
            .map(|&x| scratch[x as usize])
            .sum();
        *o = if graph.degree(y as u32) == 0 {
            mu[y]
        } else {
            holding * mu[y] + (1.0 - holding) * acc
        };
    };
    if out.len() >= 1 << 14 {
        out.par_iter_mut().enumerate().for_each(body);
    } else {
        out.iter_mut().enumerate().for_each(body);
    }
}

/// Poisson(t) weights on `[lo, lo + w.len())`, leaving out less than
/// [`UNIFORMIZATION_NEGLECT`] of the mass.
pub fn poisson_window(t: f64) -> (usize, Vec<f64>) {
    if t == 0.0 {
        return (0, vec![1.0]);
    }
    let logw = |k: usize| -t + k as f64 * t.ln() - ln_gamma(k as f64 + 1.0);
    let mode = t.floor() as usize;
    let (mut lo, mut hi) = (mode, mode);
    let mut total = logw(mode).exp();
    let mut wlo = total;
    let mut whi = total;
    while 1.0 - total >= UNIFORMIZATION_NEGLECT * 0.5 {
        // extend toward the heavier side
        let next_lo = if lo > 0 { logw(lo - 1).exp() } else { 0.0 };
        let next_hi = logw(hi + 1).exp();
        if lo > 0 && next_lo >= next_hi {
            lo -= 1;
            wlo = next_lo;
            total += next_lo;
        } else {
            hi += 1;
            whi = next_hi;
            total += next_hi;
        }
        if wlo == 0.0 && whi == 0.0 {
            break;
        }
    }
    (lo, (lo..=hi).map(logw).map(f64::exp).collect())
}

/// `P_t(x,·)` for each requested time, computed in one propagation pass.
pub fn heat_kernel_rows(graph: &Graph, x: u32, times: &[f64], mode: Mode) -> Result<Vec<Vec<f64>>> {
    check_start(graph, x)?;
    for &t in times {
        check_time(t, mode)?;
    }
    let n = graph.num_vertices();
    let holding = mode.holding();
    let windows: Vec<(usize, Vec<f64>)> = times
        .iter()
        .map(|&t| match mode {
            Mode::Continuous => poisson_window(t),
            _ => (t as usize, vec![1.0]),
        })
        .collect();
    let max_k = windows
        .iter()
        .map(|(lo, w)| lo + w.len() - 1)
        .max()
        .unwrap_or(0);
    let mut rows = vec![vec![0.0; n]; times.len()];
    let mut mu = vec![0.0; n];
    mu[x as usize] = 1.0;
    let mut next = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for k in 0..=max_k {
        for ((lo, w), row) in windows.iter().zip(rows.iter_mut()) {
            if k >= *lo && k < lo + w.len() {
                let c = w[k - lo];
                row.iter_mut().zip(&mu).for_each(|(r, m)| *r += c * m);
            }
        }
        if k < max_k {
            push_row(graph, holding, &mu, &mut scratch, &mut next);
            std::mem::swap(&mut mu, &mut next);
        }
    }
    Ok(rows)
}

pub fn heat_kernel_row_exact(graph: &Graph, x: u32, t: f64, mode: Mode) -> Result<Vec<f64>> {
    Ok(heat_kernel_rows(graph, x, &[t], mode)?.pop().unwrap())
}

/// `ψ_t = Σ_y P_t(x,y)² / deg(y)`, which equals `P_{2t}(x,x)/deg(x)` by
/// reversibility.
pub fn psi_series_exact(graph: &Graph, x: u32, times: &[f64], mode: Mode) -> Result<PsiSeries> {
    let rows = heat_kernel_rows(graph, x, times, mode)?;
    let values = rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, p)| **p != 0.0)
                .map(|(y, p)| p * p / graph.degree(y as u32) as f64)
                .sum()
        })
        .collect();
    Ok(PsiSeries {
        start: x,
        start_degree: graph.degree(x),
        mode,
        times: times.to_vec(),
        values,
        method: match mode {
            Mode::Continuous => PsiMethod::Uniformization,
            _ => PsiMethod::ExactPropagation,
        },
        stderr: None,
    })
}

fn walk_for<R: Rng>(graph: &Graph, mut v: u32, steps: u64, holding: f64, rng: &mut R) -> u32 {
    for _ in 0..steps {
        if holding > 0.0 && rng.random::<f64>() < holding {
            continue;
        }
        let nb = graph.neighbors(v);
        v = nb[rng.random_range(0..nb.len())];
    }
    v
}

fn walk_steps<R: Rng>(t: f64, mode: Mode, rng: &mut R) -> u64 {
    match mode {
        Mode::Continuous if t > 0.0 => Poisson::new(t).unwrap().sample(rng) as u64,
        Mode::Continuous => 0,
        _ => t as u64,
    }
}

/// Two independent walks from `x`; each replicate scores
/// `deg(x)/deg(Y_t) · 1[X_t = Y_t]`, which is unbiased for `P_{2t}(x,x)`.
pub fn psi_mc_collision(
    graph: &Graph,
    x: u32,
    t: f64,
    mode: Mode,
    reps: usize,
    seed: u64,
) -> Result<PsiSeries> {
    if reps == 0 {
        return Err(LrpError::invalid("collision estimator needs reps >= 1"));
    }
    check_start(graph, x)?;
    check_time(t, mode)?;
    let holding = mode.holding();
    let dx = graph.degree(x) as f64;
    const CHUNK: usize = 1024;
    let chunks: Vec<(f64, f64)> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, &[0x636f6c, x as u64, c as u64]);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in (c * CHUNK)..((c + 1) * CHUNK).min(reps) {
                let k1 = walk_steps(t, mode, &mut rng);
                let a = walk_for(graph, x, k1, holding, &mut rng);
                let k2 = walk_steps(t, mode, &mut rng);
                let b = walk_for(graph, x, k2, holding, &mut rng);
                let score = if a == b { dx / graph.degree(b) as f64 } else { 0.0 };
                s += score;
                s2 += score * score;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = chunks
        .iter()
        .fold((0.0, 0.0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    let r = reps as f64;
    let mean = s / r;
    let var = if reps > 1 {
        ((s2 - r * mean * mean) / (r - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(PsiSeries {
        start: x,
        start_degree: graph.degree(x),
        mode,
        times: vec![t],
        values: vec![mean / dx],
        method: PsiMethod::McCollision,
        stderr: Some(vec![(var / r).sqrt() / dx]),
    })
}

/// Trajectory of one walk on a lattice graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub start: u32,
    pub mode: Mode,
    /// Time of each move (step index for discrete walks).
    pub move_times: Vec<f64>,
    /// Euclidean length of each move, `I_n = |X_n - X_{n-1}|`.
    pub increments: Vec<f64>,
    /// `D` right after each move: largest distance from the start so far,
    /// measured on the unwrapped trajectory.
    pub running_max: Vec<f64>,
    /// The start vertex had no neighbours.
    pub isolated: bool,
}

impl WalkStats {
    /// `D_t` for arbitrary `t`.
    pub fn max_displacement_at(&self, t: f64) -> f64 {
        let k = self.move_times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.running_max[k - 1]
        }
    }
}

/// Walks up to time `t_max`; lazy and continuous walks only record actual
/// moves.
pub fn simulate_walk(lg: &LatticeGraph, x: u32, t_max: f64, mode: Mode, seed: u64) -> Result<WalkStats> {
    let g = &lg.graph;
    if x as usize >= g.num_vertices() {
        return Err(LrpError::invalid(format!("start vertex {x} out of range")));
    }
    check_time(t_max, Mode::Continuous)?;
    let mut stats = WalkStats {
        start: x,
        mode,
        move_times: Vec::new(),
        increments: Vec::new(),
        running_max: Vec::new(),
        isolated: g.degree(x) == 0,
    };
    if stats.isolated {
        return Ok(stats);
    }
    let mut rng = stream(seed, &[0x77616c6b, x as u64]);
    let d = lg.lattice.d;
    let mut pos = vec![0i64; d];
    let mut dmax = 0.0f64;
    let mut v = x;
    let mut clock = 0.0;
    loop {
        match mode {
            Mode::Continuous => {
                let u: f64 = rng.random();
                clock += -(1.0 - u).ln();
            }
            _ => clock += 1.0,
        }
        if clock > t_max {
            break;
        }
        if mode == Mode::Lazy && rng.random::<f64>() < 0.5 {
            continue;
        }
        let nb = g.neighbors(v);
        let w = nb[rng.random_range(0..nb.len())];
        let disp = lg.lattice.displacement(v, w);
        let mut len2 = 0.0;
        for (p, dd) in pos.iter_mut().zip(&disp) {
            *p += dd;
            len2 += (*dd as f64).powi(2);
        }
        let r = pos.iter().map(|&p| (p as f64).powi(2)).sum::<f64>().sqrt();
        dmax = dmax.max(r);
        stats.move_times.push(clock);
        stats.increments.push(len2.sqrt());
        stats.running_max.push(dmax);
        v = w;
    }
    Ok(stats)
}

/// Empirical survival `P(I > u)` at `points` log-spaced `u` in
/// `[u_min, u_max]`, and the fitted tail exponent `α` from
/// `P(I > u) ~ u^{-α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub alpha: f64,
    pub fit: FitResult,
    pub survival: Vec<(f64, f64)>,
    pub samples: usize,
}

pub fn tail_exponent(samples: &[f64], u_min: f64, u_max: f64, points: usize) -> Result<TailFit> {
    if !(u_min > 0.0 && u_max > u_min) || points < 3 {
        return Err(LrpError::invalid("tail window needs 0 < u_min < u_max and >= 3 points"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let ratio = (u_max / u_min).ln();
    let survival: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let u = u_min * (ratio * i as f64 / (points - 1) as f64).exp();
            let above = sorted.len() - sorted.partition_point(|&v| v <= u);
            (u, above as f64 / n)
        })
        .collect();
    if survival.iter().any(|&(_, s)| s == 0.0) {
        return Err(LrpError::InsufficientData(format!(
            "no samples above {} in {} draws",
            u_max,
            samples.len()
        )));
    }
    let fit = fit_power_law(&survival, false)?;
    Ok(TailFit {
        alpha: -fit.a,
        fit,
        survival,
        samples: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnCheck {
    pub passed: bool,
    pub constant: f64,
    pub checked: usize,
    /// Largest `P_{2t}(x,x)√(2t)/C` over the checked points.
    pub worst_ratio: f64,
    /// `(t, P_{2t}(x,x), C/√(2t))` for each violation.
    pub failures: Vec<(f64, f64, f64)>,
}

pub const DEFAULT_RETURN_CONSTANT: f64 = 4.0;

/// Checks `P_{2t}(x,x) <= C/√(2t)` on grid points with `0 < t <= t_max`.
/// The general bound holds on infinite graphs, so finite-graph callers pass
/// a pre-plateau `t_max`.
pub fn universal_return_check(series: &PsiSeries, c: f64, t_max: f64) -> Result<ReturnCheck> {
    if !series.is_exact() {
        return Err(LrpError::invalid("return check needs an exact series"));
    }
    let mut report = ReturnCheck {
        passed: true,
        constant: c,
        checked: 0,
        worst_ratio: 0.0,
        failures: Vec::new(),
    };
    for (&t, p) in series.times.iter().zip(series.return_probabilities()) {
        if t <= 0.0 || t > t_max {
            continue;
        }
        let bound = c / (2.0 * t).sqrt();
        report.checked += 1;
        report.worst_ratio = report.worst_ratio.max(p / bound);
        if p > bound {
            report.passed = false;
            report.failures.push((t, p, bound));
        }
    }
    Ok(report)
}

/// Relative distance to the stationary value beyond which a point counts
/// as pre-plateau.
pub const PLATEAU_RTOL: f64 = 0.05;
/// Fits use `t <= (N / MIXING_SAFETY)²`.
pub const MIXING_SAFETY: f64 = 8.0;

/// `lim ψ_t = π(x)/deg(x) = 1/Σ deg` for an aperiodic chain on a finite
/// connected graph of total degree `degree_sum`.
pub fn psi_stationary(degree_sum: usize) -> f64 {
    1.0 / degree_sum as f64
}

/// Grid indices usable in scaling fits: not yet within
/// [`PLATEAU_RTOL`] of the stationary value and below the finite-size
/// ceiling `(side/8)²`.
pub fn pre_plateau_indices(series: &PsiSeries, degree_sum: usize, side: u64) -> Vec<usize> {
    let inf = psi_stationary(degree_sum);
    let ceiling = (side as f64 / MIXING_SAFETY).powi(2);
    (0..series.times.len())
        .filter(|&i| {
            series.times[i] <= ceiling && (series.values[i] - inf).abs() / inf >= PLATEAU_RTOL
        })
        .collect()
}

/// Index of the first plateau point, if any.
pub fn plateau_start(series: &PsiSeries, degree_sum: usize) -> Option<usize> {
    let inf = psi_stationary(degree_sum);
    series
        .values
        .iter()
        .position(|v| (v - inf).abs() / inf < PLATEAU_RTOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gnp;
    use nalgebra::DMatrix;

    fn small_corpus() -> Vec<Graph> {
        let mut out = vec![Graph::complete(2), Graph::cycle(5), Graph::path(6), Graph::complete(7)];
        for seed in 0..40u64 {
            let n = 3 + (seed as usize % 10);
            let g = gnp(n, 0.45, seed);
            let lab = crate::cluster::connected_components(&g);
            let (h, _) = g.induced_subgraph(&lab.largest_members());
            if h.num_vertices() >= 2 {
                out.push(h);
            }
        }
        out
    }

    fn dense_p(g: &Graph, holding: f64) -> DMatrix<f64> {
        let n = g.num_vertices();
        let mut p = DMatrix::zeros(n, n);
        for x in 0..n {
            p[(x, x)] += holding;
            for &y in g.neighbors(x as u32) {
                p[(x, y as usize)] += (1.0 - holding) / g.degree(x as u32) as f64;
            }
        }
        p
    }

    #[test]
    fn k2_continuous_closed_form() {
        let g = Graph::complete(2);
        for t in [0.0, 0.1, 0.5, 1.0, 3.7, 20.0, 150.0] {
            let row = heat_kernel_row_exact(&g, 0, t, Mode::Continuous).unwrap();
            assert!((row[0] - (1.0 + (-2.0 * t).exp()) / 2.0).abs() < 1e-10, "t={t}");
            let psi = psi_series_exact(&g, 0, &[t], Mode::Continuous).unwrap();
            assert!((psi.values[0] - (1.0 + (-4.0 * t).exp()) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn time_zero_is_point_mass() {
        for g in small_corpus().iter().take(10) {
            for mode in [Mode::Discrete, Mode::Continuous, Mode::Lazy] {
                let row = heat_kernel_row_exact(g, 1, 0.0, mode).unwrap();
                assert_eq!(row[1], 1.0);
                assert_eq!(row.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn negative_or_fractional_time_rejected() {
        let g = Graph::complete(3);
        assert!(heat_kernel_row_exact(&g, 0, -1.0, Mode::Continuous).is_err());
        assert!(heat_kernel_row_exact(&g, 0, 1.5, Mode::Discrete).is_err());
    }

    #[test]
    fn discrete_matches_matrix_power() {
        for g in small_corpus() {
            for (mode, h) in [(Mode::Discrete, 0.0), (Mode::Lazy, 0.5)] {
                let p = dense_p(&g, h);
                let p5 = p.pow(5);
                let row = heat_kernel_row_exact(&g, 0, 5.0, mode).unwrap();
                for y in 0..g.num_vertices() {
                    assert!((row[y] - p5[(0, y)]).abs() < 1e-12);
                }
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn continuous_matches_matrix_exponential() {
        for g in small_corpus() {
            let n = g.num_vertices();
            let q = dense_p(&g, 0.0) - DMatrix::identity(n, n);
            for t in [0.3, 2.0, 7.5] {
                let e = (&q * t).exp();
                let row = heat_kernel_row_exact(&g, 0, t, Mode::Continuous).unwrap();
                for y in 0..n {
                    assert!((row[y] - e[(0, y)]).abs() < 1e-10, "t={t}");
                }
            }
        }
    }

    #[test]
    fn reversibility_identity() {
        for g in small_corpus() {
            let times: Vec<f64> = (0..8).map(f64::from).collect();
            let psi = psi_series_exact(&g, 0, &times, Mode::Discrete).unwrap();
            let direct: Vec<f64> = times.iter().map(|t| 2.0 * t).collect();
            let rows = heat_kernel_rows(&g, 0, &direct, Mode::Discrete).unwrap();
            for (v, row) in psi.values.iter().zip(&rows) {
                assert!((v * g.degree(0) as f64 - row[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn continuous_psi_monotone_convex() {
        for g in small_corpus() {
            let times: Vec<f64> = (0..60).map(|k| k as f64 * 0.25).collect();
            let psi = psi_series_exact(&g, 0, &times, Mode::Continuous).unwrap();
            let v = &psi.values;
            for i in 1..v.len() {
                assert!(v[i] <= v[i - 1] + 1e-9);
                assert!(v[i] > 0.0 && v[i] <= 1.0);
            }
            for i in 1..v.len() - 1 {
                assert!(v[i + 1] - 2.0 * v[i] + v[i - 1] >= -1e-9);
            }
        }
    }

    #[test]
    fn poisson_window_mass() {
        for t in [0.01, 1.0, 64.0, 1024.0, 5000.0] {
            let (lo, w) = poisson_window(t);
            let s: f64 = w.iter().sum();
            assert!((1.0 - s).abs() < 1e-11, "t={t} s={s}");
            assert!(lo as f64 <= t);
        }
    }

    #[test]
    fn collision_estimator() {
        let k2 = Graph::complete(2);
        let est = psi_mc_collision(&k2, 0, 4.0, Mode::Discrete, 1000, 1).unwrap();
        // both walks are back at 0 after an even number of steps
        assert_eq!(est.values[0], 1.0);
        let est = psi_mc_collision(&k2, 0, 0.7, Mode::Continuous, 100_000, 2).unwrap();
        let exact = (1.0 + (-2.8f64).exp()) / 2.0;
        assert!((est.values[0] - exact).abs() < 4.0 * est.stderr.as_ref().unwrap()[0]);
        assert!(psi_mc_collision(&k2, 0, 1.0, Mode::Discrete, 0, 1).is_err());
        let again = psi_mc_collision(&k2, 0, 0.7, Mode::Continuous, 100_000, 2).unwrap();
        assert_eq!(again, est);
    }

    #[test]
    fn return_check_k2() {
        let g = Graph::complete(2);
        let times: Vec<f64> = (1..=16).map(|k| k as f64 * 0.5).collect();
        let psi = psi_series_exact(&g, 0, &times, Mode::Continuous).unwrap();
        assert!(universal_return_check(&psi, 4.0, 1.0).unwrap().passed);
        // the finite-graph plateau exceeds the bound at large times
        let late = psi_series_exact(&g, 0, &[40.0], Mode::Continuous).unwrap();
        assert!(!universal_return_check(&late, 4.0, f64::INFINITY).unwrap().passed);
    }

    #[test]
    fn plateau_detection() {
        let g = Graph::cycle(9);
        let psi = psi_series_exact(&g, 0, &[0.0, 1.0, 400.0], Mode::Continuous).unwrap();
        assert_eq!(plateau_start(&psi, g.degree_sum()), Some(2));
        assert_eq!(pre_plateau_indices(&psi, g.degree_sum(), 1_000_000), vec![0, 1]);
    }

    #[test]
    fn walk_statistics() {
        use crate::graph::{build_graph, Provenance};
        use crate::lattice::Lattice;
        use crate::params::Geometry;
        let single = Lattice::new(1, 0, Geometry::Box).unwrap();
        let lg = build_graph(single, &[], None, Provenance::default()).unwrap();
        let st = simulate_walk(&lg, 0, 100.0, Mode::Discrete, 1).unwrap();
        assert!(st.isolated && st.increments.is_empty());
        assert_eq!(st.max_displacement_at(50.0), 0.0);

        let lat = Lattice::new(1, 1, Geometry::Box).unwrap();
        let lg = build_graph(lat, &[(0, 1)], None, Provenance::default()).unwrap();
        for mode in [Mode::Discrete, Mode::Lazy, Mode::Continuous] {
            let st = simulate_walk(&lg, 0, 200.0, mode, 3).unwrap();
            assert!(!st.increments.is_empty());
            assert!(st.increments.iter().all(|&i| i == 1.0));
            assert!(st.running_max.iter().all(|&d| d == 1.0));
            assert!(st.move_times.windows(2).all(|w| w[0] < w[1]));
        }
        let st = simulate_walk(&lg, 0, 200.0, Mode::Discrete, 3).unwrap();
        assert_eq!(st.increments.len(), 200);
    }

    #[test]
    fn tail_exponent_of_pareto() {
        // survival u^{-1/2} on [1, ∞) by inversion of a fixed grid
        let n = 200_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                u.powf(-2.0)
            })
            .collect();
        let tf = tail_exponent(&samples, 10.0, 1000.0, 12).unwrap();
        assert!((tf.alpha - 0.5).abs() < 0.01, "{}", tf.alpha);
    }
}
