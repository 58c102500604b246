//! Numerical instance of the abstract continuous-time heat-kernel bound:
//! six assumptions on a family of partitions, the differential inequality
//! they imply for `ψ_s`, and the closed-form decay curve.

use serde::{Deserialize, Serialize};

use crate::error::{LrpError, Result};
use crate::graph::Graph;
use crate::spectral::{spectral_gap_exact, spectral_gap_iterative, ReversibleChain, DENSE_CAP};
use crate::walk::{heat_kernel_rows, poisson_window, push_row, Mode, PsiSeries};

/// Relative truncation error accepted for a central difference.
pub const DERIVATIVE_RTOL: f64 = 0.01;
const MAX_REFINEMENTS: usize = 30;
const TIME_MATCH_RTOL: f64 = 1e-9;

/// Time-indexed gap floor `λ_s` and volume scale `V_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeScales {
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    pub volume: Vec<f64>,
}

impl TimeScales {
    pub fn constant(times: &[f64], lambda: f64, volume: f64) -> Self {
        TimeScales {
            times: times.to_vec(),
            lambda: vec![lambda; times.len()],
            volume: vec![volume; times.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub c1: f64,
    pub big_c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub big_c3: f64,
    pub big_c4: f64,
    pub big_c5: f64,
    pub big_c6: f64,
    pub t1: f64,
    pub t2: f64,
    pub scales: TimeScales,
}

impl BoundParams {
    /// `δ = 2 + δ̃₁ + δ̃₂ + γ`.
    pub fn delta(&self) -> f64 {
        2.0 + self.delta1 + self.delta2 + self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || self.delta1 < 0.0 || self.delta2 < 0.0 {
            return Err(LrpError::invalid("need γ > 0 and δ̃₁, δ̃₂ >= 0"));
        }
        let consts = [
            ("c1", self.c1),
            ("C1", self.big_c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("C3", self.big_c3),
            ("C4", self.big_c4),
            ("C5", self.big_c5),
            ("C6", self.big_c6),
        ];
        for (name, v) in consts {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LrpError::invalid(format!("constant {name} = {v} must be positive")));
            }
        }
        if !(self.t1 >= 0.0 && self.t2 > self.t1) {
            return Err(LrpError::invalid(format!(
                "time window [{}, {}] is empty",
                self.t1, self.t2
            )));
        }
        let sc = &self.scales;
        if sc.lambda.len() != sc.times.len() || sc.volume.len() != sc.times.len() {
            return Err(LrpError::invalid("time scales have mismatched lengths"));
        }
        for w in sc.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(LrpError::invalid("time grid must increase strictly"));
            }
        }
        for i in 1..sc.times.len() {
            if sc.lambda[i] > sc.lambda[i - 1] {
                return Err(LrpError::invalid("λ_s must be nonincreasing"));
            }
            if sc.volume[i] < sc.volume[i - 1] {
                return Err(LrpError::invalid("V_s must be nondecreasing"));
            }
        }
        if sc.lambda.iter().chain(&sc.volume).any(|&v| !(v > 0.0)) {
            return Err(LrpError::invalid("λ_s and V_s must be positive"));
        }
        Ok(())
    }
}

/// Time-independent measurements of one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMeasure {
    pub parts: usize,
    /// Gap `1 - λ₂` of the simple random walk on each part.
    pub part_gaps: Vec<f64>,
    pub min_gap: f64,
    /// Vertex counts.
    pub vol_min: usize,
    pub vol_max: usize,
    /// Smallest internal degree sum `Z(H)`.
    pub z_min: usize,
    /// `min_x deg_H(x)/deg(x)` over the partitioned set.
    pub degree_ratio: f64,
}

fn part_gap(graph: &Graph, part: &[u32]) -> Result<f64> {
    if part.len() == 1 {
        // a single vertex has no nonconstant function
        return Ok(f64::INFINITY);
    }
    let (sub, _) = graph.induced_subgraph(part);
    let chain = ReversibleChain::new(sub)?;
    if chain.len() <= DENSE_CAP {
        spectral_gap_exact(&chain)
    } else {
        Ok(spectral_gap_iterative(&chain, 1e-8)?.gap)
    }
}

/// Measures a partition of a vertex set of `graph` into connected parts.
pub fn measure_partition(graph: &Graph, parts: &[Vec<u32>]) -> Result<PartitionMeasure> {
    if parts.is_empty() {
        return Err(LrpError::invalid("partition has no parts"));
    }
    let n = graph.num_vertices();
    let mut owner = vec![u32::MAX; n];
    for (i, p) in parts.iter().enumerate() {
        if p.is_empty() {
            return Err(LrpError::invalid(format!("part {i} is empty")));
        }
        for &v in p {
            if v as usize >= n || owner[v as usize] != u32::MAX {
                return Err(LrpError::invalid(format!("vertex {v} repeated or out of range")));
            }
            owner[v as usize] = i as u32;
        }
    }
    let part_gaps = {
        use rayon::prelude::*;
        parts
            .par_iter()
            .map(|p| part_gap(graph, p))
            .collect::<Result<Vec<f64>>>()?
    };
    let mut ratio = 1.0f64;
    let mut z = vec![0usize; parts.len()];
    for v in 0..n as u32 {
        let o = owner[v as usize];
        if o == u32::MAX {
            continue;
        }
        let inside = graph
            .neighbors(v)
            .iter()
            .filter(|&&w| owner[w as usize] == o)
            .count();
        z[o as usize] += inside;
        let d = graph.degree(v);
        if d > 0 {
            ratio = ratio.min(inside as f64 / d as f64);
        }
    }
    Ok(PartitionMeasure {
        parts: parts.len(),
        min_gap: part_gaps.iter().copied().fold(f64::INFINITY, f64::min),
        part_gaps,
        vol_min: parts.iter().map(Vec::len).min().unwrap(),
        vol_max: parts.iter().map(Vec::len).max().unwrap(),
        z_min: z.into_iter().min().unwrap(),
        degree_ratio: ratio,
    })
}

/// `sup_{x ∈ starts} P_x(walk reaches the complement of `inside` by time t)`
/// for each `t`, by backward propagation with the complement absorbing.
pub fn escape_probabilities(
    graph: &Graph,
    inside: &[bool],
    starts: &[u32],
    times: &[f64],
    mode: Mode,
) -> Result<Vec<f64>> {
    let n = graph.num_vertices();
    if inside.len() != n {
        return Err(LrpError::invalid("region mask length differs from vertex count"));
    }
    if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t.is_finite())) {
        return Err(LrpError::invalid(format!("time {t} must be finite and nonnegative")));
    }
    let holding = match mode {
        Mode::Lazy => 0.5,
        _ => 0.0,
    };
    let windows: Vec<(usize, Vec<f64>)> = match mode {
        Mode::Continuous => times.iter().map(|&t| poisson_window(t)).collect(),
        _ => times
            .iter()
            .map(|&t| {
                if t.fract() != 0.0 {
                    Err(LrpError::invalid(format!("discrete time {t} is not an integer")))
                } else {
                    Ok((t as usize, vec![1.0]))
                }
            })
            .collect::<Result<_>>()?,
    };
    let k_max = windows.iter().map(|(lo, w)| lo + w.len()).max().unwrap_or(0);
    let mut h: Vec<f64> = inside.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect();
    let mut acc = vec![vec![0.0; starts.len()]; times.len()];
    let mut next = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let add = |k: usize, h: &[f64], acc: &mut Vec<Vec<f64>>| {
        for (ti, (lo, w)) in windows.iter().enumerate() {
            if k >= *lo && k < lo + w.len() {
                let wk = w[k - lo];
                for (j, &x) in starts.iter().enumerate() {
                    acc[ti][j] += wk * h[x as usize];
                }
            }
        }
    };
    add(0, &h, &mut acc);
    for k in 1..k_max {
        // P is self-adjoint in L²(deg), so Ph = D^{-1} (P^T (D h))
        for v in 0..n {
            scratch[v] = h[v] * graph.degree(v as u32) as f64;
        }
        let mu = std::mem::take(&mut scratch);
        scratch = vec![0.0; n];
        push_row(graph, holding, &mu, &mut scratch, &mut next);
        scratch = mu;
        for v in 0..n {
            let d = graph.degree(v as u32) as f64;
            h[v] = if !inside[v] {
                1.0
            } else if d == 0.0 {
                0.0
            } else {
                next[v] / d
            };
        }
        add(k, &h, &mut acc);
    }
    Ok(acc
        .into_iter()
        .map(|a| a.into_iter().fold(0.0, f64::max).min(1.0))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub ok: bool,
    /// Relative slack; negative on failure.
    pub margin: f64,
    pub measured: f64,
}

impl AssumptionCheck {
    fn lower(measured: f64, bound: f64) -> Self {
        let margin = if bound > 0.0 { measured / bound - 1.0 } else { f64::INFINITY };
        AssumptionCheck {
            ok: measured >= bound,
            margin,
            measured,
        }
    }

    fn upper(measured: f64, bound: f64) -> Self {
        let margin = if measured > 0.0 { bound / measured - 1.0 } else { f64::INFINITY };
        AssumptionCheck {
            ok: measured <= bound,
            margin,
            measured,
        }
    }

    fn both(a: Self, b: Self) -> Self {
        if a.margin <= b.margin {
            AssumptionCheck { ok: a.ok && b.ok, ..a }
        } else {
            AssumptionCheck { ok: a.ok && b.ok, ..b }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionRow {
    pub time: f64,
    pub in_window: bool,
    /// Assumptions (1)–(6) in order.
    pub checks: [AssumptionCheck; 6],
}

impl AssumptionRow {
    pub fn all_pass(&self) -> bool {
        self.in_window && self.checks.iter().all(|c| c.ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub rows: Vec<AssumptionRow>,
}

impl AssumptionReport {
    pub fn pass_mask(&self) -> Vec<bool> {
        self.rows.iter().map(AssumptionRow::all_pass).collect()
    }

    /// True when every in-window grid point passes all six.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().filter(|r| r.in_window).all(AssumptionRow::all_pass)
            && self.rows.iter().any(|r| r.in_window)
    }

    pub fn failures(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for r in self.rows.iter().filter(|r| r.in_window) {
            for (i, c) in r.checks.iter().enumerate() {
                if !c.ok {
                    out.push((r.time, i + 1));
                }
            }
        }
        out
    }
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= TIME_MATCH_RTOL * x.abs().max(y.abs()).max(1.0))
}

/// Checks (1)–(6) at every grid point. `measures` holds one partition per
/// time or a single one used for all times; `escape` holds the escape
/// probability per time.
pub fn check_assumptions(
    measures: &[PartitionMeasure],
    escape: &[f64],
    psi: &PsiSeries,
    params: &BoundParams,
) -> Result<AssumptionReport> {
    params.validate()?;
    let times = &params.scales.times;
    if !same_grid(times, &psi.times) {
        return Err(LrpError::invalid("ψ series and time scales use different grids"));
    }
    if escape.len() != times.len() {
        return Err(LrpError::invalid("escape probabilities not on the common grid"));
    }
    if measures.len() != 1 && measures.len() != times.len() {
        return Err(LrpError::invalid("partition measures not on the common grid"));
    }
    let mut rows = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let m = &measures[if measures.len() == 1 { 0 } else { i }];
        let lam = params.scales.lambda[i];
        let v = params.scales.volume[i];
        let lv = v.ln();
        let a1 = AssumptionCheck::lower(m.min_gap, lam);
        let a2 = AssumptionCheck::both(
            AssumptionCheck::lower(m.vol_min as f64, params.c1 * v),
            AssumptionCheck::upper(m.vol_max as f64, params.big_c1 * v),
        );
        let a3 = AssumptionCheck::lower(lam, params.c2 * v.powf(-params.gamma) * lv.powf(-params.delta1));
        let a4 = AssumptionCheck::lower(m.degree_ratio, params.c3 * lv.powf(-params.delta2));
        let a5 = AssumptionCheck::upper(escape[i], params.big_c3 * lv / v);
        let cal = psi.values[i] * v / lv;
        let a6 = AssumptionCheck::both(
            AssumptionCheck::lower(cal, 2.0 + params.big_c3),
            AssumptionCheck::upper(cal, params.big_c4),
        );
        rows.push(AssumptionRow {
            time: t,
            in_window: t >= params.t1 && t <= params.t2,
            checks: [a1, a2, a3, a4, a5, a6],
        });
    }
    Ok(AssumptionReport { rows })
}

/// Evaluates `ψ` at arbitrary times.
pub trait PsiSource {
    fn psi(&self, times: &[f64]) -> Result<Vec<f64>>;
}

/// A closed-form `ψ`.
pub struct ClosedForm<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> PsiSource for ClosedForm<F> {
    fn psi(&self, times: &[f64]) -> Result<Vec<f64>> {
        Ok(times.iter().map(|&t| (self.0)(t)).collect())
    }
}

/// Continuous-time `ψ` from exact propagation on a graph.
pub struct ExactWalk<'a> {
    pub graph: &'a Graph,
    pub start: u32,
}

impl PsiSource for ExactWalk<'_> {
    fn psi(&self, times: &[f64]) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let rows = heat_kernel_rows(self.graph, self.start, &sorted, Mode::Continuous)?;
        let mut out = vec![0.0; times.len()];
        for (k, &i) in order.iter().enumerate() {
            out[i] = rows[k]
                .iter()
                .enumerate()
                .filter(|(_, p)| **p != 0.0)
                .map(|(y, p)| p * p / (self.graph.degree(y as u32) as f64).max(1.0))
                .sum::<f64>();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityPoint {
    pub time: f64,
    /// `-∂ψ`.
    pub lhs: f64,
    /// `Δλ(ψ - (1+C₃) log V / V)`.
    pub rhs: f64,
    pub slack: f64,
    pub ok: bool,
    pub step: f64,
    pub refinements: usize,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub points: Vec<InequalityPoint>,
    pub checked: usize,
    pub passed: usize,
    pub pass_fraction: f64,
    /// Points where the truncation guard needed a finer step.
    pub refined: usize,
    /// Points where the guard never settled below the tolerance.
    pub unresolved: usize,
    /// Smallest constants making the consequences hold on the checked
    /// points; positive values mean those hold.
    pub hk1_constant: f64,
    pub hk2_constant: f64,
    pub hk3_constant: f64,
}

impl InequalityReport {
    pub fn failures(&self) -> Vec<&InequalityPoint> {
        self.points.iter().filter(|p| !p.ok).collect()
    }
}

fn central(source: &dyn PsiSource, t: f64, h: f64) -> Result<f64> {
    let v = source.psi(&[t - h, t + h])?;
    Ok((v[0] - v[1]) / (2.0 * h))
}

/// Checks `-∂ψ ≥ Δλ(ψ - (1+C₃) log V / V)` at interior grid points. The
/// derivative is a central difference with a Richardson estimate of its
/// truncation error, halving the step until that estimate is below
/// [`DERIVATIVE_RTOL`]. `mask` selects the points to check (for instance
/// those where all assumptions pass); `degree_ratio` is `Δ` per grid point
/// or one value for all.
pub fn verify_differential_inequality(
    series: &PsiSeries,
    source: &dyn PsiSource,
    params: &BoundParams,
    degree_ratio: &[f64],
    mask: Option<&[bool]>,
) -> Result<InequalityReport> {
    if !series.is_exact() {
        return Err(LrpError::invalid(
            "Monte Carlo ψ series are too noisy to differentiate",
        ));
    }
    params.validate()?;
    let times = &series.times;
    if !same_grid(times, &params.scales.times) {
        return Err(LrpError::invalid("ψ series and time scales use different grids"));
    }
    if degree_ratio.len() != 1 && degree_ratio.len() != times.len() {
        return Err(LrpError::invalid("degree ratios not on the common grid"));
    }
    if let Some(m) = mask {
        if m.len() != times.len() {
            return Err(LrpError::invalid("mask not on the common grid"));
        }
    }
    let delta = params.delta();
    let mut points = Vec::new();
    let (mut hk1, mut hk2, mut hk3) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for i in 1..times.len().saturating_sub(1) {
        if let Some(m) = mask {
            if !m[i] {
                continue;
            }
        }
        let t = times[i];
        let mut h = (t - times[i - 1]).min(times[i + 1] - t);
        let psi = series.values[i];
        let mut coarse = central(source, t, h)?;
        let mut refinements = 0;
        let (deriv, rel) = loop {
            let fine = central(source, t, h / 2.0)?;
            let scale = fine.abs().max(coarse.abs());
            let rel = if scale <= 1e-15 * psi.abs() {
                0.0
            } else {
                (fine - coarse).abs() / (3.0 * fine.abs().max(f64::MIN_POSITIVE))
            };
            if rel <= DERIVATIVE_RTOL || refinements >= MAX_REFINEMENTS {
                break ((4.0 * fine - coarse) / 3.0, rel);
            }
            h /= 2.0;
            coarse = fine;
            refinements += 1;
        };
        let lam = params.scales.lambda[i];
        let v = params.scales.volume[i];
        let lv = v.ln();
        let dr = degree_ratio[if degree_ratio.len() == 1 { 0 } else { i }];
        let lhs = deriv;
        let rhs = dr * lam * (psi - (1.0 + params.big_c3) * lv / v);
        let ok = lhs >= rhs;
        points.push(InequalityPoint {
            time: t,
            lhs,
            rhs,
            slack: lhs - rhs,
            ok,
            step: h,
            refinements,
            rel_error: rel,
        });
        hk1 = hk1.min(lhs / (psi * v.powf(-params.gamma) / lv.powf(2.0 + params.delta1 + params.delta2)));
        hk2 = hk2.min(lhs / (psi.powf(1.0 + params.gamma) / psi.ln().abs().powf(delta)));
        // ∂u = -γ ψ^{-γ-1} ∂ψ for u = ψ^{-γ}
        let u = psi.powf(-params.gamma);
        hk3 = hk3.min(params.gamma * psi.powf(-params.gamma - 1.0) * lhs * u.ln().abs().powf(delta));
    }
    let checked = points.len();
    let passed = points.iter().filter(|p| p.ok).count();
    Ok(InequalityReport {
        checked,
        passed,
        pass_fraction: if checked > 0 { passed as f64 / checked as f64 } else { f64::NAN },
        refined: points.iter().filter(|p| p.refinements > 0).count(),
        unresolved: points.iter().filter(|p| p.rel_error > DERIVATIVE_RTOL).count(),
        points,
        hk1_constant: hk1,
        hk2_constant: hk2,
        hk3_constant: hk3,
    })
}

/// `min(ψ_{T₁}, C₅ x^{-1/γ} / |log x|^{δ/γ})` with `x = 1 + C₆(t - T₁/2)`.
/// At `x = 1` the second branch is unbounded and the first one is taken.
pub fn bound_formula(t: f64, psi_t1: f64, c5: f64, c6: f64, gamma: f64, delta: f64, t1: f64) -> f64 {
    let x = 1.0 + c6 * (t - t1 / 2.0);
    let l = x.ln().abs();
    let second = if l == 0.0 && delta > 0.0 {
        f64::INFINITY
    } else {
        c5 * x.powf(-1.0 / gamma) / l.powf(delta / gamma)
    };
    psi_t1.min(second)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub times: Vec<f64>,
    pub psi_bar: Vec<f64>,
    /// `ψ̄^{-γ}`.
    pub u: Vec<f64>,
    /// Index from which the decaying branch is active, if it ever is.
    pub crossover: Option<usize>,
    pub monotone_after_crossover: bool,
    /// Smallest `∂u · log^δ u` on the decaying branch; positive when the
    /// transformed inequality shape holds on the table.
    pub u_rate_constant: f64,
}

/// Tabulates the bound on `times` (clipped to `[T₁/2, T₂/2]`). `psi_t1` is
/// the measured value at the left end of that window.
pub fn bound_curve(params: &BoundParams, psi_t1: f64, times: &[f64]) -> Result<BoundCurve> {
    params.validate()?;
    bound_curve_with_delta(params, params.delta(), psi_t1, times)
}

/// As [`bound_curve`] with an explicit exponent `δ`.
pub fn bound_curve_with_delta(
    params: &BoundParams,
    delta: f64,
    psi_t1: f64,
    times: &[f64],
) -> Result<BoundCurve> {
    if !(psi_t1 > 0.0) {
        return Err(LrpError::invalid("ψ_{T1} must be positive"));
    }
    let (lo, hi) = (params.t1 / 2.0, params.t2 / 2.0);
    let ts: Vec<f64> = times.iter().copied().filter(|&t| t >= lo && t <= hi).collect();
    let psi_bar: Vec<f64> = ts
        .iter()
        .map(|&t| bound_formula(t, psi_t1, params.big_c5, params.big_c6, params.gamma, delta, params.t1))
        .collect();
    let u: Vec<f64> = psi_bar.iter().map(|p| p.powf(-params.gamma)).collect();
    let crossover = psi_bar.iter().position(|&p| p < psi_t1);
    let mut monotone = true;
    let mut rate = f64::INFINITY;
    if let Some(c) = crossover {
        for i in c..ts.len() {
            if i + 1 < ts.len() {
                monotone &= psi_bar[i + 1] <= psi_bar[i] * (1.0 + 1e-12);
                let du = (u[i + 1] - u[i]) / (ts[i + 1] - ts[i]);
                let um = 0.5 * (u[i] + u[i + 1]);
                if um > 1.0 {
                    rate = rate.min(du * um.ln().powf(delta));
                }
            }
        }
    }
    Ok(BoundCurve {
        times: ts,
        psi_bar,
        u,
        crossover,
        monotone_after_crossover: monotone,
        u_rate_constant: rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub big_c5: f64,
    pub big_c6: f64,
    pub psi_t1: f64,
    pub window_points: usize,
}

/// Fits `C₆` as the smallest average rate of `u log^δ u` over the window
/// (the integrated form of the transformed inequality), then the smallest
/// `C₅` for which the measured series lies under the curve.
pub fn fit_bound_constants(series: &PsiSeries, params: &BoundParams) -> Result<FittedConstants> {
    let (lo, hi) = (params.t1 / 2.0, params.t2 / 2.0);
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 2 {
        return Err(LrpError::InsufficientData(
            "fewer than two grid points in the bound window".into(),
        ));
    }
    let g = params.gamma;
    let delta = params.delta();
    let fu = |psi: f64| {
        let u = psi.powf(-g);
        u * u.ln().max(0.0).powf(delta)
    };
    let (t0, p0) = pts[0];
    let f0 = fu(p0);
    let c6 = pts[1..]
        .iter()
        .map(|&(t, p)| (fu(p) - f0) / (t - t0))
        .fold(f64::INFINITY, f64::min);
    if !(c6 > 0.0 && c6.is_finite()) {
        return Err(LrpError::InsufficientData(format!(
            "u log^δ u does not grow on the window (rate {c6})"
        )));
    }
    let mut c5 = 0.0f64;
    for &(t, p) in &pts[1..] {
        let x = 1.0 + c6 * (t - params.t1 / 2.0);
        c5 = c5.max(p * x.powf(1.0 / g) * x.ln().abs().powf(delta / g));
    }
    Ok(FittedConstants {
        big_c5: c5 * (1.0 + 1e-12),
        big_c6: c6,
        psi_t1: p0,
        window_points: pts.len(),
    })
}

/// Measured values against the curve on the shared grid points.
pub fn curve_violations(series: &PsiSeries, curve: &BoundCurve) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for (k, &t) in curve.times.iter().enumerate() {
        if let Some(i) = series.times.iter().position(|&s| same_grid(&[s], &[t])) {
            let v = series.values[i];
            if v > curve.psi_bar[k] * (1.0 + 1e-12) {
                out.push((t, v, curve.psi_bar[k]));
            }
        }
    }
    out
}
