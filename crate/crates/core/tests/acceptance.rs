//! Acceptance criteria A1 to A10. Prints one line per criterion.
//!
//! `cargo test --test acceptance -- A2 A5` runs a subset. Exact-property
//! criteria (A5, A6, A8) fail the process when they fail; scaling-law
//! criteria are reported. Set `LRP_ACCEPTANCE_STRICT=1` to fail the process
//! on any FAIL line.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use lrp_core::cluster::{
    component_diameter_capped, connected_components, eccentricity_upper, two_sweep_lower,
    DiameterMode, EXACT_DIAMETER_CAP,
};
use lrp_core::fit::{fit_power_law, median};
use lrp_core::graph::gnp;
use lrp_core::harness::{bound_pipeline, giant, pick_vertices, resolve_ladder, sample_graph, BoundConfig, ExperimentConfig};
use lrp_core::hkbound::{
    bound_curve, curve_violations, fit_bound_constants, verify_differential_inequality, BoundParams,
    ClosedForm, TimeScales,
};
use lrp_core::renorm::{run_renorm, EventThresholds};
use lrp_core::rng::derive_seed;
use lrp_core::sampler::{enumerate_distance_classes, sample_edges, staged_reveal, PairPredicate};
use lrp_core::spectral::{
    coarse_graph, gap_lower_bound_from_flow, geodesic_flow, interpolated_flow, spectral_gap_exact,
    spectral_gap_iterative, DesignatedEdges, IntraPartGeodesics, ReversibleChain,
};
use lrp_core::walk::{
    heat_kernel_row_exact, pre_plateau_indices, psi_mc_collision, psi_series_exact, simulate_walk,
    tail_exponent, Mode, PsiMethod, PsiSeries,
};
use lrp_core::{Geometry, Graph, Lattice, LrpParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn regime(geometry: Geometry) -> LrpParams {
    LrpParams::new(1, 1.5, 1.0).unwrap().with_geometry(geometry)
}

fn seeds(tag: u64, k: usize) -> Vec<u64> {
    (0..k as u64).map(|r| derive_seed(tag, &[r])).collect()
}

/// `(N, median)` per N.
fn medians(rows: &[(u64, f64)]) -> Vec<(u64, f64)> {
    let mut ns: Vec<u64> = rows.iter().map(|r| r.0).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.0 == n).map(|r| r.1).collect();
            (n, median(&v))
        })
        .collect()
}

fn a1() -> Outcome {
    let params = regime(Geometry::Torus);
    let lat = Lattice::new(1, 1 << 14, Geometry::Torus).unwrap();
    let times: Vec<f64> = (6..=10).map(|k| (1u64 << k) as f64).collect();
    let runs: Vec<Vec<(Option<f64>, Option<f64>, usize)>> = seeds(0xA1, 10)
        .into_par_iter()
        .map(|seed| {
            let g = sample_graph(&lat, &params, seed).unwrap();
            let members = connected_components(&g.graph).largest_members();
            let dsum: usize = members.iter().map(|&v| g.graph.degree(v)).sum();
            pick_vertices(&members, 10, seed, 0x5354)
                .into_iter()
                .map(|x| {
                    let s = psi_series_exact(&g.graph, x, &times, Mode::Continuous).unwrap();
                    let keep = pre_plateau_indices(&s, dsum, lat.side());
                    let pts: Vec<(f64, f64)> = keep.iter().map(|&i| (s.times[i], s.values[i])).collect();
                    let with_log = fit_power_law(&pts, true).ok().map(|f| f.a);
                    let plain = fit_power_law(&pts, false).ok().map(|f| f.a);
                    (with_log, plain, pts.len())
                })
                .collect()
        })
        .collect();
    let all: Vec<_> = runs.into_iter().flatten().collect();
    let slopes: Vec<f64> = all.iter().filter_map(|r| r.0).collect();
    let plain: Vec<f64> = all.iter().filter_map(|r| r.1).collect();
    let pts: Vec<f64> = all.iter().map(|r| r.2 as f64).collect();
    let m = if slopes.is_empty() { f64::NAN } else { median(&slopes) };
    Outcome {
        pass: (-2.4..=-1.6).contains(&m),
        detail: format!(
            "median slope with log term {m:.3} over {} fits (target -2 in [-2.4, -1.6]); median pre-plateau points {}; plain power-law median {:.3}",
            slopes.len(),
            median(&pts),
            median(&plain)
        ),
    }
}

fn a2() -> Outcome {
    let params = regime(Geometry::Box);
    let jobs: Vec<(u64, u64)> = (7..=11)
        .flat_map(|k| seeds(0xA2 + k, 20).into_iter().map(move |s| (1u64 << k, s)))
        .collect();
    let rows: Vec<(u64, f64)> = jobs
        .into_par_iter()
        .map(|(n, seed)| {
            let lat = Lattice::new(1, n, Geometry::Box).unwrap();
            let g = sample_graph(&lat, &params, seed).unwrap();
            let chain = ReversibleChain::new(giant(&g.graph).0).unwrap();
            (n, spectral_gap_iterative(&chain, 1e-8).unwrap().gap)
        })
        .collect();
    let med = medians(&rows);
    let pts: Vec<(f64, f64)> = med.iter().map(|&(n, g)| (n as f64, g)).collect();
    let f = fit_power_law(&pts, false).unwrap();
    Outcome {
        pass: (-0.75..=-0.25).contains(&f.a),
        detail: format!("median-gap slope {:.3} ± {:.3} over N=2^7..2^11 (target -0.5 in [-0.75, -0.25])", f.a, f.se_a),
    }
}

fn a3() -> Outcome {
    let params = regime(Geometry::Box);
    let jobs: Vec<(u64, u64)> = (8..=13)
        .flat_map(|k| seeds(0xA3 + k, 20).into_iter().map(move |s| (1u64 << k, s)))
        .collect();
    let rows: Vec<(u64, f64)> = jobs
        .into_par_iter()
        .map(|(n, seed)| {
            let lat = Lattice::new(1, n, Geometry::Box).unwrap();
            let g = sample_graph(&lat, &params, seed).unwrap();
            (n, connected_components(&g.graph).sizes.get(1).copied().unwrap_or(0) as f64)
        })
        .collect();
    let med = medians(&rows);
    let under = med.iter().all(|&(n, c)| c <= (n as f64).ln().powi(3));
    let pts: Vec<(f64, f64)> = med.iter().filter(|p| p.1 > 0.0).map(|&(n, c)| (n as f64, c)).collect();
    let f = fit_power_law(&pts, false);
    let a = f.as_ref().map_or(f64::NAN, |f| f.a);
    let list: Vec<String> = med.iter().map(|(n, c)| format!("{n}:{c}")).collect();
    Outcome {
        pass: under && a <= 0.1,
        detail: format!(
            "median |C2| {} below (ln N)^3: {under}; fitted exponent {a:.3} (need <= 0.1)",
            list.join(" ")
        ),
    }
}

fn a4() -> Outcome {
    let params = regime(Geometry::Box);
    let jobs: Vec<(u64, u64)> = (8..=13)
        .flat_map(|k| seeds(0xA4 + k, 20).into_iter().map(move |s| (1u64 << k, s)))
        .collect();
    let rows: Vec<(u64, f64, f64, Option<f64>)> = jobs
        .into_par_iter()
        .map(|(n, seed)| {
            let lat = Lattice::new(1, n, Geometry::Box).unwrap();
            let g = sample_graph(&lat, &params, seed).unwrap();
            let sub = giant(&g.graph).0;
            let lo = two_sweep_lower(&sub, 4) as f64;
            let hi = eccentricity_upper(&sub, 64, seed) as f64;
            let exact = (n <= 512).then(|| {
                component_diameter_capped(&sub, DiameterMode::Exact, EXACT_DIAMETER_CAP).unwrap().value as f64
            });
            (n, lo, hi, exact)
        })
        .collect();
    let est: Vec<(u64, f64)> = rows.iter().map(|r| (r.0, r.3.unwrap_or(r.1))).collect();
    let upper: Vec<(u64, f64)> = rows.iter().map(|r| (r.0, r.3.unwrap_or(r.2))).collect();
    let sweep_exact = rows.iter().filter(|r| r.3.is_some()).filter(|r| Some(r.1) == r.3).count();
    let total_exact = rows.iter().filter(|r| r.3.is_some()).count();
    let scaled = |v: &[(u64, f64)]| -> Vec<f64> { medians(v).iter().map(|&(n, d)| d / (n as f64).powf(0.2)).collect() };
    let s = scaled(&est);
    let u = scaled(&upper);
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: dec(&s),
        detail: format!(
            "median Diam/N^0.2 over N=2^8..2^13: {} (strictly decreasing: {}); upper proxy {} ({}); two-sweep equals exact on {sweep_exact}/{total_exact}",
            fmt(&s),
            dec(&s),
            fmt(&u),
            dec(&u)
        ),
    }
}

fn mask_graph(n: usize, mask: u64) -> Option<Graph> {
    let mut edges = Vec::new();
    let mut bit = 0;
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if mask >> bit & 1 == 1 {
                edges.push((u, v));
            }
            bit += 1;
        }
    }
    let g = Graph::from_edges(n, &edges).ok()?;
    (connected_components(&g).sizes.len() == 1).then_some(g)
}

/// `1 - λ₂ >= 1/ρ(f)`; returns the pair.
fn sandwich(g: Graph) -> (f64, f64) {
    let c = ReversibleChain::new(g).unwrap();
    let gap = spectral_gap_exact(&c).unwrap();
    let lb = gap_lower_bound_from_flow(&c, &geodesic_flow(&c)).unwrap();
    (gap, lb)
}

fn a5() -> Outcome {
    // every labelled connected graph on 2..=6 vertices, and every graph on 7
    // vertices whose degrees are nonincreasing in the label (one labelling
    // per isomorphism class at least)
    let mut small: Vec<(usize, u64)> = Vec::new();
    for n in 2..=7usize {
        let pairs = n * (n - 1) / 2;
        for mask in 0..(1u64 << pairs) {
            if n == 7 {
                let mut deg = [0u32; 7];
                let mut bit = 0;
                for u in 0..7 {
                    for v in u + 1..7 {
                        if mask >> bit & 1 == 1 {
                            deg[u] += 1;
                            deg[v] += 1;
                        }
                        bit += 1;
                    }
                }
                if deg.windows(2).any(|w| w[1] > w[0]) {
                    continue;
                }
            }
            small.push((n, mask));
        }
    }
    let check = |(gap, lb): (f64, f64)| lb <= gap * (1.0 + 1e-12) + 1e-14;
    let (count_small, bad_small) = small
        .par_iter()
        .filter_map(|&(n, m)| mask_graph(n, m))
        .map(|g| (1usize, !check(sandwich(g)) as usize))
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let bad_random: usize = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let n = 8 + (derive_seed(0xA5, &[i]) % 493) as usize;
            let g = gnp(n, (2.0 * (n as f64).ln() / n as f64).min(1.0), derive_seed(0xA5, &[i, 1]));
            !check(sandwich(giant(&g).0)) as usize
        })
        .sum();
    let params = LrpParams::new(1, 1.5, 1.0).unwrap().with_forced_nearest_neighbours().unwrap();
    let bad_flow: usize = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let lat = Lattice::new(1, 24 + 4 * i, Geometry::Box).unwrap();
            let g = sample_graph(&lat, &params, derive_seed(0xA5F, &[i])).unwrap().graph;
            let nv = g.num_vertices();
            let block = 4 + (i as usize % 5) * 2;
            let part_of: Vec<u32> = (0..nv).map(|v| (v / block) as u32).collect();
            let k = part_of[nv - 1] as usize + 1;
            let fine = ReversibleChain::new(g.clone()).unwrap();
            let coarse = ReversibleChain::new(coarse_graph(&g, &part_of, k)).unwrap();
            let cf = geodesic_flow(&coarse);
            let des = DesignatedEdges::from_partition(&g, &part_of);
            let geo = IntraPartGeodesics::compute(&g, &part_of, k).unwrap();
            let f = interpolated_flow(&fine, &part_of, &coarse, &cf, &des, &geo).unwrap();
            let lb = gap_lower_bound_from_flow(&fine, &f).unwrap();
            !check((spectral_gap_exact(&fine).unwrap(), lb)) as usize
        })
        .sum();
    let mut kn_ok = true;
    let mut kn_worst = 0.0f64;
    for n in 2..=40usize {
        let (gap, lb) = sandwich(Graph::complete(n));
        kn_ok &= check((gap, lb)) && gap <= n as f64 * lb * (1.0 + 1e-12);
        kn_worst = kn_worst.max(gap / lb);
    }
    let bad = bad_small + bad_random + bad_flow;
    Outcome {
        pass: bad == 0 && kn_ok,
        detail: format!(
            "violations {bad} ({count_small} small graphs, 200 random, 20 interpolated flows); K_n within factor n: {kn_ok} (worst ratio {kn_worst:.3})"
        ),
    }
}

/// Dense transition matrix of the walk.
fn dense_p(g: &Graph, mode: Mode) -> DMatrix<f64> {
    let n = g.num_vertices();
    let mut p = DMatrix::zeros(n, n);
    for u in 0..n as u32 {
        let d = g.degree(u) as f64;
        for &v in g.neighbors(u) {
            p[(u as usize, v as usize)] += 1.0 / d;
        }
    }
    if mode == Mode::Lazy {
        p = (p + DMatrix::identity(n, n)) * 0.5;
    }
    p
}

/// `P_t` by matrix power or matrix exponential.
fn dense_kernel(g: &Graph, mode: Mode, t: f64) -> DMatrix<f64> {
    let n = g.num_vertices();
    let p = dense_p(g, mode);
    match mode {
        Mode::Continuous => ((p - DMatrix::identity(n, n)) * t).exp(),
        _ => p.pow(t as u32),
    }
}

fn oracle_corpus() -> Vec<Graph> {
    let mut out = Vec::new();
    for n in 2..=12usize {
        out.push(Graph::path(n));
        out.push(Graph::complete(n));
        if n >= 3 {
            out.push(Graph::cycle(n));
        }
        let star: Vec<(u32, u32)> = (1..n as u32).map(|v| (0, v)).collect();
        out.push(Graph::from_edges(n, &star).unwrap());
        for k in 0..6u64 {
            let g = gnp(n, 0.45, derive_seed(0xA6, &[n as u64, k]));
            if connected_components(&g).sizes.len() == 1 {
                out.push(g);
            }
        }
    }
    out
}

fn a6() -> Outcome {
    let corpus = oracle_corpus();
    let cases = [
        (Mode::Continuous, vec![0.0, 0.3, 1.0, 2.5, 7.0]),
        (Mode::Discrete, vec![0.0, 1.0, 2.0, 5.0, 9.0]),
        (Mode::Lazy, vec![0.0, 1.0, 3.0, 8.0]),
    ];
    let mut worst = 0.0f64;
    for g in &corpus {
        for (mode, times) in &cases {
            for x in 0..g.num_vertices() as u32 {
                let s = psi_series_exact(g, x, times, *mode).unwrap();
                for (i, &t) in times.iter().enumerate() {
                    let row = heat_kernel_row_exact(g, x, t, *mode).unwrap();
                    let k = dense_kernel(g, *mode, t);
                    for (y, r) in row.iter().enumerate() {
                        worst = worst.max((r - k[(x as usize, y)]).abs());
                    }
                    let k2 = dense_kernel(g, *mode, 2.0 * t);
                    let psi = k2[(x as usize, x as usize)] / g.degree(x) as f64;
                    worst = worst.max((s.values[i] - psi).abs());
                }
            }
        }
    }
    let mc: Vec<bool> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let g = &corpus[(i as usize * 7) % corpus.len()];
            let x = (i as usize % g.num_vertices()) as u32;
            let (mode, t) = match i % 3 {
                0 => (Mode::Continuous, 0.5 + (i % 5) as f64 * 0.7),
                1 => (Mode::Discrete, (1 + i % 4) as f64),
                _ => (Mode::Lazy, (1 + i % 6) as f64),
            };
            let exact = psi_series_exact(g, x, &[t], mode).unwrap().values[0];
            let est = psi_mc_collision(g, x, t, mode, 100_000, derive_seed(0xA6C, &[i])).unwrap();
            let se = est.stderr.as_ref().unwrap()[0];
            let dev = (est.values[0] - exact).abs();
            if se == 0.0 { dev < 1e-12 } else { dev <= 4.0 * se }
        })
        .collect();
    let hits = mc.iter().filter(|&&b| b).count();
    Outcome {
        pass: worst <= 1e-10 && hits >= 95,
        detail: format!(
            "max deviation from dense oracle {worst:.2e} over {} graphs (need <= 1e-10); collision estimator within 4 SE on {hits}/100 (need >= 95)",
            corpus.len()
        ),
    }
}

fn class_index(classes: &[lrp_core::sampler::DistanceClass], lat: &Lattice, u: u32, v: u32) -> usize {
    let sq: i64 = lat.displacement(u, v).iter().map(|c| c * c).sum();
    classes.binary_search_by_key(&(sq as u64), |c| c.sq_dist).expect("edge in a known class")
}

/// Two-sided exact binomial p-value.
fn binom_p(k: u64, n: u64, p: f64) -> f64 {
    if n == 0 || p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let b = Binomial::new(p.min(1.0), n).unwrap();
    let lo = b.cdf(k);
    let hi = if k == 0 { 1.0 } else { 1.0 - b.cdf(k - 1) };
    (2.0 * lo.min(hi)).min(1.0)
}

fn a7() -> Outcome {
    let alpha = 1e-3;
    let mut lines = Vec::new();
    let mut pass = true;
    for (d, n) in [(1usize, 64u64), (2, 6)] {
        let params = LrpParams::new(d, 1.5 * d as f64, 1.0).unwrap().with_geometry(Geometry::Box);
        let lat = Lattice::new(d, n, Geometry::Box).unwrap();
        let all = PairPredicate::all();
        let classes = enumerate_distance_classes(&lat, &all, &params).unwrap();
        assert!(classes.iter().all(|c| c.shape.is_none()) && classes.windows(2).all(|w| w[0].sq_dist < w[1].sq_dist));
        let k = classes.len();
        let reps = 200u64;
        let count = |edges: &[(u32, u32)], acc: &mut Vec<u64>| {
            for &(u, v) in edges {
                acc[class_index(&classes, &lat, u, v)] += 1;
            }
        };
        let mut one = vec![0u64; k];
        let mut staged = vec![0u64; k];
        let stages = [
            PairPredicate::all().linf(1, 1),
            PairPredicate::all().linf(2, 5),
            PairPredicate::all().linf(6, u64::MAX),
        ];
        for r in 0..reps {
            count(&sample_edges(&lat, &all, &params, derive_seed(0xA7, &[d as u64, r])).unwrap(), &mut one);
            for s in staged_reveal(&lat, &stages, &params, derive_seed(0xA7B, &[d as u64, r])).unwrap() {
                count(&s, &mut staged);
            }
        }
        // per-class exact binomial tests, Bonferroni over classes
        let min_p = classes
            .iter()
            .zip(&one)
            .map(|(c, &o)| binom_p(o, c.multiplicity * reps, c.probability))
            .fold(1.0f64, f64::min);
        // pooled Pearson statistic over classes with expected count >= 5
        let (stat, dof) = classes.iter().zip(&one).fold((0.0, 0usize), |(s, k), (c, &o)| {
            let e = (c.multiplicity * reps) as f64 * c.probability;
            if e >= 5.0 {
                let var = e * (1.0 - c.probability);
                (s + (o as f64 - e).powi(2) / var, k + 1)
            } else {
                (s, k)
            }
        });
        let chi_p = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
        // staged union against one-shot: two-proportion statistic per class
        let mut two_stat = 0.0;
        let mut two_dof = 0usize;
        let mut min_two = 1.0f64;
        for (i, c) in classes.iter().enumerate() {
            let m = (c.multiplicity * reps) as f64;
            let pooled = (one[i] + staged[i]) as f64 / (2.0 * m);
            if pooled * m < 5.0 || pooled >= 1.0 {
                continue;
            }
            let z2 = (one[i] as f64 - staged[i] as f64).powi(2) / (2.0 * m * pooled * (1.0 - pooled));
            two_stat += z2;
            two_dof += 1;
            min_two = min_two.min(1.0 - ChiSquared::new(1.0).unwrap().cdf(z2));
        }
        let two_p = 1.0 - ChiSquared::new(two_dof as f64).unwrap().cdf(two_stat);
        let ok = min_p * k as f64 >= alpha && chi_p >= alpha && min_two * two_dof as f64 >= alpha && two_p >= alpha;
        pass &= ok;
        lines.push(format!(
            "d={d}: {k} classes, Bonferroni min p {:.3}, pooled chi2 p {chi_p:.3} (dof {dof}), staged-vs-one-shot min p {:.3} pooled p {two_p:.3}",
            (min_p * k as f64).min(1.0),
            (min_two * two_dof as f64).min(1.0)
        ));
    }
    Outcome {
        pass,
        detail: format!("{} over 200 seeds at 1e-3", lines.join("; ")),
    }
}

fn a8() -> Outcome {
    let cfg = ExperimentConfig::default();
    let params = cfg.model().unwrap();
    let n = 1u64 << 12;
    let (ladder, _) = resolve_ladder(&cfg, &params, n).unwrap();
    let lat = Lattice::new(1, n, Geometry::Box).unwrap();
    let runs: Vec<(bool, usize)> = seeds(0xA8, 50)
        .into_par_iter()
        .map(|seed| {
            let r = run_renorm(&lat, &params, &ladder, &EventThresholds::default(), seed).unwrap();
            let ok = r.flags().core_events();
            (ok, if ok { r.invariant_violations().len() } else { 0 })
        })
        .collect();
    let succ = runs.iter().filter(|r| r.0).count();
    let viol: usize = runs.iter().map(|r| r.1).sum();
    Outcome {
        pass: viol == 0 && succ > 0,
        detail: format!(
            "{viol} invariant violations over {succ} runs with O∧A∧E∧F; flag success {succ}/50 = {:.0}% (calibration target 80%, reported); ladder {}/{}/{}/{} rho {:.3}",
            100.0 * succ as f64 / 50.0,
            ladder.n1,
            ladder.n2,
            ladder.n3,
            ladder.n4,
            ladder.rho
        ),
    }
}

fn k2_check() -> (bool, String) {
    let times: Vec<f64> = (0..=60).map(|i| 0.05 + i as f64 * 0.05).collect();
    let f = |t: f64| (1.0 + (-4.0 * t).exp()) / 2.0;
    let series = PsiSeries {
        start: 0,
        start_degree: 1,
        mode: Mode::Continuous,
        times: times.clone(),
        values: times.iter().map(|&t| f(t)).collect(),
        method: PsiMethod::ExactPropagation,
        stderr: None,
    };
    // one part K₂: gap 2, volume 2, degree ratio 1; (1+C₃) ln 2 / 2 >= 1/2
    let mut p = BoundParams {
        gamma: 1.0,
        delta1: 0.0,
        delta2: 0.0,
        c1: 0.5,
        big_c1: 2.0,
        c2: 1e-3,
        c3: 0.5,
        big_c3: 0.45,
        big_c4: 100.0,
        big_c5: 1.0,
        big_c6: 1.0,
        t1: times[0],
        t2: *times.last().unwrap(),
        scales: TimeScales::constant(&times, 2.0, 2.0),
    };
    let ineq = verify_differential_inequality(&series, &ClosedForm(f), &p, &[1.0], None).unwrap();
    let c = fit_bound_constants(&series, &p).unwrap();
    p.big_c5 = c.big_c5;
    p.big_c6 = c.big_c6;
    let curve = bound_curve(&p, c.psi_t1, &times).unwrap();
    let viol = curve_violations(&series, &curve).len();
    (
        viol == 0 && ineq.pass_fraction >= 0.99,
        format!("K2: inequality {}/{}, curve violations {viol}", ineq.passed, ineq.checked),
    )
}

fn a9() -> Outcome {
    let (k2_ok, k2_msg) = k2_check();
    let cfg = ExperimentConfig::default();
    let params = cfg.model().unwrap();
    let n = 1u64 << 12;
    let (ladder, _) = resolve_ladder(&cfg, &params, n).unwrap();
    let lat = Lattice::new(1, n, Geometry::Box).unwrap();
    let bc = BoundConfig::default();
    let mut qualifying = Vec::new();
    let mut tried = 0;
    for chunk in seeds(0xA9, 120).chunks(8) {
        let runs: Vec<_> = chunk
            .par_iter()
            .map(|&s| bound_pipeline(&lat, &params, &ladder, &EventThresholds::default(), &bc, s).unwrap())
            .collect();
        tried += chunk.len();
        qualifying.extend(runs.into_iter().filter(|r| r.all_assumptions_pass && r.curve.is_some()));
        if qualifying.len() >= 5 {
            break;
        }
    }
    qualifying.truncate(5);
    let lrp_ok = qualifying.len() == 5
        && qualifying
            .iter()
            .all(|r| r.curve_violations == 0 && r.inequality.as_ref().is_some_and(|q| q.pass_fraction >= 0.99));
    let per: Vec<String> = qualifying
        .iter()
        .map(|r| {
            let q = r.inequality.as_ref().unwrap();
            format!("{}/{} viol {}", q.passed, q.checked, r.curve_violations)
        })
        .collect();
    Outcome {
        pass: k2_ok && lrp_ok,
        detail: format!(
            "{k2_msg}; {} qualifying toy runs in {tried} seeds: [{}]",
            qualifying.len(),
            per.join(", ")
        ),
    }
}

fn a10() -> Outcome {
    let params = regime(Geometry::Torus);
    let lat = Lattice::new(1, 1 << 14, Geometry::Torus).unwrap();
    let mut incs = Vec::new();
    let mut walks = 0;
    for seed in seeds(0xA10, 20) {
        let g = sample_graph(&lat, &params, seed).unwrap();
        let members = connected_components(&g.graph).largest_members();
        for (k, x) in pick_vertices(&members, 4, seed, 0x57).into_iter().enumerate() {
            let w = simulate_walk(&g, x, 1e5, Mode::Continuous, derive_seed(seed, &[k as u64])).unwrap();
            incs.extend(w.increments);
            walks += 1;
        }
        if incs.len() >= 1_000_000 {
            break;
        }
    }
    let fit = tail_exponent(&incs, 10.0, 1000.0, 12).unwrap();
    Outcome {
        pass: (fit.alpha - 0.5).abs() <= 0.2,
        detail: format!(
            "tail exponent {:.3} on [10, 1000] from {} increments over {walks} walks (target 0.5 ± 0.2)",
            fit.alpha,
            incs.len()
        ),
    }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::var("LRP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(&str, fn() -> Outcome, bool); 10] = [
        ("A1", a1, false),
        ("A2", a2, false),
        ("A3", a3, false),
        ("A4", a4, false),
        ("A5", a5, true),
        ("A6", a6, true),
        ("A7", a7, false),
        ("A8", a8, true),
        ("A9", a9, false),
        ("A10", a10, false),
    ];
    let mut gate_failed = false;
    let mut failed = 0;
    let mut ran = 0;
    for (id, f, gate) in criteria {
        if !filter.is_empty() && !filter.iter().any(|a| a == id) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        ran += 1;
        if !o.pass {
            failed += 1;
            gate_failed |= gate || strict;
        }
        println!(
            "{id} {} {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if gate_failed {
        std::process::exit(1);
    }
}
