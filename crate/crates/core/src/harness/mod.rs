//! Experiment configuration, replica orchestration and result files.
//!
//! Each experiment runs a list of `(N, replica)` jobs in parallel, collects
//! results in job order and writes CSV tables whose bytes depend only on
//! the configuration and seed. `manifest.json` additionally records
//! wall-clock time and file digests.

pub mod io;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{
    component_diameter_capped, connected_components, eccentricity_upper, two_sweep_lower,
    DiameterMode, EXACT_DIAMETER_CAP,
};
use crate::error::{LrpError, Result};
use crate::fit::{fit_power_law, median, FitResult};
use crate::graph::{build_graph, Graph, LatticeGraph, Provenance};
use crate::hkbound::{
    bound_curve, check_assumptions, curve_violations, escape_probabilities, fit_bound_constants,
    measure_partition, verify_differential_inequality, BoundParams, ExactWalk, TimeScales,
};
use crate::lattice::Lattice;
use crate::params::{Geometry, LrpParams};
use crate::renorm::{
    calibrate_rho, make_ladder, partition_diagnostics, run_renorm, EventThresholds, LadderMode,
    LadderOverrides, ScaleLadder,
};
use crate::rng::{derive_seed, stream};
use crate::sampler::{sample_edges, PairPredicate};
use crate::spectral::{spectral_gap_iterative, ReversibleChain};
use crate::walk::{pre_plateau_indices, psi_mc_collision, psi_series_exact, Mode, PsiSeries};
use io::{fmt_f64, partition_part_table, partition_vertex_table, write_edge_list, write_text, Table};
use plot::{emit_plot, PlotKind};

pub const TOOL: &str = "lrp";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    ClusterStats,
    Partition,
    GapScaling,
    DiameterScaling,
    Heatkernel,
    VerifyBound,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Sample => "sample",
            ExperimentKind::ClusterStats => "cluster-stats",
            ExperimentKind::Partition => "partition",
            ExperimentKind::GapScaling => "gap-scaling",
            ExperimentKind::DiameterScaling => "diameter-scaling",
            ExperimentKind::Heatkernel => "heatkernel",
            ExperimentKind::VerifyBound => "verify-bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub mode: LadderMode,
    /// Defaults to `s + (2d - s)/5`.
    pub s_prime: Option<f64>,
    /// Defaults to a pilot calibration.
    pub rho: Option<f64>,
    /// Toy sides; missing ones default to `N/2, N/8, N/32, N/64`.
    pub overrides: LadderOverrides,
    /// Use the toy ladder when the formula ladder is infeasible.
    pub toy_fallback: bool,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            mode: LadderMode::ToyOverride,
            s_prime: None,
            rho: None,
            overrides: LadderOverrides::default(),
            toy_fallback: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiChoice {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    /// Defaults to `(s - d)/d`.
    pub gamma: Option<f64>,
    pub delta1: f64,
    pub delta2: f64,
    /// Lower limit for `C₃`.
    pub big_c3: f64,
    pub t_step: f64,
    pub t_max: f64,
    /// Smallest admissible `T₁`.
    pub t_min: f64,
    /// `B_R` keeps vertices with `|x|_inf <= (1 - inner_fraction) N`.
    pub inner_fraction: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            gamma: None,
            delta1: 1.0,
            delta2: 1.0,
            big_c3: 0.1,
            t_step: 0.125,
            t_max: 16.0,
            t_min: 0.5,
            inner_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub gap_tol: f64,
    /// Exact diameters for `N` up to this value, sweep proxies above.
    pub exact_diameter_max_n: u64,
    pub sweep_rounds: usize,
    pub eccentricity_samples: usize,
    pub times: Vec<f64>,
    pub starts: usize,
    pub mode: Mode,
    pub psi_method: PsiChoice,
    pub mc_reps: usize,
    pub log_correction: bool,
    pub thresholds: EventThresholds,
    pub bound: BoundConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            gap_tol: 1e-8,
            exact_diameter_max_n: 512,
            sweep_rounds: 4,
            eccentricity_samples: 64,
            times: vec![64.0, 128.0, 256.0, 512.0, 1024.0],
            starts: 10,
            mode: Mode::Continuous,
            psi_method: PsiChoice::Exact,
            mc_reps: 100_000,
            log_correction: true,
            thresholds: EventThresholds::default(),
            bound: BoundConfig::default(),
        }
    }
}

fn default_params() -> LrpParams {
    LrpParams::new(1, 1.5, 1.0).expect("valid defaults")
}

fn default_n() -> Vec<u64> {
    vec![64]
}

fn default_seed() -> u64 {
    1
}

fn default_replicas() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default = "default_params")]
    pub params: LrpParams,
    /// Force nearest-neighbour bonds open.
    #[serde(default)]
    pub nearest_neighbours_open: bool,
    #[serde(default = "default_n")]
    pub n: Vec<u64>,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| LrpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        if self.n.is_empty() {
            return Err(LrpError::Config("empty N sweep".into()));
        }
        if self.n.contains(&0) {
            return Err(LrpError::Config("N must be positive".into()));
        }
        if self.replicas == 0 {
            return Err(LrpError::Config("replicas must be >= 1".into()));
        }
        let e = &self.estimator;
        if !(e.gap_tol > 0.0) {
            return Err(LrpError::Config("gap_tol must be positive".into()));
        }
        if e.times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(LrpError::Config("times must be finite and nonnegative".into()));
        }
        if e.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LrpError::Config("times must increase strictly".into()));
        }
        let b = &e.bound;
        if !(b.t_step > 0.0 && b.t_max > b.t_min && b.t_min >= 0.0) {
            return Err(LrpError::Config("bound grid needs t_step > 0 and t_max > t_min >= 0".into()));
        }
        if !(0.0..1.0).contains(&b.inner_fraction) {
            return Err(LrpError::Config("inner_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Parameters actually sampled.
    pub fn model(&self) -> Result<LrpParams> {
        let p = self.params.clone();
        p.validate()?;
        if self.nearest_neighbours_open {
            p.with_forced_nearest_neighbours()
        } else {
            Ok(p)
        }
    }

    /// SHA-256 of the canonical JSON form with the output directory removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Overrides applied by the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub config_hash: String,
    /// Invariant violations observed on runs where they must not occur.
    pub violations: usize,
    pub notes: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    base: Vec<(String, String)>,
    files: Vec<String>,
}

impl Writer {
    fn table(&mut self, name: &str, mut t: Table) -> Result<String> {
        let mut meta = self.base.clone();
        meta.append(&mut t.meta);
        t.meta = meta;
        let csv = t.to_csv();
        write_text(&self.dir.join(name), &csv)?;
        self.files.push(name.to_string());
        Ok(csv)
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        write_text(&self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn plot(&mut self, name: &str, csv: &str, kind: PlotKind) -> Result<()> {
        match emit_plot(csv, kind) {
            Ok(svg) => self.text(name, &svg),
            // nothing plottable is not an error for the run
            Err(LrpError::Schema(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }
}

/// Runs one experiment and writes its result files.
pub fn run_experiment(
    config: &ExperimentConfig,
    kind: ExperimentKind,
    options: &RunOptions,
) -> Result<ExperimentOutcome> {
    let mut cfg = config.clone();
    if let Some(k) = cfg.kind {
        if k != kind {
            return Err(LrpError::Config(format!(
                "config is for {} but {} was requested",
                k.as_str(),
                kind.as_str()
            )));
        }
    }
    cfg.kind = Some(kind);
    if let Some(s) = options.seed {
        cfg.seed = s;
    }
    if let Some(r) = options.replicas {
        cfg.replicas = r;
    }
    if let Some(o) = &options.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    let out_dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("results/{}", kind.as_str())));
    std::fs::create_dir_all(&out_dir)?;
    let hash = cfg.hash();
    let mut w = Writer {
        dir: out_dir.clone(),
        base: vec![
            ("tool".into(), format!("{TOOL} {VERSION}")),
            ("kind".into(), kind.as_str().into()),
            ("config_sha256".into(), hash.clone()),
            ("seed".into(), cfg.seed.to_string()),
        ],
        files: Vec::new(),
    };
    let started = Instant::now();
    let mut run = || -> Result<(usize, Vec<String>)> {
        match kind {
            ExperimentKind::Sample => sample_experiment(&cfg, &mut w),
            ExperimentKind::ClusterStats => cluster_stats_experiment(&cfg, &mut w),
            ExperimentKind::Partition => partition_experiment(&cfg, &mut w),
            ExperimentKind::GapScaling => gap_experiment(&cfg, &mut w),
            ExperimentKind::DiameterScaling => diameter_experiment(&cfg, &mut w),
            ExperimentKind::Heatkernel => heatkernel_experiment(&cfg, &mut w),
            ExperimentKind::VerifyBound => verify_bound_experiment(&cfg, &mut w),
        }
    };
    let (violations, notes) = match options.threads {
        Some(m) => rayon::ThreadPoolBuilder::new()
            .num_threads(m.max(1))
            .build()
            .map_err(|e| LrpError::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut digests = Vec::new();
    for f in &w.files {
        let bytes = std::fs::read(out_dir.join(f))?;
        digests.push(serde_json::json!({ "name": f, "sha256": hex(&Sha256::digest(&bytes)) }));
    }
    let manifest = serde_json::json!({
        "tool": TOOL,
        "version": VERSION,
        "kind": kind.as_str(),
        "config_sha256": hash,
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
        "violations": violations,
        "notes": notes,
        "config": cfg,
        "files": digests,
    });
    write_text(
        &out_dir.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    let mut files = w.files.clone();
    files.sort();
    let outcome = ExperimentOutcome {
        kind,
        out_dir,
        files,
        config_hash: hash,
        violations,
        notes,
    };
    if violations > 0 {
        return Err(LrpError::InvariantViolation(format!(
            "{violations} partition invariant violations; results in {}",
            outcome.out_dir.display()
        )));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy)]
struct Job {
    n: u64,
    replica: usize,
    seed: u64,
}

fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &n in &cfg.n {
        for replica in 0..cfg.replicas {
            out.push(Job {
                n,
                replica,
                seed: derive_seed(cfg.seed, &[n, replica as u64]),
            });
        }
    }
    out
}

fn par_jobs<T: Send>(cfg: &ExperimentConfig, f: impl Fn(Job) -> Result<T> + Sync) -> Result<Vec<(Job, T)>> {
    jobs(cfg)
        .into_par_iter()
        .map(|j| f(j).map(|t| (j, t)))
        .collect()
}

/// Samples the full configuration on the region.
pub fn sample_graph(lattice: &Lattice, params: &LrpParams, seed: u64) -> Result<LatticeGraph> {
    let edges = sample_edges(lattice, &PairPredicate::all(), params, seed)?;
    build_graph(
        lattice.clone(),
        &edges,
        Some(params),
        Provenance {
            params: Some(params.clone()),
            seed: Some(seed),
            stages: vec!["all".into()],
        },
    )
}

fn lattice_for(cfg: &ExperimentConfig, params: &LrpParams, n: u64) -> Result<Lattice> {
    Lattice::new(params.d, n, cfg.params.geometry)
}

/// Largest component as an induced subgraph: `(subgraph, region indices)`.
pub fn giant(graph: &Graph) -> (Graph, Vec<u32>) {
    let members = connected_components(graph).largest_members();
    graph.induced_subgraph(&members)
}

fn fit_rows(t: &mut Table, quantity: &str, pts: &[(f64, f64)], with_log: &[bool]) {
    for &wl in with_log {
        match fit_power_law(pts, wl) {
            Ok(f) => t.push(fit_row(quantity, wl, &f)),
            Err(_) => t.push(vec![
                quantity.into(),
                wl.to_string(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                pts.len().to_string(),
            ]),
        }
    }
}

fn fit_row(quantity: &str, wl: bool, f: &FitResult) -> Vec<String> {
    vec![
        quantity.into(),
        wl.to_string(),
        fmt_f64(f.a),
        f.b.map_or("NA".into(), fmt_f64),
        fmt_f64(f.c),
        fmt_f64(f.se_a),
        fmt_f64(f.r2),
        f.points.to_string(),
    ]
}

const FIT_HEADER: [&str; 8] = ["quantity", "log_correction", "a", "b", "c", "se_a", "r2", "points"];

/// `(N, median of values at N)` for each N with a finite positive median.
fn medians_by_n(rows: &[(u64, f64)]) -> Vec<(f64, f64)> {
    let mut ns: Vec<u64> = rows.iter().map(|r| r.0).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .filter_map(|n| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.0 == n && r.1.is_finite())
                .map(|r| r.1)
                .collect();
            let m = median(&v);
            (m > 0.0).then_some((n as f64, m))
        })
        .collect()
}

fn sample_experiment(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(usize, Vec<String>)> {
    let params = cfg.model()?;
    let dir = w.dir.clone();
    let res = par_jobs(cfg, |j| {
        let lat = lattice_for(cfg, &params, j.n)?;
        let g = sample_graph(&lat, &params, j.seed)?;
        let name = format!("edges/N{}_r{}.txt", j.n, j.replica);
        let edges: Vec<(u32, u32)> = g.graph.edges().collect();
        write_edge_list(&dir.join(&name), &lat, j.seed, &edges)?;
        let lab = connected_components(&g.graph);
        Ok((name, g.num_vertices(), edges.len(), lab.sizes.first().copied().unwrap_or(0), lab.sizes.get(1).copied().unwrap_or(0)))
    })?;
    let mut t = Table::new(&["N", "replica", "seed", "vertices", "edges", "mean_degree", "c1", "c2", "file"]);
    let mut per_n: Vec<serde_json::Value> = Vec::new();
    for (j, (name, nv, ne, c1, c2)) in &res {
        w.files.push(name.clone());
        t.push(vec![
            j.n.to_string(),
            j.replica.to_string(),
            j.seed.to_string(),
            nv.to_string(),
            ne.to_string(),
            fmt_f64(2.0 * *ne as f64 / *nv as f64),
            c1.to_string(),
            c2.to_string(),
            name.clone(),
        ]);
    }
    for &n in &cfg.n {
        let rows: Vec<_> = res.iter().filter(|(j, _)| j.n == n).collect();
        let c1: Vec<f64> = rows.iter().map(|(_, r)| r.3 as f64).collect();
        let ed: Vec<f64> = rows.iter().map(|(_, r)| r.2 as f64).collect();
        per_n.push(serde_json::json!({
            "N": n,
            "replicas": rows.len(),
            "vertices": rows[0].1.1,
            "median_edges": median(&ed),
            "median_c1": median(&c1),
        }));
    }
    w.table("sample.csv", t)?;
    let summary = serde_json::json!({
        "tool": format!("{TOOL} {VERSION}"),
        "config_sha256": cfg.hash(),
        "seed": cfg.seed,
        "sweep": per_n,
    });
    w.text("summary.json", &(serde_json::to_string_pretty(&summary).unwrap() + "\n"))?;
    Ok((0, Vec::new()))
}

fn cluster_stats_experiment(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(usize, Vec<String>)> {
    let params = cfg.model()?;
    let res = par_jobs(cfg, |j| {
        let lat = lattice_for(cfg, &params, j.n)?;
        let g = sample_graph(&lat, &params, j.seed)?;
        let lab = connected_components(&g.graph);
        Ok((g.num_vertices(), lab.sizes.first().copied().unwrap_or(0), lab.sizes.get(1).copied().unwrap_or(0), lab.sizes.len()))
    })?;
    let mut t = Table::new(&["N", "replica", "seed", "vertices", "c1", "c2", "c1_fraction", "components"]);
    for (j, (nv, c1, c2, k)) in &res {
        t.push(vec![
            j.n.to_string(),
            j.replica.to_string(),
            j.seed.to_string(),
            nv.to_string(),
            c1.to_string(),
            c2.to_string(),
            fmt_f64(*c1 as f64 / *nv as f64),
            k.to_string(),
        ]);
    }
    let csv = w.table("cluster_stats.csv", t)?;
    let mut f = Table::new(&FIT_HEADER);
    let c2: Vec<(u64, f64)> = res.iter().map(|(j, r)| (j.n, r.2 as f64)).collect();
    fit_rows(&mut f, "c2_median", &medians_by_n(&c2), &[false]);
    w.table("cluster_stats_fit.csv", f)?;
    w.plot("cluster_stats.svg", &csv, PlotKind::ClusterStats)?;
    Ok((0, Vec::new()))
}

/// Ladder for region side `n`, with the toy fallback applied.
pub fn resolve_ladder(cfg: &ExperimentConfig, params: &LrpParams, n: u64) -> Result<(ScaleLadder, Vec<String>)> {
    let lc = &cfg.ladder;
    let d = params.d as f64;
    let s_prime = lc.s_prime.unwrap_or(params.s + (2.0 * d - params.s) / 5.0);
    let toy = LadderOverrides {
        n1: lc.overrides.n1.or(Some(n / 2)),
        n2: lc.overrides.n2.or(Some(n / 8)),
        n3: lc.overrides.n3.or(Some(n / 32)),
        n4: lc.overrides.n4.or(Some(n / 64)),
    };
    let mut notes = Vec::new();
    let n4_hint = |l: &ScaleLadder| l.n4;
    let build = |mode: LadderMode, o: &LadderOverrides, rho: f64| make_ladder(n, params, s_prime, rho, mode, o);
    let provisional = match lc.mode {
        LadderMode::Formula => build(LadderMode::Formula, &lc.overrides, 0.5)?,
        LadderMode::ToyOverride => build(LadderMode::ToyOverride, &toy, 0.5)?,
    };
    let (mode, overrides) = if provisional.feasible {
        (lc.mode, if lc.mode == LadderMode::Formula { lc.overrides.clone() } else { toy.clone() })
    } else if lc.mode == LadderMode::Formula && lc.toy_fallback {
        notes.push(format!(
            "N={n}: formula ladder infeasible ({}); using toy ladder",
            provisional.explanation.clone().unwrap_or_default()
        ));
        (LadderMode::ToyOverride, toy.clone())
    } else {
        return Err(LrpError::Infeasible(format!(
            "N={n}: {}",
            provisional.explanation.clone().unwrap_or_default()
        )));
    };
    let probe = build(mode, &overrides, 0.5)?;
    if !probe.feasible {
        return Err(LrpError::Infeasible(format!(
            "N={n}: {}",
            probe.explanation.unwrap_or_default()
        )));
    }
    let rho = match lc.rho {
        Some(r) => r,
        None => {
            let lat = Lattice::new(params.d, n, Geometry::Box)?;
            calibrate_rho(&lat, params, n4_hint(&probe), derive_seed(cfg.seed, &[n, 0x70696c6f74]))?
        }
    };
    Ok((build(mode, &overrides, rho)?, notes))
}

fn require_box(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.params.geometry != Geometry::Box {
        return Err(LrpError::Config("the staged partition needs box geometry".into()));
    }
    Ok(())
}

fn partition_experiment(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(usize, Vec<String>)> {
    require_box(cfg)?;
    let params = cfg.model()?;
    let mut ladders = Vec::new();
    let mut notes = Vec::new();
    for &n in &cfg.n {
        let (l, mut nn) = resolve_ladder(cfg, &params, n)?;
        notes.append(&mut nn);
        ladders.push((n, l));
    }
    let th = &cfg.estimator.thresholds;
    let res = par_jobs(cfg, |j| {
        let ladder = &ladders.iter().find(|(n, _)| *n == j.n).unwrap().1;
        let lat = Lattice::new(params.d, j.n, Geometry::Box)?;
        let run = run_renorm(&lat, &params, ladder, th, j.seed)?;
        let flags = run.flags();
        let violations = if flags.core_events() { run.invariant_violations() } else { Vec::new() };
        let p2 = run.partition_n2();
        let p1 = run.partition_n1();
        let diag = partition_diagnostics(&run.graph().graph, &p2);
        let c1 = connected_components(&run.graph().graph).sizes[0];
        Ok((ladder.clone(), flags, violations, partition_vertex_table(&p2), partition_part_table(&p2), partition_part_table(&p1), diag, c1))
    })?;
    let mut t = Table::new(&[
        "N", "replica", "seed", "n1", "n2", "n3", "n4", "rho", "flags", "O", "A", "E", "F", "R",
        "parts_n2", "parts_n1", "c1", "violations", "volume_min", "volume_max", "max_diameter",
        "min_degree_ratio",
    ]);
    let mut total = 0;
    for (j, (l, flags, viol, vt, pt, p1t, diag, c1)) in res {
        let tag = format!("N{}_r{}", j.n, j.replica);
        for (suffix, mut table) in [("vertices", vt), ("parts", pt), ("n1_parts", p1t)] {
            table.meta("N", j.n);
            table.meta("replica", j.replica);
            table.meta("flags", flags.compact());
            w.table(&format!("partitions/{tag}_{suffix}.csv"), table)?;
        }
        for v in &viol {
            notes.push(format!("{tag}: {v}"));
        }
        total += viol.len();
        let b = |f: &crate::renorm::StageFlag| (f.ok as u8).to_string();
        t.push(vec![
            j.n.to_string(),
            j.replica.to_string(),
            j.seed.to_string(),
            l.n1.to_string(),
            l.n2.to_string(),
            l.n3.to_string(),
            l.n4.to_string(),
            fmt_f64(l.rho),
            flags.compact(),
            b(&flags.o),
            b(&flags.a),
            b(&flags.e),
            b(&flags.f),
            b(&flags.r),
            diag.parts.len().to_string(),
            p1t_len(&w.dir, &tag)?,
            c1.to_string(),
            viol.len().to_string(),
            diag.volume_min.to_string(),
            diag.volume_max.to_string(),
            diag.max_diameter.map_or("NA".into(), |d| d.to_string()),
            fmt_f64(diag.min_degree_ratio),
        ]);
    }
    w.table("partition_summary.csv", t)?;
    Ok((total, notes))
}

fn p1t_len(dir: &Path, tag: &str) -> Result<String> {
    let text = std::fs::read_to_string(dir.join(format!("partitions/{tag}_n1_parts.csv")))?;
    Ok(Table::parse(&text)?.rows.len().to_string())
}

fn gap_experiment(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(usize, Vec<String>)> {
    let params = cfg.model()?;
    let tol = cfg.estimator.gap_tol;
    let res = par_jobs(cfg, |j| {
        let lat = lattice_for(cfg, &params, j.n)?;
        let g = sample_graph(&lat, &params, j.seed)?;
        let (sub, _) = giant(&g.graph);
        if sub.num_vertices() < 2 {
            return Ok((sub.num_vertices(), f64::NAN, f64::NAN, 0));
        }
        let chain = ReversibleChain::new(sub)?;
        let est = spectral_gap_iterative(&chain, tol)?;
        Ok((chain.len(), est.gap, est.error_bound, est.iterations))
    })?;
    let mut t = Table::new(&["N", "replica", "seed", "c1", "gap", "error_bound", "iterations"]);
    t.meta("reference_slope", fmt_f64(params.d as f64 - params.s));
    for (j, (c1, gap, err, it)) in &res {
        t.push(vec![
            j.n.to_string(),
            j.replica.to_string(),
            j.seed.to_string(),
            c1.to_string(),
            fmt_f64(*gap),
            fmt_f64(*err),
            it.to_string(),
        ]);
    }
    let csv = w.table("gap_scaling.csv", t)?;
    let mut f = Table::new(&FIT_HEADER);
    let rows: Vec<(u64, f64)> = res.iter().map(|(j, r)| (j.n, r.1)).collect();
    fit_rows(&mut f, "gap_median", &medians_by_n(&rows), &[false, true]);
    w.table("gap_scaling_fit.csv", f)?;
    w.plot("gap_scaling.svg", &csv, PlotKind::GapScaling)?;
    Ok((0, Vec::new()))
}

fn diameter_experiment(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(usize, Vec<String>)> {
    let params = cfg.model()?;
    let e = &cfg.estimator;
    let res = par_jobs(cfg, |j| {
        let lat = lattice_for(cfg, &params, j.n)?;
        let g = sample_graph(&lat, &params, j.seed)?;
        let (sub, _) = giant(&g.graph);
        if j.n <= e.exact_diameter_max_n && sub.num_vertices() <= EXACT_DIAMETER_CAP {
            let d = component_diameter_capped(&sub, DiameterMode::Exact, EXACT_DIAMETER_CAP)?.value;
            Ok((sub.num_vertices(), d, d, true))
        } else {
            let lo = two_sweep_lower(&sub, e.sweep_rounds);
            let hi = eccentricity_upper(&sub, e.eccentricity_samples, derive_seed(j.seed, &[0xD1A]));
            Ok((sub.num_vertices(), lo, hi, false))
        }
    })?;
    let mut t = Table::new(&["N", "replica", "seed", "c1", "diameter", "diameter_upper", "exact"]);
    for (j, (c1, lo, hi, exact)) in &res {
        t.push(vec![
            j.n.to_string(),
            j.replica.to_string(),
            j.seed.to_string(),
            c1.to_string(),
            lo.to_string(),
            hi.to_string(),
            exact.to_string(),
        ]);
    }
    let csv = w.table("diameter_scaling.csv", t)?;
    let mut f = Table::new(&FIT_HEADER);
    let rows: Vec<(u64, f64)> = res.iter().map(|(j, r)| (j.n, r.1 as f64)).collect();
    fit_rows(&mut f, "diameter_median", &medians_by_n(&rows), &[false, true]);
    w.table("diameter_scaling_fit.csv", f)?;
    w.plot("diameter_scaling.svg", &csv, PlotKind::DiameterScaling)?;
    Ok((0, Vec::new()))
}

/// `k` distinct members of `pool` drawn from a keyed stream, ascending.
pub fn pick_vertices(pool: &[u32], k: usize, seed: u64, key: u64) -> Vec<u32> {
    let mut rng = stream(seed, &[key]);
    let mut idx = rand::seq::index::sample(&mut rng, pool.len(), k.min(pool.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

fn heatkernel_experiment(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(usize, Vec<String>)> {
    let params = cfg.model()?;
    let e = &cfg.estimator;
    let res = par_jobs(cfg, |j| {
        let lat = lattice_for(cfg, &params, j.n)?;
        let g = sample_graph(&lat, &params, j.seed)?;
        let members = connected_components(&g.graph).largest_members();
        let degree_sum: usize = members.iter().map(|&v| g.graph.degree(v)).sum();
        let starts = pick_vertices(&members, e.starts, j.seed, 0x5354);
        let mut out = Vec::new();
        for (k, &x) in starts.iter().enumerate() {
            let series = match e.psi_method {
                PsiChoice::Exact => psi_series_exact(&g.graph, x, &e.times, e.mode)?,
                PsiChoice::Mc => mc_series(&g.graph, x, &e.times, e.mode, e.mc_reps, derive_seed(j.seed, &[k as u64]))?,
            };
            let keep = pre_plateau_indices(&series, degree_sum, lat.side());
            let pts: Vec<(f64, f64)> = keep
                .iter()
                .map(|&i| (series.times[i], series.values[i]))
                .filter(|p| !e.log_correction || p.0 > 1.0)
                .collect();
            let fit = fit_power_law(&pts, e.log_correction);
            out.push((series, keep, fit));
        }
        Ok(out)
    })?;
    let mut t = Table::new(&["N", "replica", "start", "t", "psi", "stderr", "pre_plateau"]);
    let d = params.d as f64;
    t.meta("reference_slope", fmt_f64(-d / (params.s - d)));
    let mut f = Table::new(&["N", "replica", "start", "a", "b", "se_a", "points", "status"]);
    for (j, runs) in &res {
        for (series, keep, fit) in runs {
            for i in 0..series.times.len() {
                t.push(vec![
                    j.n.to_string(),
                    j.replica.to_string(),
                    series.start.to_string(),
                    fmt_f64(series.times[i]),
                    fmt_f64(series.values[i]),
                    series.stderr.as_ref().map_or("NA".into(), |s| fmt_f64(s[i])),
                    keep.contains(&i).to_string(),
                ]);
            }
            let (a, b, se, status) = match fit {
                Ok(r) => (fmt_f64(r.a), r.b.map_or("NA".into(), fmt_f64), fmt_f64(r.se_a), "ok".to_string()),
                Err(err) => ("NA".into(), "NA".into(), "NA".into(), format!("{err}").replace(',', ";")),
            };
            f.push(vec![
                j.n.to_string(),
                j.replica.to_string(),
                series.start.to_string(),
                a,
                b,
                se,
                keep.len().to_string(),
                status,
            ]);
        }
    }
    let csv = w.table("heatkernel.csv", t)?;
    w.table("heatkernel_fits.csv", f)?;
    w.plot("heatkernel.svg", &csv, PlotKind::Heatkernel)?;
    Ok((0, Vec::new()))
}

fn mc_series(graph: &Graph, x: u32, times: &[f64], mode: Mode, reps: usize, seed: u64) -> Result<PsiSeries> {
    let mut values = Vec::new();
    let mut errs = Vec::new();
    let mut last = None;
    for (i, &t) in times.iter().enumerate() {
        let s = psi_mc_collision(graph, x, t, mode, reps, derive_seed(seed, &[i as u64]))?;
        values.push(s.values[0]);
        errs.push(s.stderr.as_ref().unwrap()[0]);
        last = Some(s);
    }
    let mut s = last.ok_or_else(|| LrpError::invalid("empty time grid"))?;
    s.times = times.to_vec();
    s.values = values;
    s.stderr = Some(errs);
    Ok(s)
}

/// Outcome of one bound-pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRun {
    pub flags: String,
    pub c3_floor: f64,
    pub start: u32,
    pub params: Option<BoundParams>,
    pub series: PsiSeries,
    pub assumptions_pass: Vec<bool>,
    pub all_assumptions_pass: bool,
    pub inequality: Option<crate::hkbound::InequalityReport>,
    pub curve: Option<crate::hkbound::BoundCurve>,
    pub curve_violations: usize,
    pub status: String,
}

/// Staged partition, measured constants, assumption report, inequality
/// check and bound curve on one box configuration. Constants `c₁..C₄`
/// are set from the measured partition; the window `[T₁, T₂]` is the
/// stretch where the calibration assumption holds.
pub fn bound_pipeline(
    lat: &Lattice,
    params: &LrpParams,
    ladder: &ScaleLadder,
    thresholds: &EventThresholds,
    bc: &BoundConfig,
    seed: u64,
) -> Result<BoundRun> {
    let run = run_renorm(lat, params, ladder, thresholds, seed)?;
    let flags = run.flags();
    let g = &run.graph().graph;
    let part = run.partition_n2();
    let steps = (bc.t_max / bc.t_step).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * bc.t_step).collect();
    let members = part.covered();
    let inner = ((1.0 - bc.inner_fraction) * lat.n as f64).floor() as i64;
    let pool: Vec<u32> = members
        .iter()
        .copied()
        .filter(|&v| lat.coords(v).iter().all(|c| c.abs() <= inner))
        .collect();
    let empty = |status: &str, start: u32, series: PsiSeries| BoundRun {
        flags: flags.compact(),
        c3_floor: f64::NAN,
        start,
        params: None,
        series,
        assumptions_pass: Vec::new(),
        all_assumptions_pass: false,
        inequality: None,
        curve: None,
        curve_violations: 0,
        status: status.into(),
    };
    let Some(&x) = pick_vertices(&pool, 1, seed, 0x4252).first() else {
        return Ok(empty("no start vertex in B_R", 0, PsiSeries {
            start: 0,
            start_degree: 0,
            mode: Mode::Continuous,
            times,
            values: Vec::new(),
            method: crate::walk::PsiMethod::ExactPropagation,
            stderr: None,
        }));
    };
    let series = psi_series_exact(g, x, &times, Mode::Continuous)?;
    if !flags.core_events() {
        return Ok(empty("stage events failed", x, series));
    }
    let parts: Vec<Vec<u32>> = part.parts.iter().map(|p| p.vertices.clone()).collect();
    let m = measure_partition(g, &parts)?;
    let mut inside = vec![false; g.num_vertices()];
    for &v in &members {
        inside[v as usize] = true;
    }
    let escape = escape_probabilities(g, &inside, &[x], &times, Mode::Continuous)?;
    let vols: Vec<f64> = parts.iter().map(|p| p.len() as f64).collect();
    let v = median(&vols);
    let lv = v.ln();
    let d = params.d as f64;
    let gamma = bc.gamma.unwrap_or((params.s - d) / d);
    let lambda = m.min_gap;
    let dr = m.degree_ratio;
    // smallest C₃ for which the inequality follows from the measured gaps
    let c3_floor = v / (dr * m.z_min as f64 * lv) - 1.0;
    let big_c3 = bc.big_c3;
    let cal: Vec<f64> = series.values.iter().map(|p| p * v / lv).collect();
    let first = times.iter().position(|&t| t >= bc.t_min);
    let window = first.and_then(|i0| {
        if cal[i0] < 2.0 + big_c3 {
            return None;
        }
        let mut i1 = i0;
        while i1 + 1 < times.len() && cal[i1 + 1] >= 2.0 + big_c3 {
            i1 += 1;
        }
        (i1 > i0 + 1).then_some((i0, i1))
    });
    if !(dr > 0.0 && lambda > 0.0 && lambda.is_finite()) {
        let mut r = empty("degenerate partition (zero degree ratio or gap)", x, series);
        r.c3_floor = c3_floor;
        return Ok(r);
    }
    let Some((i0, i1)) = window else {
        return Ok(empty("calibration window empty", x, series));
    };
    let mut bp = BoundParams {
        gamma,
        delta1: bc.delta1,
        delta2: bc.delta2,
        c1: m.vol_min as f64 / v,
        big_c1: m.vol_max as f64 / v,
        c2: lambda * v.powf(gamma) * lv.powf(bc.delta1),
        c3: dr * lv.powf(bc.delta2),
        big_c3,
        big_c4: cal[i0..=i1].iter().copied().fold(0.0, f64::max),
        big_c5: 1.0,
        big_c6: 1.0,
        t1: times[i0],
        t2: times[i1],
        scales: TimeScales::constant(&times, lambda, v),
    };
    let report = check_assumptions(&[m.clone()], &escape, &series, &bp)?;
    let mask = report.pass_mask();
    let all_pass = report.all_pass();
    let source = ExactWalk { graph: g, start: x };
    let ineq = verify_differential_inequality(&series, &source, &bp, &[dr], Some(&mask))?;
    let consts = fit_bound_constants(&series, &bp);
    let (curve, nviol, status) = match consts {
        Ok(c) => {
            bp.big_c5 = c.big_c5;
            bp.big_c6 = c.big_c6;
            let curve = bound_curve(&bp, c.psi_t1, &times)?;
            let nv = curve_violations(&series, &curve).len();
            (Some(curve), nv, "ok".to_string())
        }
        Err(e) => (None, 0, format!("bound constants: {e}")),
    };
    Ok(BoundRun {
        flags: flags.compact(),
        c3_floor,
        start: x,
        params: Some(bp),
        series,
        assumptions_pass: mask,
        all_assumptions_pass: all_pass,
        inequality: Some(ineq),
        curve,
        curve_violations: nviol,
        status,
    })
}

fn verify_bound_experiment(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(usize, Vec<String>)> {
    require_box(cfg)?;
    let params = cfg.model()?;
    let mut ladders = Vec::new();
    let mut notes = Vec::new();
    for &n in &cfg.n {
        let (l, mut nn) = resolve_ladder(cfg, &params, n)?;
        notes.append(&mut nn);
        ladders.push((n, l));
    }
    let e = &cfg.estimator;
    let res = par_jobs(cfg, |j| {
        let ladder = &ladders.iter().find(|(n, _)| *n == j.n).unwrap().1;
        let lat = Lattice::new(params.d, j.n, Geometry::Box)?;
        bound_pipeline(&lat, &params, ladder, &e.thresholds, &e.bound, j.seed)
    })?;
    let mut t = Table::new(&["N", "replica", "t", "psi", "assumptions_ok", "ineq_lhs", "ineq_rhs", "ineq_ok", "bound"]);
    let mut s = Table::new(&[
        "N", "replica", "seed", "flags", "start", "lambda", "volume", "gamma", "C3", "C3_floor", "C4", "C5",
        "C6", "T1", "T2", "assumptions_all_pass", "checked", "passed", "pass_fraction",
        "curve_violations", "status",
    ]);
    for (j, r) in &res {
        for (i, &tt) in r.series.times.iter().enumerate() {
            let ip = r.inequality.as_ref().and_then(|q| q.points.iter().find(|p| p.time == tt));
            let bound = r.curve.as_ref().and_then(|c| {
                c.times.iter().position(|&x| x == tt).map(|k| c.psi_bar[k])
            });
            t.push(vec![
                j.n.to_string(),
                j.replica.to_string(),
                fmt_f64(tt),
                r.series.values.get(i).map_or("NA".into(), |v| fmt_f64(*v)),
                r.assumptions_pass.get(i).map_or("NA".into(), |b| b.to_string()),
                ip.map_or("NA".into(), |p| fmt_f64(p.lhs)),
                ip.map_or("NA".into(), |p| fmt_f64(p.rhs)),
                ip.map_or("NA".into(), |p| p.ok.to_string()),
                bound.map_or("NA".into(), fmt_f64),
            ]);
        }
        let p = r.params.as_ref();
        let q = r.inequality.as_ref();
        let pf = |f: fn(&BoundParams) -> f64| p.map_or("NA".into(), |p| fmt_f64(f(p)));
        s.push(vec![
            j.n.to_string(),
            j.replica.to_string(),
            j.seed.to_string(),
            r.flags.clone(),
            r.start.to_string(),
            pf(|p| p.scales.lambda[0]),
            pf(|p| p.scales.volume[0]),
            pf(|p| p.gamma),
            pf(|p| p.big_c3),
            fmt_f64(r.c3_floor),
            pf(|p| p.big_c4),
            pf(|p| p.big_c5),
            pf(|p| p.big_c6),
            pf(|p| p.t1),
            pf(|p| p.t2),
            r.all_assumptions_pass.to_string(),
            q.map_or("0".into(), |q| q.checked.to_string()),
            q.map_or("0".into(), |q| q.passed.to_string()),
            q.map_or("NA".into(), |q| fmt_f64(q.pass_fraction)),
            r.curve_violations.to_string(),
            r.status.replace(',', ";"),
        ]);
    }
    w.table("verify_bound.csv", t)?;
    w.table("verify_bound_summary.csv", s)?;
    Ok((0, notes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"n": [8], "bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"estimator": {"gap_tolerance": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"params": {"d": 1, "s": 1.5, "beta": 1, "L": 2}}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"n": [8, 16], "seed": 3}"#).unwrap();
        assert_eq!(c.n, vec![8, 16]);
        assert_eq!(c.params, default_params());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"n": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"replicas": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"params": {"d": 1, "s": 0.5, "beta": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"estimator": {"times": [2, 1]}}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let mut a = ExperimentConfig::default();
        let h = a.hash();
        a.out = Some("elsewhere".into());
        assert_eq!(a.hash(), h);
        a.seed = 99;
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn toy_ladder_defaults() {
        let cfg = ExperimentConfig::default();
        let p = default_params();
        let (l, notes) = resolve_ladder(&cfg, &p, 4096).unwrap();
        assert_eq!((l.n1, l.n2, l.n3, l.n4), (2048, 512, 128, 64));
        assert!(notes.is_empty());
        assert!(l.rho > 0.0 && l.rho < 1.0);
        let mut f = cfg.clone();
        f.ladder.mode = LadderMode::Formula;
        f.ladder.rho = Some(0.2);
        let (l, notes) = resolve_ladder(&f, &p, 4096).unwrap();
        assert_eq!(l.mode, LadderMode::ToyOverride);
        assert_eq!(notes.len(), 1);
        f.ladder.toy_fallback = false;
        assert!(matches!(resolve_ladder(&f, &p, 4096), Err(LrpError::Infeasible(_))));
    }

    #[test]
    fn picks_are_deterministic_subsets() {
        let pool: Vec<u32> = (100..200).collect();
        let a = pick_vertices(&pool, 10, 5, 1);
        assert_eq!(a, pick_vertices(&pool, 10, 5, 1));
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(pick_vertices(&pool, 500, 5, 1).len(), 100);
    }
}
