//! C ABI over `lrp-core`.
//!
//! Every function returns an [`LrpStatus`]; on failure the message is kept
//! per thread and read back with [`lrp_last_error_message`]. Objects are
//! opaque handles released with their `_free` function. No function
//! unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lrp_core::cluster::connected_components;
use lrp_core::harness::io::{read_edge_list, write_edge_list};
use lrp_core::harness::{giant, run_experiment, sample_graph, ExperimentConfig, ExperimentKind, RunOptions};
use lrp_core::spectral::{spectral_gap_iterative, ReversibleChain};
use lrp_core::walk::{psi_series_exact, Mode};
use lrp_core::{build_graph, Geometry, Lattice, LatticeGraph, LrpError, LrpParams, Provenance};

/// Result codes. The nonzero core codes match the `lrp` exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrpStatus {
    Ok = 0,
    Error = 1,
    InvariantViolation = 2,
    Infeasible = 3,
    Io = 4,
    NullArgument = 5,
    InvalidArgument = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Walk clock for heat-kernel queries.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrpMode {
    Discrete = 0,
    Lazy = 1,
    Continuous = 2,
}

/// A sampled or loaded graph on a box or torus region.
pub struct LrpGraph {
    inner: LatticeGraph,
    seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &LrpError) -> LrpStatus {
    match e {
        LrpError::InvariantViolation(_) => LrpStatus::InvariantViolation,
        LrpError::Infeasible(_) => LrpStatus::Infeasible,
        LrpError::Io(_) => LrpStatus::Io,
        LrpError::InvalidInput(_) | LrpError::Config(_) | LrpError::Schema(_) => LrpStatus::InvalidArgument,
        _ => LrpStatus::Error,
    }
}

enum Fail {
    Core(LrpError),
    Status(LrpStatus, String),
}

impl From<LrpError> for Fail {
    fn from(e: LrpError) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LrpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LrpStatus::Ok
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            LrpStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(LrpStatus::NullArgument, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail::Status(LrpStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn graph_arg<'a>(g: *const LrpGraph) -> Result<&'a LrpGraph, Fail> {
    g.as_ref().ok_or_else(|| null("graph"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lrp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// without the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lrp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Samples a configuration with `p = 1 - exp(-beta |x-y|^{-s})` on the box
/// (`torus == 0`) or torus of side `2n+1` in dimension `d`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`lrp_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn lrp_graph_sample(
    d: u32,
    n: u64,
    s: f64,
    beta: f64,
    torus: i32,
    seed: u64,
    out: *mut *mut LrpGraph,
) -> LrpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let geometry = if torus != 0 { Geometry::Torus } else { Geometry::Box };
        let params = LrpParams::new(d as usize, s, beta)?.with_geometry(geometry);
        let lattice = Lattice::new(d as usize, n, geometry)?;
        let inner = sample_graph(&lattice, &params, seed)?;
        *out = Box::into_raw(Box::new(LrpGraph { inner, seed }));
        Ok(())
    })
}

/// Loads an `lrp v1` edge-list file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrp_graph_read(path: *const c_char, out: *mut *mut LrpGraph) -> LrpStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = read_edge_list(&PathBuf::from(path))?;
        let inner = build_graph(
            f.lattice.clone(),
            &f.edges,
            None,
            Provenance {
                params: None,
                seed: Some(f.seed),
                stages: vec!["file".into()],
            },
        )?;
        *out = Box::into_raw(Box::new(LrpGraph { inner, seed: f.seed }));
        Ok(())
    })
}

/// Writes the graph as an `lrp v1` edge-list file.
///
/// # Safety
/// `g` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lrp_graph_write(g: *const LrpGraph, path: *const c_char) -> LrpStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let path = str_arg(path, "path")?;
        let edges: Vec<(u32, u32)> = g.inner.graph.edges().collect();
        write_edge_list(&PathBuf::from(path), &g.inner.lattice, g.seed, &edges)?;
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lrp_graph_free(g: *mut LrpGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrp_graph_num_vertices(g: *const LrpGraph, out: *mut u64) -> LrpStatus {
    guard(|| {
        let g = graph_arg(g)?;
        *out.as_mut().ok_or_else(|| null("out"))? = g.inner.graph.num_vertices() as u64;
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrp_graph_num_edges(g: *const LrpGraph, out: *mut u64) -> LrpStatus {
    guard(|| {
        let g = graph_arg(g)?;
        *out.as_mut().ok_or_else(|| null("out"))? = g.inner.graph.num_edges() as u64;
        Ok(())
    })
}

/// Copies edges as `u0, v0, u1, v1, ...` with `u < v`. `*len` holds the
/// buffer capacity in `u32` slots on entry and the required count on
/// return; a short buffer gives `BufferTooSmall` and copies nothing.
///
/// # Safety
/// `buf` must point to `*len` writable slots (or be null with `*len == 0`).
#[no_mangle]
pub unsafe extern "C" fn lrp_graph_edges(g: *const LrpGraph, buf: *mut u32, len: *mut usize) -> LrpStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let need = 2 * g.inner.graph.num_edges();
        let cap = *len;
        *len = need;
        if cap < need {
            return Err(Fail::Status(LrpStatus::BufferTooSmall, format!("need {need} slots, got {cap}")));
        }
        if need > 0 && buf.is_null() {
            return Err(null("buf"));
        }
        for (i, (u, v)) in g.inner.graph.edges().enumerate() {
            *buf.add(2 * i) = u.min(v);
            *buf.add(2 * i + 1) = u.max(v);
        }
        Ok(())
    })
}

/// Sizes of the largest and second-largest clusters.
///
/// # Safety
/// `g` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lrp_cluster_sizes(g: *const LrpGraph, c1: *mut u64, c2: *mut u64) -> LrpStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let lab = connected_components(&g.inner.graph);
        *c1.as_mut().ok_or_else(|| null("c1"))? = lab.sizes.first().copied().unwrap_or(0) as u64;
        *c2.as_mut().ok_or_else(|| null("c2"))? = lab.sizes.get(1).copied().unwrap_or(0) as u64;
        Ok(())
    })
}

/// Spectral gap `1 - λ₂` of the simple random walk on the largest cluster.
///
/// # Safety
/// `g` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lrp_spectral_gap(g: *const LrpGraph, tol: f64, gap: *mut f64, error_bound: *mut f64) -> LrpStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let gap = gap.as_mut().ok_or_else(|| null("gap"))?;
        let err = error_bound.as_mut().ok_or_else(|| null("error_bound"))?;
        let chain = ReversibleChain::new(giant(&g.inner.graph).0)?;
        let est = spectral_gap_iterative(&chain, tol)?;
        *gap = est.gap;
        *err = est.error_bound;
        Ok(())
    })
}

/// `ψ_t = P_{2t}(x,x)/deg(x)` at each of `count` times, written to `out`.
///
/// # Safety
/// `times` and `out` must each point to `count` elements.
#[no_mangle]
pub unsafe extern "C" fn lrp_heat_kernel_psi(
    g: *const LrpGraph,
    x: u32,
    mode: LrpMode,
    times: *const f64,
    count: usize,
    out: *mut f64,
) -> LrpStatus {
    guard(|| {
        let g = graph_arg(g)?;
        if count > 0 && (times.is_null() || out.is_null()) {
            return Err(null("times/out"));
        }
        let ts = if count == 0 { &[][..] } else { std::slice::from_raw_parts(times, count) };
        let mode = match mode {
            LrpMode::Discrete => Mode::Discrete,
            LrpMode::Lazy => Mode::Lazy,
            LrpMode::Continuous => Mode::Continuous,
        };
        let s = psi_series_exact(&g.inner.graph, x, ts, mode)?;
        for (i, v) in s.values.iter().enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// Runs one experiment kind (`"sample"`, `"cluster-stats"`, `"partition"`,
/// `"gap-scaling"`, `"diameter-scaling"`, `"heatkernel"`, `"verify-bound"`)
/// from a JSON configuration, writing results to `out_dir`. `config_json`
/// may be null for defaults.
///
/// # Safety
/// String arguments must be NUL-terminated or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn lrp_run_experiment(
    kind: *const c_char,
    config_json: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    use_seed: i32,
) -> LrpStatus {
    guard(|| {
        let kind = str_arg(kind, "kind")?;
        let kind: ExperimentKind = serde_json::from_value(serde_json::Value::String(kind.into()))
            .map_err(|_| invalid(format!("unknown experiment kind {kind:?}")))?;
        let config = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_json(str_arg(config_json, "config_json")?)?
        };
        let options = RunOptions {
            seed: (use_seed != 0).then_some(seed),
            out: Some(PathBuf::from(str_arg(out_dir, "out_dir")?)),
            ..RunOptions::default()
        };
        run_experiment(&config, kind, &options)?;
        Ok(())
    })
}
