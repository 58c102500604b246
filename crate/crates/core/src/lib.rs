//! Simulation laboratory for supercritical long-range percolation on `Z^d`.
//!
//! The crate samples configurations on boxes and tori, analyses clusters,
//! builds the staged block-renormalization partition of the giant cluster,
//! computes spectral gaps and multicommodity-flow bounds, propagates heat
//! kernels exactly, and checks an abstract heat-kernel decay bound against
//! measured data. The [`harness`] module wires those pieces into
//! reproducible experiments driven by the `lrp` binary.

pub mod cluster;
pub mod error;
pub mod fit;
pub mod graph;
pub mod harness;
pub mod hkbound;
pub mod lattice;
pub mod params;
pub mod renorm;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod walk;

pub use error::{LrpError, Result};
pub use graph::{build_graph, Graph, LatticeGraph, Provenance};
pub use lattice::Lattice;
pub use params::{connection_probability, Geometry, LrpParams};
