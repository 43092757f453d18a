//! Spectral sparsification of graphs and of sums of PSD matrices.
//!
//! Given PSD factors `M_1, …, M_m` with `Σ M_i = I`, the library finds a sparse nonnegative
//! `c` with `(1 − O(ε))·I ⪯ Σ c_i M_i ⪯ (1 + O(ε))·I`. Graphs enter through [`graph::isotropize`],
//! which whitens the edge Laplacians on the complement of the all-ones vector.
//!
//! The main loop lives in [`sparsify`]; it drives one-sided oracles from [`oracle`], guided by
//! the barrier potentials in [`potential`]. [`sdp`] holds the packing-SDP solver used by the
//! SDP-filtering oracle and the Taylor machinery for the barrier kernels. [`verify`] provides
//! independent checks on graph outputs.

// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factors;
pub mod graph;
pub mod linalg;
pub mod oracle;
pub mod potential;
pub mod sdp;
pub mod sparsify;
pub mod verify;

pub use error::{Error, Result};
pub use factors::{Factor, FactorSet};
pub use graph::{export_sparsifier, isotropize, load_graph, parse_edge_list, Edge, WeightedGraph};
pub use potential::{BarrierSpectrum, BarrierState};
pub use sparsify::{
    certify, sparsify, Certificate, GradientMode, OracleKind, RunTrace, SparsifierResult,
    SparsifyConfig, SparsifyOutcome,
};
pub use verify::{check_cuts, check_quadratic_form, QualityReport};
