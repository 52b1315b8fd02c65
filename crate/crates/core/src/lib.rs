//! Random k-SAT experimentation laboratory.
//!
//! Instance ensembles, decorated factor graphs, local / local-memory /
//! sequential-local execution engines, the Fix phase-1 heuristic, R-local
//! and degree-D polynomial simulations, overlap-profile entropy and
//! energy functionals, interpolation paths with forbidden-structure
//! scanning, and the associated numeric constants — with exact
//! small-instance oracles and Monte Carlo estimators throughout.

pub mod assignment;
pub mod cbad;
pub mod energy;
pub mod engine;
pub mod error;
pub mod fix1;
pub mod formula;
pub mod graph;
pub mod gw;
pub mod interp;
pub mod nbhd;
pub mod overlap;
pub mod polysim;
pub mod rng;
pub mod rules;
pub mod walk;

pub use assignment::{hamming_delta, round_output, strict_round, Assignment, Value};
pub use error::{Error, Result};
pub use formula::{
    decode_one_hot, encode_one_hot, eta_nu_satisfies, nu_satisfies, sample_formula, Formula,
    Literal,
};
pub use graph::{build_factor_graph, DecoratedFactorGraph};
pub use nbhd::{is_r_locally_small, neighborhood, RootedNeighborhood};
