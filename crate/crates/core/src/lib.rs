//! Exact and approximate MAP inference for discrete Bayesian networks.
//!
//! The exact solver propagates pareto sets of candidate messages over a
//! binary tree decomposition; the approximate solver thins those sets on a
//! multiplicative or additive lattice and reports a guarantee. Gadget
//! generators build instances with analytically known answers, and the
//! brute-force [`oracle`] is the reference for everything else.

pub mod bench;
pub mod bu;
pub mod deadline;
pub mod error;
pub mod fptas;
pub mod gadgets;
mod index;
pub mod io;
pub mod map_exact;
pub mod network;
pub mod numeric;
pub mod oracle;
pub mod treedecomp;

pub use deadline::Deadline;
pub use error::{Error, Result};
pub use fptas::{solve_map_approx, Guarantee, Lattice, LatticeMode};
pub use map_exact::{solve_map, solve_map_with, MapSolution, SolveOptions, SolveStats};
pub use network::{
    joint_probability, network_size, validate_network, Instantiation, Network, NetworkBuilder, Params, Query,
    ValidationReport, VarId, Variable,
};
pub use numeric::{Backend, Prob, ProbValue};
pub use treedecomp::{annotate, decompose, AnnotatedDecomposition, Decomposition, Heuristic, RootChoice};
