//! Solvers for convection-dominated transport on thin graph-like networks.
//!
//! A network of thin channels meeting at small junction nodes carries a
//! transported concentration with a high Péclet number. In the thin limit the
//! bulk dynamics collapse onto the 1D skeleton graph: first-order hyperbolic
//! equations on the edges, coupled through Kirchhoff flux balances at the
//! vertices, corrected by unit-scale junction fields and by exponential
//! boundary layers at outflow ends. This crate builds all of those pieces and
//! composes them into a single region-dispatched evaluator, plus a direct
//! finite-volume reference solver on the 2D thin geometry so the composite
//! approximation can be checked against a resolved simulation.
//!
//! Module map:
//!
//! * [`network`] — data model, validation and the JSON spec-file schema
//! * [`characteristics`] — per-edge method-of-characteristics and upwind
//!   finite-volume solvers
//! * [`graph_limit`] — vertex coupling: the hyperbolic limit, the first
//!   corrector level and the weak-interaction cascade
//! * [`cell`] — cross-section Neumann problems (transverse correctors)
//! * [`junction`] — unit-scale elliptic solves at the nodes
//! * [`boundary_layer`] — closed-form outlet layers
//! * [`assemble`] — the composite approximation
//! * [`reference`] — direct solver, error norms and the convergence study

pub mod assemble;
pub mod boundary_layer;
pub mod cell;
pub mod characteristics;
pub mod cutoff;
pub mod error;
pub mod expr;
pub mod graph_limit;
pub mod grid;
pub mod io;
pub mod junction;
pub mod network;
pub mod reference;
pub mod sparse;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
