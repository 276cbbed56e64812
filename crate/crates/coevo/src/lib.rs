//! Co-evolution of hard routing instances and the heuristics that solve them.
//!
//! The library pits two closed, serializable program spaces against each
//! other: *generator programs* that synthesize TSP / orienteering instances
//! on the unit square, and *heuristic programs* (matrix expressions over the
//! distance matrix) that plug into a guided-local-search or ant-colony
//! solver. An evolutionary loop alternates between making instances harder
//! for the current champion heuristic and making heuristics stronger on the
//! current hardest instances, measuring everything as a relative optimality
//! gap against a fixed reference policy.
//!
//! Modules:
//! - [`instance`] / [`solution`]: problem data, tours, routes, costs.
//! - [`gen_dsl`]: the instance-generator AST, sampling, and mutation.
//! - [`heur_dsl`]: the heuristic-matrix AST, interpreter, and mutation.
//! - [`solvers`]: guided local search, ant-colony solvers, exact DP.
//! - [`eval`]: gap computation, reference costs, hardness reports.
//! - [`evolve`]: the alternating evolutionary engine and its run store.
//! - [`llm`]: prompt rendering and an optional LLM program synthesizer.
//! - [`tsplib`] / [`report`] / [`cli`]: file formats and the command line.

pub mod cli;
pub mod error;
pub mod eval;
pub mod evolve;
pub mod gen_dsl;
pub mod heur_dsl;
pub mod instance;
pub mod llm;
pub mod report;
pub mod rng;
pub mod solution;
pub mod solvers;
pub mod tsplib;

pub use error::Error;
pub use instance::{distance_matrix, Instance, InstanceKind, SquareMatrix};
pub use solution::{tour_cost, OpRoute, Tour};
