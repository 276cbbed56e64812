//! One error enum for the whole library.

use thiserror::Error;

/// Errors surfaced by instance construction, DSL validation, solving,
/// evaluation, evolution runs, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An instance violated a structural invariant (coordinate range,
    /// prize vector shape, budget sign, ...).
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A tour or route is not a valid solution for its instance.
    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    /// A generator program failed validation. The path pinpoints the
    /// offending node, e.g. `root.children[1]`.
    #[error("invalid generator program at {path}: {reason}")]
    InvalidGenerator { path: String, reason: String },

    /// A heuristic program failed validation.
    #[error("invalid heuristic program at {path}: {reason}")]
    InvalidHeuristic { path: String, reason: String },

    /// Solver preconditions not met (wrong instance kind, wrong heuristic
    /// target, instance too large for the exact solver, ...).
    #[error("solver: {0}")]
    Solver(String),

    /// Evaluation inputs were unusable (empty batch, mismatched lengths,
    /// non-finite or non-positive reference costs).
    #[error("evaluation: {0}")]
    Evaluation(String),

    /// Two evaluation reports were not comparable (different task, size,
    /// or evaluation seeds).
    #[error("reports not comparable: {0}")]
    Comparison(String),

    /// Evolution engine state or configuration problem.
    #[error("evolution: {0}")]
    Evolution(String),

    /// The LLM connector gave up after its retry budget.
    #[error("synthesis failed after {attempts} attempts: {last_error}")]
    SynthesisExhausted { attempts: u32, last_error: String },

    /// Transport-level failure talking to the LLM endpoint.
    #[error("llm transport: {0}")]
    Transport(String),

    /// A prompt cannot be rendered within its token budget.
    #[error("prompt: {0}")]
    Prompt(String),

    /// A report table is malformed (ragged rows, formatting spec of the
    /// wrong width).
    #[error("table: {0}")]
    Table(String),

    /// A structured text format (TSPLIB, CSV table, sidecar file) failed to
    /// parse. `line` is 1-based.
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Shorthand used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
