//! The heuristic DSL: matrix expressions over instance data.
//!
//! A heuristic program is an expression tree that evaluates to an `n x n`
//! matrix for a given instance. The `target` field says which solver slot
//! the matrix feeds: the GLS edge-penalty guide or the ACO visibility
//! matrix (eta) for TSP or OP. Interpretation is pure and total: non-finite
//! values are scrubbed and ACO outputs are floored to strictly positive, so
//! an evolved expression can never crash or poison a solver.
//!
//! JSON form is an internally tagged union on `"op"`, wrapped in an object
//! with the `target`, e.g.
//! `{"target":"aco_eta_tsp","root":{"op":"safe_div","lhs":{"op":"const","value":1.0},"rhs":{"op":"dist"}}}`.

mod interpret;
mod mutate;

pub use interpret::interpret;
pub use mutate::{mutate_heuristic, mutate_heuristic_traced, HeurEditClass, MutationWeights};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum expression depth (a lone leaf has depth 1).
pub const MAX_DEPTH: usize = 10;
/// Maximum number of expression nodes.
pub const MAX_NODES: usize = 96;

/// Which solver consumes the interpreted matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Edge badness for guided local search (TSP).
    GlsGuide,
    /// ACO visibility for TSP.
    AcoEtaTsp,
    /// ACO visibility for the orienteering problem.
    AcoEtaOp,
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Target::GlsGuide => "gls_guide",
            Target::AcoEtaTsp => "aco_eta_tsp",
            Target::AcoEtaOp => "aco_eta_op",
        };
        write!(f, "{s}")
    }
}

/// One node of the matrix-expression AST.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixExpr {
    /// The instance's Euclidean distance matrix.
    Dist,
    /// `P[i][j] = prizes[j]` (orienteering targets only).
    PrizeOuter,
    /// Constant-filled matrix.
    Const { value: f64 },
    /// Broadcast row statistic: every entry of row `i` becomes the mean of
    /// the argument's row `i`.
    RowMean { arg: Box<MatrixExpr> },
    RowMin { arg: Box<MatrixExpr> },
    RowMax { arg: Box<MatrixExpr> },
    /// Per-row rank of each entry, `0..n-1`, ties broken by column index.
    RankRow { arg: Box<MatrixExpr> },
    Add { lhs: Box<MatrixExpr>, rhs: Box<MatrixExpr> },
    Sub { lhs: Box<MatrixExpr>, rhs: Box<MatrixExpr> },
    Mul { lhs: Box<MatrixExpr>, rhs: Box<MatrixExpr> },
    /// Elementwise division with the denominator's magnitude floored at
    /// 1e-9 (sign preserved; an exact zero divides as +1e-9).
    SafeDiv { lhs: Box<MatrixExpr>, rhs: Box<MatrixExpr> },
    Min { lhs: Box<MatrixExpr>, rhs: Box<MatrixExpr> },
    Max { lhs: Box<MatrixExpr>, rhs: Box<MatrixExpr> },
    Neg { arg: Box<MatrixExpr> },
    Abs { arg: Box<MatrixExpr> },
    Sqrt { arg: Box<MatrixExpr> },
    /// `exp(x)` with the exponent clamped to `[-30, 30]`.
    ExpClamped { arg: Box<MatrixExpr> },
    /// `ln(1e-9 + |x|)`.
    LogSafe { arg: Box<MatrixExpr> },
    /// Min-max rescaling computed over off-diagonal entries.
    Normalize01 { arg: Box<MatrixExpr> },
    /// `(M + M^T) / 2`.
    Symmetrize { arg: Box<MatrixExpr> },
}

impl MatrixExpr {
    pub fn children(&self) -> Vec<&MatrixExpr> {
        match self {
            MatrixExpr::Dist | MatrixExpr::PrizeOuter | MatrixExpr::Const { .. } => vec![],
            MatrixExpr::RowMean { arg }
            | MatrixExpr::RowMin { arg }
            | MatrixExpr::RowMax { arg }
            | MatrixExpr::RankRow { arg }
            | MatrixExpr::Neg { arg }
            | MatrixExpr::Abs { arg }
            | MatrixExpr::Sqrt { arg }
            | MatrixExpr::ExpClamped { arg }
            | MatrixExpr::LogSafe { arg }
            | MatrixExpr::Normalize01 { arg }
            | MatrixExpr::Symmetrize { arg } => vec![arg],
            MatrixExpr::Add { lhs, rhs }
            | MatrixExpr::Sub { lhs, rhs }
            | MatrixExpr::Mul { lhs, rhs }
            | MatrixExpr::SafeDiv { lhs, rhs }
            | MatrixExpr::Min { lhs, rhs }
            | MatrixExpr::Max { lhs, rhs } => vec![lhs, rhs],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }
}

/// A complete heuristic: expression tree plus the solver slot it targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicProgram {
    pub target: Target,
    pub root: MatrixExpr,
}

impl HeuristicProgram {
    pub fn new(target: Target, root: MatrixExpr) -> Self {
        HeuristicProgram { target, root }
    }

    pub fn validate(&self) -> Result<()> {
        if self.root.depth() > MAX_DEPTH {
            return Err(heur_err("root", format!("depth exceeds {MAX_DEPTH}")));
        }
        if self.root.node_count() > MAX_NODES {
            return Err(heur_err("root", format!("node count exceeds {MAX_NODES}")));
        }
        validate_expr(&self.root, self.target, "root")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("heuristic serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let program: HeuristicProgram = serde_json::from_str(text)?;
        program.validate()?;
        Ok(program)
    }

    /// Short content hash of the serialized program.
    pub fn fingerprint(&self) -> String {
        crate::instance::short_hash(&self.to_json())
    }
}

fn heur_err(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidHeuristic {
        path: path.into(),
        reason: reason.into(),
    }
}

fn validate_expr(expr: &MatrixExpr, target: Target, path: &str) -> Result<()> {
    match expr {
        MatrixExpr::PrizeOuter if target != Target::AcoEtaOp => {
            return Err(heur_err(
                path,
                format!("prize_outer is only valid for aco_eta_op, target is {target}"),
            ));
        }
        MatrixExpr::Const { value } if !value.is_finite() => {
            return Err(heur_err(path, format!("const {value} is not finite")));
        }
        _ => {}
    }
    for (i, child) in expr.children().into_iter().enumerate() {
        validate_expr(child, target, &format!("{path}[{i}]"))?;
    }
    Ok(())
}

/// The non-evolved control heuristic for each solver slot: raw distance for
/// the GLS guide, `1/d` visibility for TSP ACO, and prize-over-distance for
/// OP ACO.
pub fn baseline_heuristic(target: Target) -> HeuristicProgram {
    let root = match target {
        Target::GlsGuide => MatrixExpr::Dist,
        Target::AcoEtaTsp => MatrixExpr::SafeDiv {
            lhs: Box::new(MatrixExpr::Const { value: 1.0 }),
            rhs: Box::new(MatrixExpr::Dist),
        },
        Target::AcoEtaOp => MatrixExpr::SafeDiv {
            lhs: Box::new(MatrixExpr::PrizeOuter),
            rhs: Box::new(MatrixExpr::Dist),
        },
    };
    HeuristicProgram::new(target, root)
}
