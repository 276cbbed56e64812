//! The instance-generator DSL.
//!
//! A generator program is a small AST of spatial primitives (uniform box,
//! Gaussian clusters, rings, spirals, grids) composed through mixtures,
//! affine transforms, and additive noise. Executing a program with a seed
//! yields a problem instance; see [`generate`]. Programs are plain data:
//! serializable, validatable, and mutable without running any code from the
//! outside world.
//!
//! JSON form is an internally tagged union on `"node"`, e.g.
//! `{"node":"mix","weights":[1,2],"children":[...]}`.

mod mutate;
mod sample;

pub use mutate::{mutate_generator, mutate_generator_traced, EditClass, MutationWeights};
pub use sample::{generate, generate_points};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current serialization format version.
pub const GENERATOR_FORMAT_VERSION: u32 = 1;

/// Maximum AST depth (a lone leaf has depth 1).
pub const MAX_DEPTH: usize = 8;
/// Maximum number of AST nodes.
pub const MAX_NODES: usize = 64;
/// Mix arity bounds.
pub const MIX_CHILDREN: std::ops::RangeInclusive<usize> = 2..=5;
/// Minimum |determinant| of a Transform's linear part.
pub const MIN_TRANSFORM_DET: f64 = 0.05;

/// One node of the point-sampling AST.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorNode {
    /// Uniform draws over the unit square.
    UniformSquare,
    /// `k` cluster centers (drawn once per instance), isotropic Gaussian
    /// spread around the chosen center per point.
    GaussianClusters { k: u32, spread: f64 },
    /// Points on a circle of `radius` around (0.5, 0.5) with additive
    /// Gaussian jitter.
    Ring { radius: f64, jitter: f64 },
    /// Archimedean spiral around (0.5, 0.5) sweeping `turns` revolutions.
    Spiral { turns: f64, jitter: f64 },
    /// Regular ceil(sqrt(n)) lattice with Gaussian jitter.
    Grid { jitter: f64 },
    /// Each point drawn from child `c` with probability
    /// `weights[c] / sum(weights)`.
    Mix {
        weights: Vec<f64>,
        children: Vec<GeneratorNode>,
    },
    /// Per-point affine map `(x, y) -> (a x + b y + tx, c x + d y + ty)`.
    Transform {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        tx: f64,
        ty: f64,
        child: Box<GeneratorNode>,
    },
    /// Additive isotropic Gaussian noise.
    Perturb { sigma: f64, child: Box<GeneratorNode> },
}

impl GeneratorNode {
    /// Short family name used in ids, reflections, and reports.
    pub fn family(&self) -> &'static str {
        match self {
            GeneratorNode::UniformSquare => "uniform_square",
            GeneratorNode::GaussianClusters { .. } => "gaussian_clusters",
            GeneratorNode::Ring { .. } => "ring",
            GeneratorNode::Spiral { .. } => "spiral",
            GeneratorNode::Grid { .. } => "grid",
            GeneratorNode::Mix { .. } => "mix",
            GeneratorNode::Transform { .. } => "transform",
            GeneratorNode::Perturb { .. } => "perturb",
        }
    }

    pub fn children(&self) -> &[GeneratorNode] {
        match self {
            GeneratorNode::Mix { children, .. } => children,
            GeneratorNode::Transform { child, .. } | GeneratorNode::Perturb { child, .. } => {
                std::slice::from_ref(child)
            }
            _ => &[],
        }
    }

    fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    fn depth(&self) -> usize {
        1 + self
            .children()
            .iter()
            .map(|c| c.depth())
            .max()
            .unwrap_or(0)
    }
}

/// How an OP instance assigns prizes to nodes (the depot prize is always
/// forced to 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrizeRule {
    /// Every non-depot node is worth `scale`.
    UniformPrize { scale: f64 },
    /// Prize grows linearly with distance from the depot:
    /// `scale * d(i, depot)`.
    DistanceFromDepotPrize { scale: f64 },
    /// Prize rewards locally dense nodes: `scale * |{j != i : d(i,j) < 0.1}| / n`.
    ClusterBonusPrize { scale: f64 },
}

impl PrizeRule {
    pub fn scale(&self) -> f64 {
        match self {
            PrizeRule::UniformPrize { scale }
            | PrizeRule::DistanceFromDepotPrize { scale }
            | PrizeRule::ClusterBonusPrize { scale } => *scale,
        }
    }

    pub(crate) fn scale_mut(&mut self) -> &mut f64 {
        match self {
            PrizeRule::UniformPrize { scale }
            | PrizeRule::DistanceFromDepotPrize { scale }
            | PrizeRule::ClusterBonusPrize { scale } => scale,
        }
    }
}

/// OP route budget: `max_len = factor * sqrt(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRule {
    pub factor: f64,
}

/// Budget factor bounds.
pub const BUDGET_FACTOR_RANGE: std::ops::RangeInclusive<f64> = 0.5..=4.0;

/// A complete instance generator: the sampling AST plus optional OP rules
/// attached at the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorProgram {
    pub version: u32,
    pub root: GeneratorNode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prize_rule: Option<PrizeRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_rule: Option<BudgetRule>,
}

impl GeneratorProgram {
    pub fn new(root: GeneratorNode) -> Self {
        GeneratorProgram {
            version: GENERATOR_FORMAT_VERSION,
            root,
            prize_rule: None,
            budget_rule: None,
        }
    }

    /// Validates structure bounds, parameter ranges, and rule parameters.
    /// Errors name the offending node by path, e.g. `root.children[1]`.
    pub fn validate(&self) -> Result<()> {
        if self.root.depth() > MAX_DEPTH {
            return Err(gen_err("root", format!("depth exceeds {MAX_DEPTH}")));
        }
        if self.root.node_count() > MAX_NODES {
            return Err(gen_err("root", format!("node count exceeds {MAX_NODES}")));
        }
        validate_node(&self.root, "root")?;
        if let Some(rule) = &self.prize_rule {
            let s = rule.scale();
            if !(s.is_finite() && s > 0.0) {
                return Err(gen_err("prize_rule", format!("scale {s} must be positive")));
            }
        }
        if let Some(rule) = &self.budget_rule {
            if !rule.factor.is_finite() || !BUDGET_FACTOR_RANGE.contains(&rule.factor) {
                return Err(gen_err(
                    "budget_rule",
                    format!("factor {} outside [0.5, 4]", rule.factor),
                ));
            }
        }
        Ok(())
    }

    /// Stable JSON form (pretty, fixed field order).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("generator serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let program: GeneratorProgram = serde_json::from_str(text)?;
        program.validate()?;
        Ok(program)
    }

    /// Family of the root node; used to bucket reflection reports.
    pub fn family(&self) -> &'static str {
        self.root.family()
    }

    /// Short content hash of the serialized program.
    pub fn fingerprint(&self) -> String {
        crate::instance::short_hash(&self.to_json())
    }
}

fn gen_err(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidGenerator {
        path: path.into(),
        reason: reason.into(),
    }
}

fn validate_node(node: &GeneratorNode, path: &str) -> Result<()> {
    let finite = |v: f64, name: &str| -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(gen_err(path, format!("{name} = {v} is not finite")))
        }
    };
    match node {
        GeneratorNode::UniformSquare => {}
        GeneratorNode::GaussianClusters { k, spread } => {
            if *k < 1 {
                return Err(gen_err(path, "k must be at least 1"));
            }
            finite(*spread, "spread")?;
            if !(*spread > 0.0 && *spread <= 0.5) {
                return Err(gen_err(path, format!("spread {spread} outside (0, 0.5]")));
            }
        }
        GeneratorNode::Ring { radius, jitter } => {
            finite(*radius, "radius")?;
            finite(*jitter, "jitter")?;
            if !(*radius > 0.0 && *radius <= 0.5) {
                return Err(gen_err(path, format!("radius {radius} outside (0, 0.5]")));
            }
            if *jitter < 0.0 {
                return Err(gen_err(path, format!("jitter {jitter} must be >= 0")));
            }
        }
        GeneratorNode::Spiral { turns, jitter } => {
            finite(*turns, "turns")?;
            finite(*jitter, "jitter")?;
            if !(0.5..=6.0).contains(turns) {
                return Err(gen_err(path, format!("turns {turns} outside [0.5, 6]")));
            }
            if *jitter < 0.0 {
                return Err(gen_err(path, format!("jitter {jitter} must be >= 0")));
            }
        }
        GeneratorNode::Grid { jitter } => {
            finite(*jitter, "jitter")?;
            if *jitter < 0.0 {
                return Err(gen_err(path, format!("jitter {jitter} must be >= 0")));
            }
        }
        GeneratorNode::Mix { weights, children } => {
            if !MIX_CHILDREN.contains(&children.len()) {
                return Err(gen_err(
                    path,
                    format!("mix must have 2..=5 children, got {}", children.len()),
                ));
            }
            if weights.len() != children.len() {
                return Err(gen_err(
                    path,
                    format!(
                        "{} weights for {} children",
                        weights.len(),
                        children.len()
                    ),
                ));
            }
            for (i, w) in weights.iter().enumerate() {
                if !(w.is_finite() && *w > 0.0) {
                    return Err(gen_err(
                        path,
                        format!("weights[{i}] = {w} must be strictly positive"),
                    ));
                }
            }
            for (i, child) in children.iter().enumerate() {
                validate_node(child, &format!("{path}.children[{i}]"))?;
            }
        }
        GeneratorNode::Transform {
            a,
            b,
            c,
            d,
            tx,
            ty,
            child,
        } => {
            for (v, name) in [(a, "a"), (b, "b"), (c, "c"), (d, "d"), (tx, "tx"), (ty, "ty")] {
                finite(*v, name)?;
            }
            let det = a * d - b * c;
            if det.abs() < MIN_TRANSFORM_DET {
                return Err(gen_err(
                    path,
                    format!("|det| = {} below {MIN_TRANSFORM_DET}", det.abs()),
                ));
            }
            validate_node(child, &format!("{path}.child"))?;
        }
        GeneratorNode::Perturb { sigma, child } => {
            finite(*sigma, "sigma")?;
            if !(0.0..=0.2).contains(sigma) {
                return Err(gen_err(path, format!("sigma {sigma} outside [0, 0.2]")));
            }
            validate_node(child, &format!("{path}.child"))?;
        }
    }
    Ok(())
}

/// The fixed uniform-square program used as the standard-dataset control in
/// every trend experiment.
pub fn canonical_uniform() -> GeneratorProgram {
    GeneratorProgram::new(GeneratorNode::UniformSquare)
}
