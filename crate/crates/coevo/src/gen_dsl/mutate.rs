//! Single-edit mutation of generator programs.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gen_dsl::{GeneratorNode, GeneratorProgram};
use crate::rng::Seed;

/// Relative odds of each edit class. All-equal by default; the evolution
/// engine nudges these with reflection feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationWeights {
    pub perturb: f64,
    pub replace: f64,
    pub insert: f64,
    pub delete: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        MutationWeights {
            perturb: 1.0,
            replace: 1.0,
            insert: 1.0,
            delete: 1.0,
        }
    }
}

/// Which edit a mutation applied. Reported to the reflection channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditClass {
    Perturb,
    Replace,
    Insert,
    Delete,
}

impl std::fmt::Display for EditClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EditClass::Perturb => "perturb",
            EditClass::Replace => "replace",
            EditClass::Insert => "insert",
            EditClass::Delete => "delete",
        };
        write!(f, "{s}")
    }
}

/// Applies exactly one edit (parameter perturbation, node replacement,
/// subtree insertion, or subtree deletion) chosen by `weights`. The result
/// always validates and always differs from the input. Deterministic in
/// `(program, seed, weights)`.
///
/// Edits that would break an invariant (depth, node count, determinant,
/// parameter range) are re-drawn up to 16 times; if no weighted edit lands,
/// parameter perturbation is forced, and a program with nothing to perturb
/// falls back to replacing the root with a fresh leaf of another family.
pub fn mutate_generator(
    program: &GeneratorProgram,
    seed: Seed,
    weights: &MutationWeights,
) -> GeneratorProgram {
    mutate_generator_traced(program, seed, weights).0
}

/// [`mutate_generator`] plus the edit class that was applied.
pub fn mutate_generator_traced(
    program: &GeneratorProgram,
    seed: Seed,
    weights: &MutationWeights,
) -> (GeneratorProgram, EditClass) {
    let mut rng = seed.rng();
    for _ in 0..16 {
        let class = pick_class(weights, &mut rng);
        if let Some(candidate) = apply_edit(program, class, &mut rng) {
            if candidate != *program && candidate.validate().is_ok() {
                return (candidate, class);
            }
        }
    }
    for _ in 0..16 {
        if let Some(candidate) = perturb_edit(program, &mut rng) {
            if candidate != *program && candidate.validate().is_ok() {
                return (candidate, EditClass::Perturb);
            }
        }
    }
    // Nothing perturbable (e.g. a bare UniformSquare with no rules): swap the
    // root for a leaf of a different family, which always changes and always
    // validates.
    let mut candidate = program.clone();
    loop {
        let leaf = random_leaf(&mut rng);
        if leaf.family() != program.root.family() {
            candidate.root = leaf;
            return (candidate, EditClass::Replace);
        }
    }
}

fn pick_class(weights: &MutationWeights, rng: &mut ChaCha8Rng) -> EditClass {
    let entries = [
        (EditClass::Perturb, weights.perturb.max(0.0)),
        (EditClass::Replace, weights.replace.max(0.0)),
        (EditClass::Insert, weights.insert.max(0.0)),
        (EditClass::Delete, weights.delete.max(0.0)),
    ];
    let total: f64 = entries.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return EditClass::Perturb;
    }
    let mut r = rng.random::<f64>() * total;
    for (class, w) in entries {
        r -= w;
        if r < 0.0 {
            return class;
        }
    }
    EditClass::Delete
}

fn apply_edit(
    program: &GeneratorProgram,
    class: EditClass,
    rng: &mut ChaCha8Rng,
) -> Option<GeneratorProgram> {
    match class {
        EditClass::Perturb => perturb_edit(program, rng),
        EditClass::Replace => replace_edit(program, rng),
        EditClass::Insert => insert_edit(program, rng),
        EditClass::Delete => delete_edit(program, rng),
    }
}

/// A numeric slot somewhere in the program.
enum ParamSite {
    Node { path: Vec<usize>, slot: usize },
    PrizeScale,
    BudgetFactor,
}

fn perturb_edit(program: &GeneratorProgram, rng: &mut ChaCha8Rng) -> Option<GeneratorProgram> {
    let mut sites = Vec::new();
    for path in node_paths(&program.root) {
        let slots = match node_at(&program.root, &path) {
            GeneratorNode::UniformSquare => 0,
            GeneratorNode::GaussianClusters { .. }
            | GeneratorNode::Ring { .. }
            | GeneratorNode::Spiral { .. } => 2,
            GeneratorNode::Grid { .. } | GeneratorNode::Perturb { .. } => 1,
            GeneratorNode::Mix { weights, .. } => weights.len(),
            GeneratorNode::Transform { .. } => 6,
        };
        for slot in 0..slots {
            sites.push(ParamSite::Node {
                path: path.clone(),
                slot,
            });
        }
    }
    if program.prize_rule.is_some() {
        sites.push(ParamSite::PrizeScale);
    }
    if program.budget_rule.is_some() {
        sites.push(ParamSite::BudgetFactor);
    }
    if sites.is_empty() {
        return None;
    }
    let site = &sites[rng.random_range(0..sites.len())];
    let mut out = program.clone();
    match site {
        ParamSite::PrizeScale => {
            let rule = out.prize_rule.as_mut().unwrap();
            *rule.scale_mut() = perturb_value(rule.scale(), 1e-3, 100.0, rng);
        }
        ParamSite::BudgetFactor => {
            let rule = out.budget_rule.as_mut().unwrap();
            rule.factor = perturb_value(rule.factor, 0.5, 4.0, rng);
        }
        ParamSite::Node { path, slot } => {
            perturb_node_param(node_at_mut(&mut out.root, path), *slot, rng);
        }
    }
    Some(out)
}

fn perturb_node_param(node: &mut GeneratorNode, slot: usize, rng: &mut ChaCha8Rng) {
    match node {
        GeneratorNode::UniformSquare => {}
        GeneratorNode::GaussianClusters { k, spread } => match slot {
            0 => *k = perturb_int(*k, 1, 16, rng),
            _ => *spread = perturb_value(*spread, 1e-4, 0.5, rng),
        },
        GeneratorNode::Ring { radius, jitter } => match slot {
            0 => *radius = perturb_value(*radius, 1e-4, 0.5, rng),
            _ => *jitter = perturb_value(*jitter, 0.0, 0.5, rng),
        },
        GeneratorNode::Spiral { turns, jitter } => match slot {
            0 => *turns = perturb_value(*turns, 0.5, 6.0, rng),
            _ => *jitter = perturb_value(*jitter, 0.0, 0.5, rng),
        },
        GeneratorNode::Grid { jitter } => *jitter = perturb_value(*jitter, 0.0, 0.5, rng),
        GeneratorNode::Mix { weights, .. } => {
            weights[slot] = perturb_value(weights[slot], 1e-3, 100.0, rng)
        }
        GeneratorNode::Transform {
            a, b, c, d, tx, ty, ..
        } => {
            let target = match slot {
                0 => a,
                1 => b,
                2 => c,
                3 => d,
                4 => tx,
                _ => ty,
            };
            let (lo, hi) = if slot < 4 { (-4.0, 4.0) } else { (-1.0, 1.0) };
            *target = perturb_value(*target, lo, hi, rng);
        }
        GeneratorNode::Perturb { sigma, .. } => *sigma = perturb_value(*sigma, 0.0, 0.2, rng),
    }
}

/// Multiplicative +/-30% perturbation, clamped to `[lo, hi]`, redrawn until
/// the value actually moves. An exact zero (which multiplication cannot
/// move) instead draws a small offset inside the range.
fn perturb_value(v: f64, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    for _ in 0..16 {
        let u: f64 = rng.random_range(-1.0..1.0);
        let cand = if v.abs() < 1e-12 {
            let span = 0.3 * (hi - lo).min(1.0);
            if lo >= 0.0 {
                u.abs() * span
            } else {
                u * span
            }
        } else {
            v * (1.0 + 0.3 * u)
        };
        let cand = cand.clamp(lo, hi);
        if (cand - v).abs() > 1e-15 {
            return cand;
        }
    }
    v
}

fn perturb_int(v: u32, lo: u32, hi: u32, rng: &mut ChaCha8Rng) -> u32 {
    for _ in 0..16 {
        let u = rng.random_range(-1.0..1.0f64);
        let cand = ((v as f64 * (1.0 + 0.3 * u)).round() as i64)
            .clamp(lo as i64, hi as i64) as u32;
        if cand != v {
            return cand;
        }
    }
    if v >= hi {
        v - 1
    } else {
        v + 1
    }
}

fn replace_edit(program: &GeneratorProgram, rng: &mut ChaCha8Rng) -> Option<GeneratorProgram> {
    let paths = node_paths(&program.root);
    let path = &paths[rng.random_range(0..paths.len())];
    let mut out = program.clone();
    let node = node_at_mut(&mut out.root, path);
    match node {
        GeneratorNode::UniformSquare
        | GeneratorNode::GaussianClusters { .. }
        | GeneratorNode::Ring { .. }
        | GeneratorNode::Spiral { .. }
        | GeneratorNode::Grid { .. } => {
            let family = node.family();
            for _ in 0..16 {
                let leaf = random_leaf(rng);
                if leaf.family() != family {
                    *node = leaf;
                    break;
                }
            }
        }
        GeneratorNode::Transform { child, .. } => {
            *node = GeneratorNode::Perturb {
                sigma: rng.random_range(0.005..0.1),
                child: std::mem::replace(child, Box::new(GeneratorNode::UniformSquare)),
            };
        }
        GeneratorNode::Perturb { child, .. } => {
            let (a, b, c, d) = random_linear_part(rng);
            *node = GeneratorNode::Transform {
                a,
                b,
                c,
                d,
                tx: rng.random_range(-0.3..0.3),
                ty: rng.random_range(-0.3..0.3),
                child: std::mem::replace(child, Box::new(GeneratorNode::UniformSquare)),
            };
        }
        GeneratorNode::Mix { weights, .. } => {
            for w in weights.iter_mut() {
                *w = rng.random_range(0.2..2.0);
            }
        }
    }
    Some(out)
}

fn insert_edit(program: &GeneratorProgram, rng: &mut ChaCha8Rng) -> Option<GeneratorProgram> {
    let paths = node_paths(&program.root);
    let path = &paths[rng.random_range(0..paths.len())];
    let mut out = program.clone();
    let node = node_at_mut(&mut out.root, path);
    let inner = std::mem::replace(node, GeneratorNode::UniformSquare);
    *node = match rng.random_range(0..3) {
        0 => {
            let (a, b, c, d) = random_linear_part(rng);
            GeneratorNode::Transform {
                a,
                b,
                c,
                d,
                tx: rng.random_range(-0.3..0.3),
                ty: rng.random_range(-0.3..0.3),
                child: Box::new(inner),
            }
        }
        1 => GeneratorNode::Perturb {
            sigma: rng.random_range(0.005..0.1),
            child: Box::new(inner),
        },
        _ => GeneratorNode::Mix {
            weights: vec![rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)],
            children: vec![inner, random_leaf(rng)],
        },
    };
    Some(out)
}

fn delete_edit(program: &GeneratorProgram, rng: &mut ChaCha8Rng) -> Option<GeneratorProgram> {
    let candidates: Vec<Vec<usize>> = node_paths(&program.root)
        .into_iter()
        .filter(|p| !node_at(&program.root, p).children().is_empty())
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let path = &candidates[rng.random_range(0..candidates.len())];
    let mut out = program.clone();
    let node = node_at_mut(&mut out.root, path);
    let keep = rng.random_range(0..node.children().len());
    *node = node.children()[keep].clone();
    Some(out)
}

fn random_leaf(rng: &mut ChaCha8Rng) -> GeneratorNode {
    match rng.random_range(0..5) {
        0 => GeneratorNode::UniformSquare,
        1 => GeneratorNode::GaussianClusters {
            k: rng.random_range(1..=8),
            spread: rng.random_range(0.01..0.3),
        },
        2 => GeneratorNode::Ring {
            radius: rng.random_range(0.1..0.45),
            jitter: rng.random_range(0.0..0.05),
        },
        3 => GeneratorNode::Spiral {
            turns: rng.random_range(0.5..4.0),
            jitter: rng.random_range(0.0..0.05),
        },
        _ => GeneratorNode::Grid {
            jitter: rng.random_range(0.0..0.05),
        },
    }
}

fn random_linear_part(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    for _ in 0..16 {
        let (a, b, c, d): (f64, f64, f64, f64) = (
            rng.random_range(-1.2..1.2),
            rng.random_range(-1.2..1.2),
            rng.random_range(-1.2..1.2),
            rng.random_range(-1.2..1.2),
        );
        if (a * d - b * c).abs() >= super::MIN_TRANSFORM_DET {
            return (a, b, c, d);
        }
    }
    (1.0, 0.0, 0.0, 1.0)
}

/// DFS pre-order paths to every node; path elements are child indices.
fn node_paths(root: &GeneratorNode) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn walk(node: &GeneratorNode, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        for (i, child) in node.children().iter().enumerate() {
            path.push(i);
            walk(child, path, out);
            path.pop();
        }
    }
    walk(root, &mut Vec::new(), &mut out);
    out
}

fn node_at<'a>(root: &'a GeneratorNode, path: &[usize]) -> &'a GeneratorNode {
    let mut node = root;
    for &idx in path {
        node = &node.children()[idx];
    }
    node
}

fn node_at_mut<'a>(root: &'a mut GeneratorNode, path: &[usize]) -> &'a mut GeneratorNode {
    let mut node = root;
    for &idx in path {
        node = match node {
            GeneratorNode::Mix { children, .. } => &mut children[idx],
            GeneratorNode::Transform { child, .. } | GeneratorNode::Perturb { child, .. } => {
                child.as_mut()
            }
            _ => unreachable!("path descends into a leaf"),
        };
    }
    node
}
