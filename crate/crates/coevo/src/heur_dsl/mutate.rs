//! Single-edit mutation of heuristic programs.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::heur_dsl::{HeuristicProgram, MatrixExpr, Target};
use crate::rng::Seed;

/// Relative odds of each heuristic edit class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationWeights {
    /// Constant perturbation (hyperparameter change).
    pub perturb: f64,
    /// Operator replacement within the same arity class (strategy switch).
    pub replace: f64,
    /// Subtree regeneration from the grammar (algorithmic rewrite).
    pub regenerate: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        MutationWeights {
            perturb: 1.0,
            replace: 1.0,
            regenerate: 1.0,
        }
    }
}

/// Which edit a heuristic mutation applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeurEditClass {
    Perturb,
    Replace,
    Regenerate,
}

impl std::fmt::Display for HeurEditClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            HeurEditClass::Perturb => "perturb",
            HeurEditClass::Replace => "replace",
            HeurEditClass::Regenerate => "regenerate",
        };
        write!(f, "{s}")
    }
}

/// Applies exactly one edit chosen by `weights`. Always returns a valid
/// program different from the input; deterministic in
/// `(program, seed, weights)`. Failed draws are retried up to 16 times,
/// then constant perturbation is forced, then operator replacement (which
/// always has a legal move) as the last resort.
pub fn mutate_heuristic(
    program: &HeuristicProgram,
    seed: Seed,
    weights: &MutationWeights,
) -> HeuristicProgram {
    mutate_heuristic_traced(program, seed, weights).0
}

/// [`mutate_heuristic`] plus the applied edit class.
pub fn mutate_heuristic_traced(
    program: &HeuristicProgram,
    seed: Seed,
    weights: &MutationWeights,
) -> (HeuristicProgram, HeurEditClass) {
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
                return (candidate, HeurEditClass::Perturb);
            }
        }
    }
    loop {
        if let Some(candidate) = replace_edit(program, &mut rng) {
            if candidate != *program && candidate.validate().is_ok() {
                return (candidate, HeurEditClass::Replace);
            }
        }
    }
}

fn pick_class(weights: &MutationWeights, rng: &mut ChaCha8Rng) -> HeurEditClass {
    let entries = [
        (HeurEditClass::Perturb, weights.perturb.max(0.0)),
        (HeurEditClass::Replace, weights.replace.max(0.0)),
        (HeurEditClass::Regenerate, weights.regenerate.max(0.0)),
    ];
    let total: f64 = entries.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return HeurEditClass::Perturb;
    }
    let mut r = rng.random::<f64>() * total;
    for (class, w) in entries {
        r -= w;
        if r < 0.0 {
            return class;
        }
    }
    HeurEditClass::Regenerate
}

fn apply_edit(
    program: &HeuristicProgram,
    class: HeurEditClass,
    rng: &mut ChaCha8Rng,
) -> Option<HeuristicProgram> {
    match class {
        HeurEditClass::Perturb => perturb_edit(program, rng),
        HeurEditClass::Replace => replace_edit(program, rng),
        HeurEditClass::Regenerate => regenerate_edit(program, rng),
    }
}

fn perturb_edit(program: &HeuristicProgram, rng: &mut ChaCha8Rng) -> Option<HeuristicProgram> {
    let paths: Vec<Vec<usize>> = expr_paths(&program.root)
        .into_iter()
        .filter(|p| matches!(expr_at(&program.root, p), MatrixExpr::Const { .. }))
        .collect();
    if paths.is_empty() {
        return None;
    }
    let path = &paths[rng.random_range(0..paths.len())];
    let mut out = program.clone();
    if let MatrixExpr::Const { value } = expr_at_mut(&mut out.root, path) {
        let old = *value;
        for _ in 0..16 {
            let cand = if old.abs() < 1e-12 {
                rng.random_range(-0.3..0.3)
            } else {
                old * (1.0 + 0.3 * rng.random_range(-1.0..1.0))
            };
            if (cand - old).abs() > 1e-15 {
                *value = cand;
                break;
            }
        }
    }
    Some(out)
}

fn replace_edit(program: &HeuristicProgram, rng: &mut ChaCha8Rng) -> Option<HeuristicProgram> {
    let paths = expr_paths(&program.root);
    let path = &paths[rng.random_range(0..paths.len())];
    let mut out = program.clone();
    let target = out.target;
    let node = expr_at_mut(&mut out.root, path);
    match node.children().len() {
        0 => {
            // A different leaf kind.
            for _ in 0..16 {
                let leaf = random_leaf(target, rng);
                if std::mem::discriminant(&leaf) != std::mem::discriminant(node) {
                    *node = leaf;
                    break;
                }
            }
        }
        1 => {
            let arg = take_child(node, 0);
            *node = build_unary(pick_other_unary(node, rng), arg);
        }
        _ => {
            let lhs = take_child(node, 0);
            let rhs = take_child(node, 1);
            *node = build_binary(pick_other_binary(node, rng), lhs, rhs);
        }
    }
    Some(out)
}

fn regenerate_edit(program: &HeuristicProgram, rng: &mut ChaCha8Rng) -> Option<HeuristicProgram> {
    let paths = expr_paths(&program.root);
    let path = &paths[rng.random_range(0..paths.len())];
    let mut out = program.clone();
    let target = out.target;
    *expr_at_mut(&mut out.root, path) = random_expr(target, 3, rng);
    Some(out)
}

const UNARY_OPS: [&str; 11] = [
    "row_mean", "row_min", "row_max", "rank_row", "neg", "abs", "sqrt", "exp_clamped",
    "log_safe", "normalize01", "symmetrize",
];
const BINARY_OPS: [&str; 6] = ["add", "sub", "mul", "safe_div", "min", "max"];

fn unary_name(e: &MatrixExpr) -> &'static str {
    match e {
        MatrixExpr::RowMean { .. } => "row_mean",
        MatrixExpr::RowMin { .. } => "row_min",
        MatrixExpr::RowMax { .. } => "row_max",
        MatrixExpr::RankRow { .. } => "rank_row",
        MatrixExpr::Neg { .. } => "neg",
        MatrixExpr::Abs { .. } => "abs",
        MatrixExpr::Sqrt { .. } => "sqrt",
        MatrixExpr::ExpClamped { .. } => "exp_clamped",
        MatrixExpr::LogSafe { .. } => "log_safe",
        MatrixExpr::Normalize01 { .. } => "normalize01",
        MatrixExpr::Symmetrize { .. } => "symmetrize",
        _ => unreachable!("not a unary"),
    }
}

fn binary_name(e: &MatrixExpr) -> &'static str {
    match e {
        MatrixExpr::Add { .. } => "add",
        MatrixExpr::Sub { .. } => "sub",
        MatrixExpr::Mul { .. } => "mul",
        MatrixExpr::SafeDiv { .. } => "safe_div",
        MatrixExpr::Min { .. } => "min",
        MatrixExpr::Max { .. } => "max",
        _ => unreachable!("not a binary"),
    }
}

fn pick_other_unary(current: &MatrixExpr, rng: &mut ChaCha8Rng) -> &'static str {
    let cur = unary_name(current);
    loop {
        let cand = UNARY_OPS[rng.random_range(0..UNARY_OPS.len())];
        if cand != cur {
            return cand;
        }
    }
}

fn pick_other_binary(current: &MatrixExpr, rng: &mut ChaCha8Rng) -> &'static str {
    let cur = binary_name(current);
    loop {
        let cand = BINARY_OPS[rng.random_range(0..BINARY_OPS.len())];
        if cand != cur {
            return cand;
        }
    }
}

fn build_unary(name: &str, arg: MatrixExpr) -> MatrixExpr {
    let arg = Box::new(arg);
    match name {
        "row_mean" => MatrixExpr::RowMean { arg },
        "row_min" => MatrixExpr::RowMin { arg },
        "row_max" => MatrixExpr::RowMax { arg },
        "rank_row" => MatrixExpr::RankRow { arg },
        "neg" => MatrixExpr::Neg { arg },
        "abs" => MatrixExpr::Abs { arg },
        "sqrt" => MatrixExpr::Sqrt { arg },
        "exp_clamped" => MatrixExpr::ExpClamped { arg },
        "log_safe" => MatrixExpr::LogSafe { arg },
        "normalize01" => MatrixExpr::Normalize01 { arg },
        "symmetrize" => MatrixExpr::Symmetrize { arg },
        _ => unreachable!("unknown unary {name}"),
    }
}

fn build_binary(name: &str, lhs: MatrixExpr, rhs: MatrixExpr) -> MatrixExpr {
    let (lhs, rhs) = (Box::new(lhs), Box::new(rhs));
    match name {
        "add" => MatrixExpr::Add { lhs, rhs },
        "sub" => MatrixExpr::Sub { lhs, rhs },
        "mul" => MatrixExpr::Mul { lhs, rhs },
        "safe_div" => MatrixExpr::SafeDiv { lhs, rhs },
        "min" => MatrixExpr::Min { lhs, rhs },
        "max" => MatrixExpr::Max { lhs, rhs },
        _ => unreachable!("unknown binary {name}"),
    }
}

fn random_leaf(target: Target, rng: &mut ChaCha8Rng) -> MatrixExpr {
    let kinds = if target == Target::AcoEtaOp { 3 } else { 2 };
    match rng.random_range(0..kinds) {
        0 => MatrixExpr::Dist,
        1 => MatrixExpr::Const {
            value: rng.random_range(0.1..2.0),
        },
        _ => MatrixExpr::PrizeOuter,
    }
}

/// Samples a fresh expression of bounded depth from the grammar.
fn random_expr(target: Target, depth_budget: usize, rng: &mut ChaCha8Rng) -> MatrixExpr {
    if depth_budget <= 1 {
        return random_leaf(target, rng);
    }
    match rng.random_range(0..10) {
        0..=3 => random_leaf(target, rng),
        4..=6 => build_unary(
            UNARY_OPS[rng.random_range(0..UNARY_OPS.len())],
            random_expr(target, depth_budget - 1, rng),
        ),
        _ => build_binary(
            BINARY_OPS[rng.random_range(0..BINARY_OPS.len())],
            random_expr(target, depth_budget - 1, rng),
            random_expr(target, depth_budget - 1, rng),
        ),
    }
}

fn take_child(node: &mut MatrixExpr, idx: usize) -> MatrixExpr {
    match node {
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
        | MatrixExpr::Symmetrize { arg } => std::mem::replace(arg.as_mut(), MatrixExpr::Dist),
        MatrixExpr::Add { lhs, rhs }
        | MatrixExpr::Sub { lhs, rhs }
        | MatrixExpr::Mul { lhs, rhs }
        | MatrixExpr::SafeDiv { lhs, rhs }
        | MatrixExpr::Min { lhs, rhs }
        | MatrixExpr::Max { lhs, rhs } => {
            let slot = if idx == 0 { lhs } else { rhs };
            std::mem::replace(slot.as_mut(), MatrixExpr::Dist)
        }
        _ => unreachable!("leaf has no children"),
    }
}

fn expr_paths(root: &MatrixExpr) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn walk(node: &MatrixExpr, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        for (i, child) in node.children().into_iter().enumerate() {
            path.push(i);
            walk(child, path, out);
            path.pop();
        }
    }
    walk(root, &mut Vec::new(), &mut out);
    out
}

fn expr_at<'a>(root: &'a MatrixExpr, path: &[usize]) -> &'a MatrixExpr {
    let mut node = root;
    for &idx in path {
        node = node.children()[idx];
    }
    node
}

fn expr_at_mut<'a>(root: &'a mut MatrixExpr, path: &[usize]) -> &'a mut MatrixExpr {
    let mut node = root;
    for &idx in path {
        node = match node {
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
            | MatrixExpr::Symmetrize { arg } => arg.as_mut(),
            MatrixExpr::Add { lhs, rhs }
            | MatrixExpr::Sub { lhs, rhs }
            | MatrixExpr::Mul { lhs, rhs }
            | MatrixExpr::SafeDiv { lhs, rhs }
            | MatrixExpr::Min { lhs, rhs }
            | MatrixExpr::Max { lhs, rhs } => {
                if idx == 0 {
                    lhs.as_mut()
                } else {
                    rhs.as_mut()
                }
            }
            _ => unreachable!("path descends into a leaf"),
        };
    }
    node
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heur_dsl::baseline_heuristic;

    fn only(class: HeurEditClass) -> MutationWeights {
        let mut w = MutationWeights {
            perturb: 0.0,
            replace: 0.0,
            regenerate: 0.0,
        };
        match class {
            HeurEditClass::Perturb => w.perturb = 1.0,
            HeurEditClass::Replace => w.replace = 1.0,
            HeurEditClass::Regenerate => w.regenerate = 1.0,
        }
        w
    }

    #[test]
    fn const_perturbation_is_multiplicative_thirty_percent() {
        let p = HeuristicProgram::new(Target::GlsGuide, MatrixExpr::Const { value: 2.0 });
        for seed in 0..1000u64 {
            let out = mutate_heuristic(&p, Seed(seed), &only(HeurEditClass::Perturb));
            match out.root {
                MatrixExpr::Const { value } => {
                    assert!(
                        (1.4..=2.6).contains(&value) && value != 2.0,
                        "seed {seed}: {value}"
                    );
                }
                other => panic!("perturbation rebuilt the tree: {other:?}"),
            }
        }
    }

    #[test]
    fn operator_replacement_stays_in_arity_class() {
        let p = HeuristicProgram::new(
            Target::GlsGuide,
            MatrixExpr::Add {
                lhs: Box::new(MatrixExpr::Dist),
                rhs: Box::new(MatrixExpr::Dist),
            },
        );
        for seed in 0..100u64 {
            let out = mutate_heuristic(&p, Seed(seed), &only(HeurEditClass::Replace));
            out.validate().unwrap();
            // Either the root became a different binary over (Dist, Dist) or
            // one of the Dist leaves changed kind; both are arity-preserving.
            match &out.root {
                MatrixExpr::Add { .. } => {
                    assert_ne!(out.root, p.root, "seed {seed}");
                }
                other => {
                    assert!(
                        other.children().len() == 2 || other.children().is_empty(),
                        "seed {seed}: {other:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn same_seed_same_output() {
        let p = baseline_heuristic(Target::AcoEtaOp);
        let w = MutationWeights::default();
        for seed in 0..20 {
            assert_eq!(
                mutate_heuristic(&p, Seed(seed), &w),
                mutate_heuristic(&p, Seed(seed), &w)
            );
        }
    }

    #[test]
    fn chained_mutations_always_validate() {
        let mut p = baseline_heuristic(Target::AcoEtaOp);
        let w = MutationWeights::default();
        for seed in 0..20_000u64 {
            let (next, _) = mutate_heuristic_traced(&p, Seed(seed), &w);
            next.validate()
                .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", next.to_json()));
            assert_ne!(next, p, "seed {seed}");
            p = next;
        }
    }

    #[test]
    fn prize_outer_never_leaks_into_tsp_targets() {
        let mut p = baseline_heuristic(Target::AcoEtaTsp);
        let w = MutationWeights::default();
        for seed in 0..2000u64 {
            p = mutate_heuristic(&p, Seed(seed), &w);
            p.validate().unwrap();
        }
    }
}
