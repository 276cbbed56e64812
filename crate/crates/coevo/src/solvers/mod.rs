//! Solver scaffolds: guided local search and ant colony for TSP, ant
//! colony for orienteering, plus the exact and greedy baselines they lean
//! on. Every solver is a pure function of `(instance, program, params.seed)`.

mod aco;
mod gls;
mod held_karp;

pub use aco::{solve_aco_op, solve_aco_tsp};
pub use gls::solve_gls;
pub use held_karp::held_karp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceKind};
use crate::rng::Seed;
use crate::solution::{OpRoute, Tour};

/// Guided-local-search knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlsParams {
    /// Total improving moves the search may apply (on the augmented
    /// objective). 0 returns the nearest-neighbor construction.
    pub budget_ls_iters: u64,
    /// Penalty strength: lambda = lambda_alpha * (first local optimum cost) / n.
    pub lambda_alpha: f64,
    pub seed: Seed,
    /// Deterministic early stop: give up after this many penalty cycles
    /// without improving the best raw-distance tour. Scaled together with
    /// the budget by the reference policy so bigger budgets search longer.
    pub stall_cycles: u32,
}

pub const GLS_DEFAULT_BUDGET: u64 = 20_000;
pub const GLS_DEFAULT_STALL: u32 = 300;

impl Default for GlsParams {
    fn default() -> Self {
        GlsParams {
            budget_ls_iters: GLS_DEFAULT_BUDGET,
            lambda_alpha: 0.1,
            seed: Seed(0),
            stall_cycles: GLS_DEFAULT_STALL,
        }
    }
}

impl GlsParams {
    pub fn with_seed(seed: Seed) -> Self {
        GlsParams {
            seed,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.lambda_alpha.is_finite() && self.lambda_alpha > 0.0) {
            return Err(Error::Solver(format!(
                "lambda_alpha {} must be positive",
                self.lambda_alpha
            )));
        }
        if self.stall_cycles == 0 {
            return Err(Error::Solver("stall_cycles must be positive".into()));
        }
        Ok(())
    }
}

/// Ant-colony knobs, shared by the TSP and OP variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcoParams {
    /// Ants per iteration; `None` means `min(n, 30)`.
    pub n_ants: Option<usize>,
    pub iterations: usize,
    /// Pheromone exponent.
    pub alpha: f64,
    /// Visibility exponent.
    pub beta: f64,
    /// Evaporation rate in (0, 1).
    pub rho: f64,
    /// Probability of taking the greedy argmax step instead of the
    /// roulette draw.
    pub q0: f64,
    pub seed: Seed,
}

pub const ACO_DEFAULT_ITERATIONS: usize = 100;

impl Default for AcoParams {
    fn default() -> Self {
        AcoParams {
            n_ants: None,
            iterations: ACO_DEFAULT_ITERATIONS,
            alpha: 1.0,
            beta: 2.0,
            rho: 0.1,
            q0: 0.0,
            seed: Seed(0),
        }
    }
}

impl AcoParams {
    pub fn with_seed(seed: Seed) -> Self {
        AcoParams {
            seed,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Solver(format!("rho {} outside (0, 1)", self.rho)));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Solver("exponents must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.q0) {
            return Err(Error::Solver(format!("q0 {} outside [0, 1]", self.q0)));
        }
        if self.iterations == 0 {
            return Err(Error::Solver("iterations must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn ants_for(&self, n: usize) -> usize {
        self.n_ants.unwrap_or_else(|| n.min(30)).max(1)
    }
}

/// Best solution found by a solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveBest {
    Tour(Tour),
    Route(OpRoute),
}

/// Outcome of one solver call.
///
/// `wall_ms` is measured but never serialized: all persisted solver output
/// stays byte-deterministic for a given seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best: SolveBest,
    /// Tour length for TSP tasks, collected prize for OP.
    pub cost_or_prize: f64,
    /// Best-so-far objective per iteration (non-increasing for TSP,
    /// non-decreasing for OP).
    pub trace: Vec<f64>,
    #[serde(skip_serializing, default)]
    pub wall_ms: u64,
    /// Number of candidate solutions whose objective was evaluated.
    pub evaluations: u64,
}

impl SolveResult {
    pub fn tour(&self) -> Option<&Tour> {
        match &self.best {
            SolveBest::Tour(t) => Some(t),
            SolveBest::Route(_) => None,
        }
    }

    pub fn route(&self) -> Option<&OpRoute> {
        match &self.best {
            SolveBest::Tour(_) => None,
            SolveBest::Route(r) => Some(r),
        }
    }
}

/// Greedy nearest-neighbor tour from `start`; distance ties pick the lower
/// node index.
pub fn nearest_neighbor(instance: &Instance, start: usize) -> Result<Tour> {
    if instance.kind != InstanceKind::Tsp {
        return Err(Error::Solver("nearest_neighbor expects a tsp instance".into()));
    }
    let n = instance.n();
    if start >= n {
        return Err(Error::Solver(format!("start node {start} out of range")));
    }
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, seen) in visited.iter().enumerate() {
            if !*seen {
                let d = instance.dist(cur, j);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        visited[best] = true;
        order.push(best);
        cur = best;
    }
    Tour::new(instance, order)
}

/// k nearest neighbors of every node, sorted by distance then index.
pub(crate) fn neighbor_lists(instance: &Instance, k: usize) -> Vec<Vec<usize>> {
    let n = instance.n();
    let k = k.min(n.saturating_sub(1));
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                instance
                    .dist(i, a)
                    .total_cmp(&instance.dist(i, b))
                    .then(a.cmp(&b))
            });
            others.truncate(k);
            others
        })
        .collect()
}

/// `v^e` with the common integer exponents special-cased. Keeps the hot
/// loops off `powf` and makes uniform coordinate scaling an exact
/// bit-level rescaling for the default alpha=1, beta=2.
#[inline]
pub(crate) fn powx(v: f64, e: f64) -> f64 {
    if e == 1.0 {
        v
    } else if e == 2.0 {
        v * v
    } else if e == 0.0 {
        1.0
    } else {
        v.powf(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbor_on_collinear_points() {
        let inst = Instance::new(
            "line",
            InstanceKind::Tsp,
            vec![[0.0, 0.0], [0.25, 0.0], [0.5, 0.0], [0.75, 0.0]],
            None,
            None,
        )
        .unwrap();
        let t = nearest_neighbor(&inst, 0).unwrap();
        assert_eq!(t.order, vec![0, 1, 2, 3]);
        assert!((t.length - 1.5).abs() < 1e-12);
    }

    #[test]
    fn nearest_neighbor_square() {
        let inst = Instance::new(
            "sq",
            InstanceKind::Tsp,
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            None,
            None,
        )
        .unwrap();
        let t = nearest_neighbor(&inst, 0).unwrap();
        assert!((t.length - 4.0).abs() < 1e-12);
    }

    #[test]
    fn neighbor_lists_are_sorted_and_break_ties_by_index() {
        let inst = Instance::new(
            "sq",
            InstanceKind::Tsp,
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            None,
            None,
        )
        .unwrap();
        let lists = neighbor_lists(&inst, 3);
        // From node 0: nodes 1 and 3 tie at distance 1; 1 comes first.
        assert_eq!(lists[0], vec![1, 3, 2]);
    }
}
