//! Ant-colony solvers: ant system with elitist best-so-far deposits for
//! the TSP, and a budget-feasible variant for the orienteering problem.
//! A heuristic program supplies the visibility matrix eta.

use std::time::Instant;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::heur_dsl::{interpret, HeuristicProgram, Target};
use crate::instance::{distance_matrix, Instance, InstanceKind, SquareMatrix};
use crate::solution::{tour_cost, OpRoute, Tour};
use crate::solvers::{nearest_neighbor, powx, AcoParams, SolveBest, SolveResult};

const TAU_MIN: f64 = 1e-9;
const TAU_MAX: f64 = 1e9;

/// Pick a position in `nodes` given one weight per candidate. With
/// probability `q0` (or when the weights are degenerate) this is the
/// argmax, ties resolved to the lowest node index; otherwise a roulette
/// draw proportional to weight.
fn select_position(nodes: &[usize], weights: &[f64], q0: f64, rng: &mut ChaCha8Rng) -> usize {
    debug_assert_eq!(nodes.len(), weights.len());
    if nodes.len() == 1 {
        return 0;
    }
    let greedy = q0 > 0.0 && rng.random::<f64>() < q0;
    let total: f64 = weights.iter().sum();
    if greedy || !total.is_finite() || total <= 0.0 {
        let mut best_pos = 0;
        let mut best_w = f64::NEG_INFINITY;
        let mut best_node = usize::MAX;
        for (p, (&node, &w)) in nodes.iter().zip(weights).enumerate() {
            if w > best_w || (w == best_w && node < best_node) {
                best_pos = p;
                best_w = w;
                best_node = node;
            }
        }
        return best_pos;
    }
    let r = rng.random::<f64>() * total;
    let mut cum = 0.0;
    for (p, &w) in weights.iter().enumerate() {
        cum += w;
        if r < cum {
            return p;
        }
    }
    weights.len() - 1
}

fn evaporate(tau: &mut SquareMatrix, rho: f64) {
    for t in tau.as_mut_slice() {
        *t = ((1.0 - rho) * *t).clamp(TAU_MIN, TAU_MAX);
    }
}

fn deposit(tau: &mut SquareMatrix, path: &[usize], amount: f64) {
    for w in path.windows(2) {
        let (u, v) = (w[0], w[1]);
        if u == v {
            continue;
        }
        tau.set(u, v, (tau.get(u, v) + amount).clamp(TAU_MIN, TAU_MAX));
        tau.set(v, u, tau.get(u, v));
    }
}

/// Ant system for the TSP. Each iteration launches the ants from random
/// starts, then evaporates pheromone and deposits `1/best_cost` along the
/// best-so-far tour.
pub fn solve_aco_tsp(
    instance: &Instance,
    eta_program: &HeuristicProgram,
    params: &AcoParams,
) -> Result<SolveResult> {
    if instance.kind != InstanceKind::Tsp {
        return Err(Error::Solver("solve_aco_tsp expects a tsp instance".into()));
    }
    if eta_program.target != Target::AcoEtaTsp {
        return Err(Error::Solver(format!(
            "solve_aco_tsp needs an aco_eta_tsp program, got {}",
            eta_program.target
        )));
    }
    params.validate()?;

    let started = Instant::now();
    let n = instance.n();
    let eta = interpret(eta_program, instance)?;
    let n_ants = params.ants_for(n);

    let nn = nearest_neighbor(instance, 0)?;
    let tau0 = 1.0 / (n as f64 * nn.length.max(1e-9));
    let mut tau = SquareMatrix::filled(n, tau0);
    let mut rng = params.seed.rng();
    let mut evaluations: u64 = 1;

    let mut best_order: Option<Vec<usize>> = None;
    let mut best_cost = f64::INFINITY;
    let mut trace = Vec::with_capacity(params.iterations);
    let mut order = Vec::with_capacity(n);
    let mut unvisited = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);

    for _ in 0..params.iterations {
        for _ in 0..n_ants {
            let start = rng.random_range(0..n);
            order.clear();
            order.push(start);
            unvisited.clear();
            unvisited.extend((0..n).filter(|&j| j != start));
            let mut cur = start;
            while !unvisited.is_empty() {
                weights.clear();
                weights.extend(unvisited.iter().map(|&j| {
                    powx(tau.get(cur, j), params.alpha) * powx(eta.get(cur, j), params.beta)
                }));
                let p = select_position(&unvisited, &weights, params.q0, &mut rng);
                cur = unvisited.swap_remove(p);
                order.push(cur);
            }
            let cost = tour_cost(instance, &order)?;
            evaluations += 1;
            if cost < best_cost {
                best_cost = cost;
                best_order = Some(order.clone());
            }
        }
        evaporate(&mut tau, params.rho);
        let best = best_order.as_ref().expect("at least one ant ran");
        let mut closed = best.clone();
        closed.push(best[0]);
        deposit(&mut tau, &closed, 1.0 / best_cost);
        trace.push(best_cost);
    }

    let best = Tour::new(instance, best_order.expect("at least one ant ran"))?;
    Ok(SolveResult {
        cost_or_prize: best.length,
        best: SolveBest::Tour(best),
        trace,
        wall_ms: started.elapsed().as_millis() as u64,
        evaluations,
    })
}

/// Ant colony for the orienteering problem. Ants extend a depot-anchored
/// route only with nodes whose detour still allows returning to the depot
/// within `max_len`; deposits scale by prize relative to a greedy
/// prize-per-distance estimate.
pub fn solve_aco_op(
    instance: &Instance,
    eta_program: &HeuristicProgram,
    params: &AcoParams,
) -> Result<SolveResult> {
    if instance.kind != InstanceKind::Op {
        return Err(Error::Solver("solve_aco_op expects an op instance".into()));
    }
    if eta_program.target != Target::AcoEtaOp {
        return Err(Error::Solver(format!(
            "solve_aco_op needs an aco_eta_op program, got {}",
            eta_program.target
        )));
    }
    params.validate()?;

    let started = Instant::now();
    let n = instance.n();
    let dist = distance_matrix(instance);
    let eta = interpret(eta_program, instance)?;
    let prizes = instance
        .prizes
        .as_ref()
        .ok_or_else(|| Error::Solver("op instance lost its prizes".into()))?;
    let budget = instance
        .max_len
        .ok_or_else(|| Error::Solver("op instance lost its max_len".into()))?;
    let n_ants = params.ants_for(n);

    let prize_scale = greedy_prize(&dist, prizes, budget).max(1e-9);
    let mut evaluations: u64 = 1;
    let tau0 = 1.0 / n as f64;
    let mut tau = SquareMatrix::filled(n, tau0);
    let mut rng = params.seed.rng();

    let mut best_route: Option<Vec<usize>> = None;
    let mut best_prize = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(params.iterations);
    let mut route = Vec::with_capacity(n + 1);
    let mut feasible = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut visited = vec![false; n];

    for _ in 0..params.iterations {
        for _ in 0..n_ants {
            route.clear();
            route.push(0);
            visited.fill(false);
            visited[0] = true;
            let mut cur = 0usize;
            let mut len = 0.0;
            let mut prize = 0.0;
            loop {
                feasible.clear();
                for j in 1..n {
                    if !visited[j] && len + dist.get(cur, j) + dist.get(j, 0) <= budget {
                        feasible.push(j);
                    }
                }
                if feasible.is_empty() {
                    break;
                }
                weights.clear();
                weights.extend(feasible.iter().map(|&j| {
                    powx(tau.get(cur, j), params.alpha) * powx(eta.get(cur, j), params.beta)
                }));
                let p = select_position(&feasible, &weights, params.q0, &mut rng);
                let j = feasible[p];
                len += dist.get(cur, j);
                prize += prizes[j];
                visited[j] = true;
                route.push(j);
                cur = j;
            }
            route.push(0);
            evaluations += 1;
            if prize > best_prize {
                best_prize = prize;
                best_route = Some(route.clone());
            }
        }
        evaporate(&mut tau, params.rho);
        if best_prize > 0.0 {
            deposit(
                &mut tau,
                best_route.as_ref().expect("at least one ant ran"),
                best_prize / prize_scale,
            );
        }
        trace.push(best_prize);
    }

    let best = OpRoute::new(instance, best_route.expect("at least one ant ran"))?;
    Ok(SolveResult {
        cost_or_prize: best.collected_prize,
        best: SolveBest::Route(best),
        trace,
        wall_ms: started.elapsed().as_millis() as u64,
        evaluations,
    })
}

/// Greedy prize-per-distance route used to scale OP deposits. Returns the
/// prize it collects.
fn greedy_prize(dist: &SquareMatrix, prizes: &[f64], budget: f64) -> f64 {
    let n = prizes.len();
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut cur = 0usize;
    let mut len = 0.0;
    let mut total = 0.0;
    loop {
        let mut best = usize::MAX;
        let mut best_ratio = f64::NEG_INFINITY;
        for j in 1..n {
            if visited[j] || len + dist.get(cur, j) + dist.get(j, 0) > budget {
                continue;
            }
            let ratio = prizes[j] / dist.get(cur, j).max(1e-9);
            if ratio > best_ratio {
                best_ratio = ratio;
                best = j;
            }
        }
        if best == usize::MAX {
            return total;
        }
        len += dist.get(cur, best);
        total += prizes[best];
        visited[best] = true;
        cur = best;
    }
}
