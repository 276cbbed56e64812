//! Tours, orienteering routes, and their costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceKind};

/// A closed TSP tour: a permutation of all nodes plus its Euclidean length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<usize>,
    pub length: f64,
}

impl Tour {
    /// Validates `order` against the instance and computes the length via
    /// [`tour_cost`].
    pub fn new(instance: &Instance, order: Vec<usize>) -> Result<Self> {
        let length = tour_cost(instance, &order)?;
        Ok(Tour { order, length })
    }
}

/// An orienteering route: starts and ends at depot 0, visits each other
/// node at most once, and stays within the instance budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRoute {
    /// Node sequence, beginning and ending with the depot (`[0, ..., 0]`).
    /// The degenerate stay-home route is `[0, 0]`.
    pub order: Vec<usize>,
    pub length: f64,
    pub collected_prize: f64,
}

impl OpRoute {
    /// Validates the route shape and feasibility, computing length and
    /// collected prize from the instance.
    pub fn new(instance: &Instance, order: Vec<usize>) -> Result<Self> {
        if instance.kind != InstanceKind::Op {
            return Err(Error::InvalidSolution(
                "op route built against a non-op instance".into(),
            ));
        }
        let n = instance.n();
        if order.len() < 2 || order[0] != 0 || *order.last().unwrap() != 0 {
            return Err(Error::InvalidSolution(
                "route must begin and end at depot 0".into(),
            ));
        }
        let interior = &order[1..order.len() - 1];
        let mut seen = vec![false; n];
        for &node in interior {
            if node >= n {
                return Err(Error::InvalidSolution(format!(
                    "route node {node} out of range for n = {n}"
                )));
            }
            if node == 0 || seen[node] {
                return Err(Error::InvalidSolution(format!(
                    "route visits node {node} more than once"
                )));
            }
            seen[node] = true;
        }
        let mut length = 0.0;
        for w in order.windows(2) {
            length += instance.dist(w[0], w[1]);
        }
        let budget = instance.max_len.expect("op instance has max_len");
        if length > budget + 1e-9 {
            return Err(Error::InvalidSolution(format!(
                "route length {length} exceeds budget {budget}"
            )));
        }
        let prizes = instance.prizes.as_ref().expect("op instance has prizes");
        let collected_prize = interior.iter().map(|&i| prizes[i]).sum();
        Ok(OpRoute {
            order,
            length,
            collected_prize,
        })
    }
}

/// Closed-tour Euclidean length of a permutation.
///
/// The tour's edges are summed in a canonical order (edges normalized to
/// `(min, max)` and sorted), so rotating or reversing the permutation gives
/// the bit-identical result, not merely an approximately equal one.
pub fn tour_cost(instance: &Instance, order: &[usize]) -> Result<f64> {
    if instance.kind != InstanceKind::Tsp {
        return Err(Error::InvalidSolution(
            "tour cost requested for a non-tsp instance".into(),
        ));
    }
    let n = instance.n();
    if order.len() != n {
        return Err(Error::InvalidSolution(format!(
            "order has {} nodes, instance has {n}",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &node in order {
        if node >= n || seen[node] {
            return Err(Error::InvalidSolution(format!(
                "order is not a permutation of 0..{n}"
            )));
        }
        seen[node] = true;
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let a = order[i];
        let b = order[(i + 1) % n];
        edges.push((a.min(b), a.max(b)));
    }
    edges.sort_unstable();
    Ok(edges.iter().map(|&(a, b)| instance.dist(a, b)).sum())
}
