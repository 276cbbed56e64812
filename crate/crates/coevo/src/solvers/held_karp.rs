//! Exact TSP by Held-Karp bitmask dynamic programming. Feasible up to
//! n = 18 (about 18 MB of DP table); larger inputs are rejected.

use crate::error::{Error, Result};
use crate::instance::{distance_matrix, Instance, InstanceKind};
use crate::solution::Tour;

pub const HELD_KARP_MAX_N: usize = 18;

/// Optimal tour, anchored at node 0. Ties in the DP resolve to the lowest
/// predecessor index, so the returned order is deterministic.
pub fn held_karp(instance: &Instance) -> Result<Tour> {
    if instance.kind != InstanceKind::Tsp {
        return Err(Error::Solver("held_karp expects a tsp instance".into()));
    }
    let n = instance.n();
    if n > HELD_KARP_MAX_N {
        return Err(Error::Solver(format!(
            "held_karp limited to n <= {HELD_KARP_MAX_N}, got n = {n}"
        )));
    }
    if n == 2 {
        return Tour::new(instance, vec![0, 1]);
    }

    let dist = distance_matrix(instance);
    let m = n - 1; // nodes 1..n tracked in the bitmask
    let full: usize = 1 << m;
    // dp[mask][j]: cheapest path 0 -> ... -> (j+1) visiting exactly the
    // masked nodes, j in mask.
    let mut dp = vec![f64::INFINITY; full * m];
    let mut parent = vec![u8::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = dist.get(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * m + j];
            if !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next_mask = mask | (1 << k);
                let cand = cur + dist.get(j + 1, k + 1);
                if cand < dp[next_mask * m + k] {
                    dp[next_mask * m + k] = cand;
                    parent[next_mask * m + k] = j as u8;
                }
            }
        }
    }

    let last_mask = full - 1;
    let mut best_end = 0;
    let mut best_cost = f64::INFINITY;
    for j in 0..m {
        let cand = dp[last_mask * m + j] + dist.get(j + 1, 0);
        if cand < best_cost {
            best_cost = cand;
            best_end = j;
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut mask = last_mask;
    let mut j = best_end;
    loop {
        order.push(j + 1);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if mask == 0 {
            break;
        }
        j = p as usize;
    }
    order.push(0);
    order.reverse();
    Tour::new(instance, order)
}
