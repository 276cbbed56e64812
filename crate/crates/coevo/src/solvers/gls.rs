//! Guided local search for the TSP. A heuristic program supplies the
//! guide matrix that decides which edges get penalized; the augmented
//! objective is `dist + lambda * penalty` and the reported costs are
//! always raw distances.

use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::heur_dsl::{interpret, HeuristicProgram, Target};
use crate::instance::{distance_matrix, Instance, InstanceKind, SquareMatrix};
use crate::solution::{tour_cost, Tour};
use crate::solvers::{nearest_neighbor, neighbor_lists, GlsParams, SolveBest, SolveResult};

const EPS_IMPROVE: f64 = 1e-12;
const EPS_STALL: f64 = 1e-9;
const NEIGHBOR_K: usize = 16;

/// Guided local search: nearest-neighbor start, first-improvement 2-opt
/// and Or-opt (segments of 1..=3) over the augmented objective with
/// don't-look bits and 16-nearest-neighbor candidate lists, classic GLS
/// edge penalties, and a penalty-free full 2-opt polish of the best tour.
pub fn solve_gls(
    instance: &Instance,
    guide_program: &HeuristicProgram,
    params: &GlsParams,
) -> Result<SolveResult> {
    if instance.kind != InstanceKind::Tsp {
        return Err(Error::Solver("solve_gls expects a tsp instance".into()));
    }
    if guide_program.target != Target::GlsGuide {
        return Err(Error::Solver(format!(
            "solve_gls needs a gls_guide program, got {}",
            guide_program.target
        )));
    }
    params.validate()?;

    let started = Instant::now();
    let n = instance.n();
    let start = (params.seed.0 % n as u64) as usize;
    let nn = nearest_neighbor(instance, start)?;
    let mut evaluations: u64 = 1;
    let mut trace = vec![nn.length];

    if params.budget_ls_iters == 0 || n <= 3 {
        return Ok(SolveResult {
            cost_or_prize: nn.length,
            best: SolveBest::Tour(nn),
            trace,
            wall_ms: started.elapsed().as_millis() as u64,
            evaluations,
        });
    }

    let guide = interpret(guide_program, instance)?;
    let mut search = Search {
        n,
        dist: distance_matrix(instance),
        neighbors: neighbor_lists(instance, NEIGHBOR_K),
        pen: vec![0.0; n * n],
        lambda: 0.0,
        pos: {
            let mut pos = vec![0usize; n];
            for (i, &node) in nn.order.iter().enumerate() {
                pos[node] = i;
            }
            pos
        },
        tour: nn.order.clone(),
        queue: (0..n).collect(),
        in_queue: vec![true; n],
        budget: params.budget_ls_iters,
        budget_used: 0,
        evaluations: 0,
    };

    let mut best_order = nn.order;
    let mut best_raw = nn.length;
    let mut stall = 0u32;
    let mut lambda_pinned = false;

    'outer: loop {
        // Descend to a local optimum of the augmented objective.
        while let Some(a) = search.queue.pop_front() {
            search.in_queue[a] = false;
            while let Some(mv) = search.find_move(a) {
                search.apply(mv);
                if search.budget_used >= search.budget {
                    break 'outer;
                }
            }
        }

        let raw = tour_cost(instance, &search.tour)?;
        evaluations += 1;
        if !lambda_pinned {
            search.lambda = params.lambda_alpha * raw / n as f64;
            lambda_pinned = true;
        }
        if raw < best_raw - EPS_STALL {
            best_raw = raw;
            best_order.copy_from_slice(&search.tour);
            stall = 0;
        } else {
            stall += 1;
        }
        trace.push(best_raw);
        if stall >= params.stall_cycles || search.budget_used >= search.budget {
            break;
        }

        // Penalize the tour edge with the highest utility guide/(1+pen);
        // ties go to the lexicographically smallest (u, v) pair.
        let mut best_edge = (usize::MAX, usize::MAX);
        let mut best_util = f64::NEG_INFINITY;
        for i in 0..n {
            let a = search.tour[i];
            let b = search.tour[(i + 1) % n];
            let (u, v) = (a.min(b), a.max(b));
            let util = guide.get(u, v) / (1.0 + search.pen[u * n + v]);
            if util > best_util || (util == best_util && (u, v) < best_edge) {
                best_util = util;
                best_edge = (u, v);
            }
        }
        let (u, v) = best_edge;
        search.pen[u * n + v] += 1.0;
        search.pen[v * n + u] += 1.0;
        search.activate(u);
        search.activate(v);
    }

    // Penalty-free polish: plain first-improvement 2-opt on raw distances
    // until the best tour is 2-opt local-optimal.
    two_opt_full(&search.dist, &mut best_order, &mut evaluations);
    evaluations += search.evaluations;

    let best = Tour::new(instance, best_order)?;
    if best.length < *trace.last().expect("trace is never empty") {
        trace.push(best.length);
    }
    Ok(SolveResult {
        cost_or_prize: best.length,
        best: SolveBest::Tour(best),
        trace,
        wall_ms: started.elapsed().as_millis() as u64,
        evaluations,
    })
}

enum Move {
    /// Reverse the tour segment running forward from node `from` to node
    /// `to`, then reactivate `touch`.
    Reverse {
        from: usize,
        to: usize,
        touch: [usize; 4],
    },
    /// Remove the `len`-node segment starting at node `start` and splice
    /// it back in right after node `after`.
    Relocate {
        start: usize,
        len: usize,
        after: usize,
        reversed: bool,
        touch: [usize; 6],
    },
}

struct Search {
    n: usize,
    dist: SquareMatrix,
    neighbors: Vec<Vec<usize>>,
    pen: Vec<f64>,
    lambda: f64,
    tour: Vec<usize>,
    pos: Vec<usize>,
    queue: VecDeque<usize>,
    in_queue: Vec<bool>,
    budget: u64,
    budget_used: u64,
    evaluations: u64,
}

impl Search {
    #[inline]
    fn aug(&self, a: usize, b: usize) -> f64 {
        self.dist.get(a, b) + self.lambda * self.pen[a * self.n + b]
    }

    #[inline]
    fn succ(&self, a: usize) -> usize {
        self.tour[(self.pos[a] + 1) % self.n]
    }

    #[inline]
    fn pred(&self, a: usize) -> usize {
        self.tour[(self.pos[a] + self.n - 1) % self.n]
    }

    fn activate(&mut self, a: usize) {
        if !self.in_queue[a] {
            self.in_queue[a] = true;
            self.queue.push_back(a);
        }
    }

    /// First improving move out of node `a`, scanning 2-opt exchanges on
    /// both sides and Or-opt relocations of the 1..=3 segment starting at
    /// `a`, all restricted to `a`'s candidate neighbors.
    fn find_move(&mut self, a: usize) -> Option<Move> {
        let sa = self.succ(a);
        let pa = self.pred(a);
        for idx in 0..self.neighbors[a].len() {
            let b = self.neighbors[a][idx];
            // Replace edges (a, succ a) and (b, succ b) by (a, b) and
            // (succ a, succ b): reverse succ(a)..b.
            if b != sa && b != a {
                let sb = self.succ(b);
                self.evaluations += 1;
                let delta =
                    self.aug(a, b) + self.aug(sa, sb) - self.aug(a, sa) - self.aug(b, sb);
                if delta < -EPS_IMPROVE {
                    return Some(Move::Reverse {
                        from: sa,
                        to: b,
                        touch: [a, sa, b, sb],
                    });
                }
            }
            // Replace edges (pred a, a) and (pred b, b) by (a, b) and
            // (pred a, pred b): reverse a..pred(b).
            if b != pa && b != a {
                let pb = self.pred(b);
                self.evaluations += 1;
                let delta =
                    self.aug(pa, pb) + self.aug(a, b) - self.aug(pa, a) - self.aug(pb, b);
                if delta < -EPS_IMPROVE {
                    return Some(Move::Reverse {
                        from: a,
                        to: pb,
                        touch: [pa, a, pb, b],
                    });
                }
            }
        }

        // Or-opt: pull out the segment [a, ...] and reinsert it next to a
        // candidate neighbor, forward or reversed.
        let mut seg = [a, 0, 0];
        for len in 1..=3usize {
            if self.n < len + 2 {
                break;
            }
            if len > 1 {
                seg[len - 1] = self.succ(seg[len - 2]);
            }
            let s0 = seg[0];
            let sl = seg[len - 1];
            let p = self.pred(s0);
            let q = self.succ(sl);
            let removal = self.aug(p, s0) + self.aug(sl, q) - self.aug(p, q);
            for idx in 0..self.neighbors[a].len() {
                let c = self.neighbors[a][idx];
                if c == p || seg[..len].contains(&c) {
                    continue;
                }
                let sc = self.succ(c);
                self.evaluations += 2;
                let base = self.aug(c, sc);
                let fwd = self.aug(c, s0) + self.aug(sl, sc) - base - removal;
                if fwd < -EPS_IMPROVE {
                    return Some(Move::Relocate {
                        start: s0,
                        len,
                        after: c,
                        reversed: false,
                        touch: [p, q, c, sc, s0, sl],
                    });
                }
                let rev = self.aug(c, sl) + self.aug(s0, sc) - base - removal;
                if rev < -EPS_IMPROVE {
                    return Some(Move::Relocate {
                        start: s0,
                        len,
                        after: c,
                        reversed: true,
                        touch: [p, q, c, sc, s0, sl],
                    });
                }
            }
        }
        None
    }

    fn apply(&mut self, mv: Move) {
        self.budget_used += 1;
        match mv {
            Move::Reverse { from, to, touch } => {
                self.reverse_between(from, to);
                for t in touch {
                    self.activate(t);
                }
            }
            Move::Relocate {
                start,
                len,
                after,
                reversed,
                touch,
            } => {
                self.relocate(start, len, after, reversed);
                for t in touch {
                    self.activate(t);
                }
            }
        }
    }

    /// Reverse the forward segment from node `x` to node `y`. When the
    /// complement arc is shorter, reverse that one instead; the resulting
    /// cycle is the same.
    fn reverse_between(&mut self, x: usize, y: usize) {
        let n = self.n;
        let mut i = self.pos[x];
        let mut j = self.pos[y];
        let mut len = (j + n - i) % n + 1;
        if len * 2 > n {
            let i2 = (j + 1) % n;
            let j2 = (i + n - 1) % n;
            i = i2;
            j = j2;
            len = n - len;
        }
        for _ in 0..len / 2 {
            self.tour.swap(i, j);
            self.pos[self.tour[i]] = i;
            self.pos[self.tour[j]] = j;
            i = (i + 1) % n;
            j = (j + n - 1) % n;
        }
    }

    fn relocate(&mut self, start: usize, len: usize, after: usize, reversed: bool) {
        let n = self.n;
        let p0 = self.pos[start];
        let seg: Vec<usize> = (0..len).map(|t| self.tour[(p0 + t) % n]).collect();
        let mut rebuilt = Vec::with_capacity(n);
        let mut idx = (p0 + len) % n;
        for _ in 0..n - len {
            let node = self.tour[idx];
            rebuilt.push(node);
            if node == after {
                if reversed {
                    rebuilt.extend(seg.iter().rev());
                } else {
                    rebuilt.extend_from_slice(&seg);
                }
            }
            idx = (idx + 1) % n;
        }
        self.tour = rebuilt;
        for (i, &node) in self.tour.iter().enumerate() {
            self.pos[node] = i;
        }
    }
}

/// Full first-improvement 2-opt over raw distances, restarted until no
/// improving exchange remains.
fn two_opt_full(dist: &SquareMatrix, order: &mut [usize], evaluations: &mut u64) {
    let n = order.len();
    if n < 4 {
        return;
    }
    'sweep: loop {
        for i in 0..n - 1 {
            let a = order[i];
            let b = order[i + 1];
            let d_ab = dist.get(a, b);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let c = order[j];
                let e = order[(j + 1) % n];
                *evaluations += 1;
                let delta = dist.get(a, c) + dist.get(b, e) - d_ab - dist.get(c, e);
                if delta < -EPS_IMPROVE {
                    order[i + 1..=j].reverse();
                    continue 'sweep;
                }
            }
        }
        return;
    }
}
