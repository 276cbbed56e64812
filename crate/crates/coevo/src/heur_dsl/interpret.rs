//! Evaluating heuristic programs into guidance matrices.

use crate::error::{Error, Result};
use crate::heur_dsl::{HeuristicProgram, MatrixExpr, Target};
use crate::instance::{distance_matrix, Instance, InstanceKind, SquareMatrix};

/// Positivity floor for ACO visibility matrices and the SafeDiv/LogSafe
/// epsilon.
pub const EPS: f64 = 1e-9;

/// Evaluates a heuristic program on an instance.
///
/// Any NaN or infinity left by the expression is replaced with 0, then the
/// target's post-processing runs: GLS guides are symmetrized; ACO
/// visibility matrices are shifted so the smallest off-diagonal entry is at
/// least 1e-9 and the diagonal is pinned to 1e-9. Pure in
/// `(program, instance)`.
pub fn interpret(program: &HeuristicProgram, instance: &Instance) -> Result<SquareMatrix> {
    program.validate()?;
    let compatible = match program.target {
        Target::GlsGuide | Target::AcoEtaTsp => instance.kind == InstanceKind::Tsp,
        Target::AcoEtaOp => instance.kind == InstanceKind::Op,
    };
    if !compatible {
        return Err(Error::Solver(format!(
            "heuristic target {} cannot guide a {} instance",
            program.target, instance.kind
        )));
    }

    let dist = distance_matrix(instance);
    let mut m = eval(&program.root, &dist, instance);

    for v in m.as_mut_slice() {
        if !v.is_finite() {
            *v = 0.0;
        }
    }

    match program.target {
        Target::GlsGuide => symmetrize(&m),
        Target::AcoEtaTsp | Target::AcoEtaOp => {
            let n = m.n();
            let mut min_off = f64::INFINITY;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        min_off = min_off.min(m.get(i, j));
                    }
                }
            }
            if min_off < EPS {
                let shift = EPS - min_off;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            m.set(i, j, m.get(i, j) + shift);
                        }
                    }
                }
            }
            for i in 0..n {
                m.set(i, i, EPS);
            }
            Ok(m)
        }
    }
}

fn symmetrize(m: &SquareMatrix) -> Result<SquareMatrix> {
    let n = m.n();
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, 0.5 * (m.get(i, j) + m.get(j, i)));
        }
    }
    Ok(out)
}

fn eval(expr: &MatrixExpr, dist: &SquareMatrix, instance: &Instance) -> SquareMatrix {
    let n = dist.n();
    match expr {
        MatrixExpr::Dist => dist.clone(),
        MatrixExpr::PrizeOuter => {
            let prizes = instance
                .prizes
                .as_deref()
                .expect("validated op instance has prizes");
            let mut m = SquareMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, prizes[j]);
                }
            }
            m
        }
        MatrixExpr::Const { value } => SquareMatrix::filled(n, *value),
        MatrixExpr::RowMean { arg } => row_stat(&eval(arg, dist, instance), |row| {
            row.iter().sum::<f64>() / row.len() as f64
        }),
        MatrixExpr::RowMin { arg } => row_stat(&eval(arg, dist, instance), |row| {
            row.iter().copied().fold(f64::INFINITY, f64::min)
        }),
        MatrixExpr::RowMax { arg } => row_stat(&eval(arg, dist, instance), |row| {
            row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }),
        MatrixExpr::RankRow { arg } => {
            let m = eval(arg, dist, instance);
            let mut out = SquareMatrix::zeros(n);
            let mut idx: Vec<usize> = Vec::with_capacity(n);
            for i in 0..n {
                let row = m.row(i);
                idx.clear();
                idx.extend(0..n);
                idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
                for (rank, &col) in idx.iter().enumerate() {
                    out.set(i, col, rank as f64);
                }
            }
            out
        }
        MatrixExpr::Add { lhs, rhs } => zip(lhs, rhs, dist, instance, |a, b| a + b),
        MatrixExpr::Sub { lhs, rhs } => zip(lhs, rhs, dist, instance, |a, b| a - b),
        MatrixExpr::Mul { lhs, rhs } => zip(lhs, rhs, dist, instance, |a, b| a * b),
        MatrixExpr::SafeDiv { lhs, rhs } => zip(lhs, rhs, dist, instance, |a, b| {
            let denom = if b.abs() < EPS {
                if b.is_sign_negative() { -EPS } else { EPS }
            } else {
                b
            };
            a / denom
        }),
        MatrixExpr::Min { lhs, rhs } => zip(lhs, rhs, dist, instance, f64::min),
        MatrixExpr::Max { lhs, rhs } => zip(lhs, rhs, dist, instance, f64::max),
        MatrixExpr::Neg { arg } => map(arg, dist, instance, |v| -v),
        MatrixExpr::Abs { arg } => map(arg, dist, instance, f64::abs),
        MatrixExpr::Sqrt { arg } => map(arg, dist, instance, f64::sqrt),
        MatrixExpr::ExpClamped { arg } => {
            map(arg, dist, instance, |v| v.clamp(-30.0, 30.0).exp())
        }
        MatrixExpr::LogSafe { arg } => map(arg, dist, instance, |v| (EPS + v.abs()).ln()),
        MatrixExpr::Normalize01 { arg } => {
            let m = eval(arg, dist, instance);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let v = m.get(i, j);
                        if v.is_finite() {
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                }
            }
            let range = hi - lo;
            if !(range.is_finite() && range > 1e-12) {
                return SquareMatrix::zeros(n);
            }
            let mut out = m;
            for v in out.as_mut_slice() {
                *v = (*v - lo) / range;
            }
            out
        }
        MatrixExpr::Symmetrize { arg } => {
            let m = eval(arg, dist, instance);
            symmetrize(&m).expect("symmetrize is infallible")
        }
    }
}

fn row_stat(m: &SquareMatrix, stat: impl Fn(&[f64]) -> f64) -> SquareMatrix {
    let n = m.n();
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        let v = stat(m.row(i));
        for j in 0..n {
            out.set(i, j, v);
        }
    }
    out
}

fn map(
    arg: &MatrixExpr,
    dist: &SquareMatrix,
    instance: &Instance,
    f: impl Fn(f64) -> f64,
) -> SquareMatrix {
    let mut m = eval(arg, dist, instance);
    for v in m.as_mut_slice() {
        *v = f(*v);
    }
    m
}

fn zip(
    lhs: &MatrixExpr,
    rhs: &MatrixExpr,
    dist: &SquareMatrix,
    instance: &Instance,
    f: impl Fn(f64, f64) -> f64,
) -> SquareMatrix {
    let mut a = eval(lhs, dist, instance);
    let b = eval(rhs, dist, instance);
    for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *x = f(*x, *y);
    }
    a
}
