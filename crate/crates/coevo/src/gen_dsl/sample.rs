//! Executing generator programs into instances.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gen_dsl::{BudgetRule, GeneratorNode, GeneratorProgram, PrizeRule};
use crate::instance::{Instance, InstanceKind};
use crate::rng::Seed;

/// Allowed instance sizes for [`generate`].
pub const N_RANGE: std::ops::RangeInclusive<usize> = 4..=10_000;

/// Default OP rules applied when a program carries none.
const DEFAULT_PRIZE_RULE: PrizeRule = PrizeRule::UniformPrize { scale: 1.0 };
const DEFAULT_BUDGET_FACTOR: f64 = 0.6;

/// Runs a generator program: `n` points sampled with the given seed, clamped
/// to the unit square, then min-max normalized per axis. OP instances
/// additionally get prizes and a route budget from the program's rules (or
/// the defaults above). Pure in `(program, n, seed, kind)`.
pub fn generate(
    program: &GeneratorProgram,
    n: usize,
    seed: Seed,
    kind: InstanceKind,
) -> Result<Instance> {
    program.validate()?;
    if !N_RANGE.contains(&n) {
        return Err(Error::InvalidInstance(format!(
            "instance size {n} outside [4, 10000]"
        )));
    }
    let mut coords = generate_points(program, n, seed)?;
    normalize(&mut coords);

    let (prizes, max_len) = match kind {
        InstanceKind::Tsp => (None, None),
        InstanceKind::Op => {
            let rule = program.prize_rule.as_ref().unwrap_or(&DEFAULT_PRIZE_RULE);
            let budget = program
                .budget_rule
                .clone()
                .unwrap_or(BudgetRule {
                    factor: DEFAULT_BUDGET_FACTOR,
                });
            let mut prizes = prize_vector(rule, &coords);
            prizes[0] = 0.0;
            (Some(prizes), Some(budget.factor * (n as f64).sqrt()))
        }
    };

    Instance::new(instance_id(program, n, seed, kind), kind, coords, prizes, max_len)
}

/// The raw sampling pass: points clamped to the unit square but *not*
/// normalized. Exposed so tests can check pre-normalization geometry
/// (e.g. how many points landed on a ring).
pub fn generate_points(program: &GeneratorProgram, n: usize, seed: Seed) -> Result<Vec<[f64; 2]>> {
    program.validate()?;
    let mut rng = seed.rng();
    let sampler = Sampler::compile(&program.root, n, &mut rng);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let [x, y] = sampler.sample(i, &mut rng);
        points.push([clamp01(x), clamp01(y)]);
    }
    Ok(points)
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        return 0.5;
    }
    v.clamp(0.0, 1.0)
}

/// Min-max normalization per axis; a degenerate axis collapses to 0.5.
fn normalize(points: &mut [[f64; 2]]) {
    for axis in 0..2 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points.iter() {
            lo = lo.min(p[axis]);
            hi = hi.max(p[axis]);
        }
        let range = hi - lo;
        if range < 1e-12 {
            for p in points.iter_mut() {
                p[axis] = 0.5;
            }
        } else {
            for p in points.iter_mut() {
                p[axis] = (p[axis] - lo) / range;
            }
        }
    }
}

fn prize_vector(rule: &PrizeRule, coords: &[[f64; 2]]) -> Vec<f64> {
    let n = coords.len();
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    match rule {
        PrizeRule::UniformPrize { scale } => vec![*scale; n],
        PrizeRule::DistanceFromDepotPrize { scale } => coords
            .iter()
            .map(|&c| scale * dist(c, coords[0]))
            .collect(),
        PrizeRule::ClusterBonusPrize { scale } => (0..n)
            .map(|i| {
                let neighbors = (0..n)
                    .filter(|&j| j != i && dist(coords[i], coords[j]) < 0.1)
                    .count();
                scale * neighbors as f64 / n as f64
            })
            .collect(),
    }
}

/// Content-addressed instance id: kind, size, seed, and a hash of the
/// program that produced it.
fn instance_id(program: &GeneratorProgram, n: usize, seed: Seed, kind: InstanceKind) -> String {
    let mut hasher = Sha256::new();
    hasher.update(program.to_json().as_bytes());
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{kind}-n{n}-s{seed}-{hex}")
}

/// A program compiled for one instance draw: per-instance randomness (e.g.
/// cluster centers) is resolved up front in DFS order, so per-point
/// sampling is a pure walk.
enum Sampler {
    Uniform,
    Clusters { centers: Vec<[f64; 2]>, spread: f64 },
    Ring { radius: f64, jitter: f64 },
    Spiral { turns: f64, jitter: f64 },
    Grid { jitter: f64, m: usize },
    Mix { cum: Vec<f64>, children: Vec<Sampler> },
    Transform { m: [f64; 6], child: Box<Sampler> },
    Perturb { sigma: f64, child: Box<Sampler> },
}

impl Sampler {
    fn compile(node: &GeneratorNode, n: usize, rng: &mut ChaCha8Rng) -> Sampler {
        match node {
            GeneratorNode::UniformSquare => Sampler::Uniform,
            GeneratorNode::GaussianClusters { k, spread } => {
                let centers = (0..*k)
                    .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                    .collect();
                Sampler::Clusters {
                    centers,
                    spread: *spread,
                }
            }
            GeneratorNode::Ring { radius, jitter } => Sampler::Ring {
                radius: *radius,
                jitter: *jitter,
            },
            GeneratorNode::Spiral { turns, jitter } => Sampler::Spiral {
                turns: *turns,
                jitter: *jitter,
            },
            GeneratorNode::Grid { jitter } => Sampler::Grid {
                jitter: *jitter,
                m: (n as f64).sqrt().ceil() as usize,
            },
            GeneratorNode::Mix { weights, children } => {
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                let cum = weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect();
                Sampler::Mix {
                    cum,
                    children: children
                        .iter()
                        .map(|c| Sampler::compile(c, n, rng))
                        .collect(),
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
            } => Sampler::Transform {
                m: [*a, *b, *c, *d, *tx, *ty],
                child: Box::new(Sampler::compile(child, n, rng)),
            },
            GeneratorNode::Perturb { sigma, child } => Sampler::Perturb {
                sigma: *sigma,
                child: Box::new(Sampler::compile(child, n, rng)),
            },
        }
    }

    fn sample(&self, i: usize, rng: &mut ChaCha8Rng) -> [f64; 2] {
        match self {
            Sampler::Uniform => [rng.random(), rng.random()],
            Sampler::Clusters { centers, spread } => {
                let c = centers[rng.random_range(0..centers.len())];
                [c[0] + spread * gauss(rng), c[1] + spread * gauss(rng)]
            }
            Sampler::Ring { radius, jitter } => {
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                let p = [0.5 + radius * theta.cos(), 0.5 + radius * theta.sin()];
                jittered(p, *jitter, rng)
            }
            Sampler::Spiral { turns, jitter } => {
                let t = rng.random::<f64>();
                let theta = std::f64::consts::TAU * turns * t;
                let r = 0.02 + 0.43 * t;
                let p = [0.5 + r * theta.cos(), 0.5 + r * theta.sin()];
                jittered(p, *jitter, rng)
            }
            Sampler::Grid { jitter, m } => {
                let col = i % m;
                let row = i / m;
                let p = [
                    (col as f64 + 0.5) / *m as f64,
                    (row as f64 + 0.5) / *m as f64,
                ];
                jittered(p, *jitter, rng)
            }
            Sampler::Mix { cum, children } => {
                let u = rng.random::<f64>();
                let idx = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
                children[idx].sample(i, rng)
            }
            Sampler::Transform { m, child } => {
                let [x, y] = child.sample(i, rng);
                [m[0] * x + m[1] * y + m[4], m[2] * x + m[3] * y + m[5]]
            }
            Sampler::Perturb { sigma, child } => {
                let p = child.sample(i, rng);
                jittered(p, *sigma, rng)
            }
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn jittered(p: [f64; 2], sigma: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
    if sigma == 0.0 {
        return p;
    }
    [p[0] + sigma * gauss(rng), p[1] + sigma * gauss(rng)]
}
