//! Problem instances and distance matrices.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// First 12 hex digits of the SHA-256 of `text`; the content-address used
/// in instance and program ids.
pub(crate) fn short_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Which routing problem an instance encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    /// Travelling salesman: visit every node once, minimize closed-tour length.
    Tsp,
    /// Orienteering: start and end at the depot (node 0), maximize collected
    /// prize subject to a route-length budget.
    Op,
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InstanceKind::Tsp => write!(f, "tsp"),
            InstanceKind::Op => write!(f, "op"),
        }
    }
}

/// A routing instance on the unit square.
///
/// Coordinates always live in `[0, 1]^2`. Orienteering instances carry a
/// prize per node (`prizes[0] == 0` for the depot) and a route-length budget
/// `max_len`; TSP instances carry neither. The depot is node 0 by
/// convention and is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub id: String,
    pub kind: InstanceKind,
    pub coords: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prizes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_len: Option<f64>,
}

impl Instance {
    /// Builds and validates an instance.
    pub fn new(
        id: impl Into<String>,
        kind: InstanceKind,
        coords: Vec<[f64; 2]>,
        prizes: Option<Vec<f64>>,
        max_len: Option<f64>,
    ) -> Result<Self> {
        let inst = Instance {
            id: id.into(),
            kind,
            coords,
            prizes,
            max_len,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// The orienteering depot. Always node 0.
    pub fn depot(&self) -> usize {
        0
    }

    /// Checks every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        let n = self.coords.len();
        let min_n = match self.kind {
            InstanceKind::Tsp => 2,
            InstanceKind::Op => 3,
        };
        if n < min_n {
            return Err(Error::InvalidInstance(format!(
                "{} instance needs at least {min_n} nodes, got {n}",
                self.kind
            )));
        }
        for (i, c) in self.coords.iter().enumerate() {
            if !c.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInstance(format!(
                    "coords[{i}] = ({}, {}) outside the unit square",
                    c[0], c[1]
                )));
            }
        }
        match self.kind {
            InstanceKind::Tsp => {
                if self.prizes.is_some() || self.max_len.is_some() {
                    return Err(Error::InvalidInstance(
                        "tsp instance must not carry prizes or max_len".into(),
                    ));
                }
            }
            InstanceKind::Op => {
                let prizes = self.prizes.as_ref().ok_or_else(|| {
                    Error::InvalidInstance("op instance missing prizes".into())
                })?;
                if prizes.len() != n {
                    return Err(Error::InvalidInstance(format!(
                        "prizes has {} entries for {n} nodes",
                        prizes.len()
                    )));
                }
                if prizes[0] != 0.0 {
                    return Err(Error::InvalidInstance(format!(
                        "depot prize must be 0, got {}",
                        prizes[0]
                    )));
                }
                if let Some((i, p)) = prizes
                    .iter()
                    .enumerate()
                    .find(|(_, p)| !p.is_finite() || **p < 0.0)
                {
                    return Err(Error::InvalidInstance(format!(
                        "prizes[{i}] = {p} is not a finite non-negative value"
                    )));
                }
                match self.max_len {
                    Some(b) if b.is_finite() && b > 0.0 => {}
                    Some(b) => {
                        return Err(Error::InvalidInstance(format!(
                            "max_len = {b} must be finite and positive"
                        )))
                    }
                    None => {
                        return Err(Error::InvalidInstance(
                            "op instance missing max_len".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    /// Euclidean distance between nodes `i` and `j`.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let a = self.coords[i];
        let b = self.coords[j];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Serializes to JSON (pretty, stable field order).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization is infallible")
    }

    /// Parses and validates an instance from JSON. Unknown fields are
    /// rejected by the deserializer.
    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// Dense row-major `n x n` matrix of `f64`. Used for distances, pheromones,
/// and heuristic-program outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn filled(n: usize, value: f64) -> Self {
        SquareMatrix {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Full pairwise Euclidean distance matrix of an instance. Symmetric with a
/// zero diagonal by construction: each unordered pair is computed once and
/// mirrored.
pub fn distance_matrix(instance: &Instance) -> SquareMatrix {
    let n = instance.n();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = instance.dist(i, j);
            m.set(i, j, d);
            m.set(j, i, d);
        }
    }
    m
}
