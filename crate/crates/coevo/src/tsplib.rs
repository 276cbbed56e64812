//! TSPLIB EUC_2D ingestion: parse benchmark files, normalize coordinates
//! into the unit square for the solvers, and map tours back to
//! original-unit costs with the TSPLIB nint rounding convention.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceKind};

/// A parsed TSPLIB file, coordinates kept in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct TsplibFile {
    pub name: String,
    pub dimension: usize,
    pub edge_weight_type: String,
    pub coords: Vec<[f64; 2]>,
    /// Best-known tour cost, filled from a sidecar CSV when supplied.
    pub best_known: Option<f64>,
}

/// How original-unit costs are computed. TSPLIB EUC_2D defines integer
/// distances nint(d) = floor(d + 0.5); real-valued reporting is exposed
/// for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostUnits {
    #[default]
    RoundedNint,
    Real,
}

fn parse_err(file: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        file: file.display().to_string(),
        line,
        reason: reason.into(),
    }
}

/// Parse an EUC_2D TSPLIB file. Header keys may use `KEY: value` or
/// `KEY : value`; the node section must list nodes as `index x y` with
/// 1-based contiguous indices.
pub fn parse_tsplib(path: &Path) -> Result<TsplibFile> {
    let text = fs::read_to_string(path)?;
    let mut name = String::new();
    let mut dimension: Option<usize> = None;
    let mut edge_weight_type = String::new();
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut in_nodes = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line == "EOF" {
            continue;
        }
        if !in_nodes {
            if line == "NODE_COORD_SECTION" {
                let dim = dimension
                    .ok_or_else(|| parse_err(path, lineno, "NODE_COORD_SECTION before DIMENSION"))?;
                coords.reserve(dim);
                in_nodes = true;
                continue;
            }
            let (key, value) = match line.split_once(':') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (line, ""),
            };
            match key {
                "NAME" => name = value.to_string(),
                "DIMENSION" => {
                    dimension = Some(value.parse().map_err(|_| {
                        parse_err(path, lineno, format!("bad DIMENSION {value:?}"))
                    })?);
                }
                "EDGE_WEIGHT_TYPE" => {
                    if value != "EUC_2D" {
                        return Err(parse_err(
                            path,
                            lineno,
                            format!("unsupported EDGE_WEIGHT_TYPE {value:?}; only EUC_2D is supported"),
                        ));
                    }
                    edge_weight_type = value.to_string();
                }
                // TYPE, COMMENT, and any other headers are accepted and ignored.
                _ => {}
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let index: usize = parts
            .next()
            .ok_or_else(|| parse_err(path, lineno, "empty node line"))?
            .parse()
            .map_err(|_| parse_err(path, lineno, "node index is not an integer"))?;
        if index != coords.len() + 1 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected node index {}, found {index}", coords.len() + 1),
            ));
        }
        let mut coord = [0.0f64; 2];
        for c in &mut coord {
            *c = parts
                .next()
                .ok_or_else(|| parse_err(path, lineno, "node line needs `index x y`"))?
                .parse()
                .map_err(|_| parse_err(path, lineno, "coordinate is not a number"))?;
        }
        if parts.next().is_some() {
            return Err(parse_err(path, lineno, "trailing tokens after `index x y`"));
        }
        coords.push(coord);
    }

    let dimension =
        dimension.ok_or_else(|| parse_err(path, text.lines().count() + 1, "missing DIMENSION"))?;
    if edge_weight_type.is_empty() {
        return Err(parse_err(
            path,
            text.lines().count() + 1,
            "missing EDGE_WEIGHT_TYPE",
        ));
    }
    if coords.len() != dimension {
        return Err(parse_err(
            path,
            text.lines().count() + 1,
            format!("DIMENSION says {dimension} nodes, file has {}", coords.len()),
        ));
    }
    Ok(TsplibFile {
        name,
        dimension,
        edge_weight_type,
        coords,
        best_known: None,
    })
}

/// Parse a TSPLIB file and look up its best-known cost in a sidecar CSV
/// of `name,cost` rows.
pub fn parse_tsplib_with_sidecar(path: &Path, sidecar: &Path) -> Result<TsplibFile> {
    let mut file = parse_tsplib(path)?;
    file.best_known = lookup_best_known(sidecar, &file.name)?;
    Ok(file)
}

/// Find `name` in a `name,cost` sidecar CSV (a `name,...` header row is
/// allowed). Ok(None) when the instance is not listed.
pub fn lookup_best_known(sidecar: &Path, name: &str) -> Result<Option<f64>> {
    let text = fs::read_to_string(sidecar)?;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (row_name, cost) = line
            .split_once(',')
            .ok_or_else(|| parse_err(sidecar, lineno, "expected `name,cost`"))?;
        let row_name = row_name.trim();
        if lineno == 1 && row_name.eq_ignore_ascii_case("name") {
            continue;
        }
        if row_name == name {
            let cost: f64 = cost.trim().parse().map_err(|_| {
                parse_err(sidecar, lineno, format!("bad cost for {row_name:?}"))
            })?;
            if !cost.is_finite() || cost <= 0.0 {
                return Err(parse_err(
                    sidecar,
                    lineno,
                    "best-known cost must be finite and positive",
                ));
            }
            return Ok(Some(cost));
        }
    }
    Ok(None)
}

/// Render back to TSPLIB text; `parse_tsplib` of the result reproduces
/// the same name, dimension, and coordinates.
pub fn render_tsplib(file: &TsplibFile) -> String {
    let mut out = String::new();
    out.push_str(&format!("NAME : {}\n", file.name));
    out.push_str("TYPE : TSP\n");
    out.push_str(&format!("DIMENSION : {}\n", file.dimension));
    out.push_str(&format!("EDGE_WEIGHT_TYPE : {}\n", file.edge_weight_type));
    out.push_str("NODE_COORD_SECTION\n");
    for (i, c) in file.coords.iter().enumerate() {
        out.push_str(&format!("{} {} {}\n", i + 1, c[0], c[1]));
    }
    out.push_str("EOF\n");
    out
}

impl TsplibFile {
    /// Solver-ready instance: coordinates shifted and uniformly scaled
    /// into [0,1]² (one scale for both axes, so geometry is preserved).
    /// Costs in original units go through [`original_cost`](Self::original_cost),
    /// never through the normalized coordinates.
    pub fn to_instance(&self) -> Result<Instance> {
        if self.coords.is_empty() {
            return Err(Error::InvalidInstance("TSPLIB file has no nodes".into()));
        }
        let (min_x, max_x) = min_max(self.coords.iter().map(|c| c[0]));
        let (min_y, max_y) = min_max(self.coords.iter().map(|c| c[1]));
        let scale = (max_x - min_x).max(max_y - min_y);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let coords = self
            .coords
            .iter()
            .map(|c| [(c[0] - min_x) / scale, (c[1] - min_y) / scale])
            .collect();
        Instance::new(self.name.clone(), InstanceKind::Tsp, coords, None, None)
    }

    /// Cost of a tour (a permutation of 0..dimension) in original units.
    pub fn original_cost(&self, order: &[usize], units: CostUnits) -> Result<f64> {
        if order.len() != self.dimension {
            return Err(Error::InvalidSolution(format!(
                "tour has {} nodes, instance has {}",
                order.len(),
                self.dimension
            )));
        }
        let mut seen = vec![false; self.dimension];
        for &node in order {
            if node >= self.dimension || seen[node] {
                return Err(Error::InvalidSolution(format!(
                    "tour is not a permutation: node {node}"
                )));
            }
            seen[node] = true;
        }
        let mut total = 0.0;
        for i in 0..order.len() {
            let a = self.coords[order[i]];
            let b = self.coords[order[(i + 1) % order.len()]];
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            total += match units {
                CostUnits::RoundedNint => (d + 0.5).floor(),
                CostUnits::Real => d,
            };
        }
        Ok(total)
    }

    /// Relative gap of `cost` over the sidecar best-known, when present.
    pub fn gap_vs_best_known(&self, cost: f64) -> Option<f64> {
        self.best_known.map(|best| cost / best - 1.0)
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Synthetic rows-by-cols integer lattice in TSPLIB shape, for harness
/// tests at benchmark sizes without shipping benchmark data.
pub fn grid_tsplib(name: &str, rows: usize, cols: usize, spacing: f64) -> TsplibFile {
    let mut coords = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            coords.push([c as f64 * spacing, r as f64 * spacing]);
        }
    }
    TsplibFile {
        name: name.to_string(),
        dimension: coords.len(),
        edge_weight_type: "EUC_2D".to_string(),
        coords,
        best_known: None,
    }
}
