//! Reflection: structured comparison of a parent evaluation against its
//! child's, feeding the mutation-weight bandit offline and prompt context
//! in LLM mode.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{GapReport, Task};

/// Which population the reflected edit belongs to. Generators improve by
/// raising the gap, heuristics by lowering it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Generator,
    Heuristic,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Generator => "generator",
            Side::Heuristic => "heuristic",
        })
    }
}

/// Structured body of a reflection note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSummary {
    /// Edit class the synthesizer applied ("perturb", "replace", ...).
    pub edit_class: String,
    /// Generator families where solver performance got worse.
    pub degraded_families: Vec<String>,
    /// Generator families where solver performance improved.
    pub improved_families: Vec<String>,
    pub stats: BTreeMap<String, f64>,
    /// Suggested multiplicative update for the edit class's weight.
    pub weight_multiplier: f64,
    /// Model-written commentary (LLM mode only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
}

/// One parent-vs-child diagnostic, append-only in the evolution state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionNote {
    pub subject: String,
    pub parent: String,
    pub side: Side,
    pub generation: usize,
    /// child fitness minus parent fitness (report gaps).
    pub fitness_delta: f64,
    pub summary: ReflectionSummary,
}

/// Metadata `reflect` cannot read off the reports themselves.
#[derive(Debug, Clone, Copy)]
pub struct ReflectContext<'a> {
    pub subject: &'a str,
    pub parent: &'a str,
    pub side: Side,
    pub edit_class: &'a str,
    pub generation: usize,
}

/// Produces the free-text portion of a note in LLM mode.
pub trait ReflectionWriter {
    fn describe(&mut self, draft: &ReflectionNote) -> Result<String>;
}

const DELTA_EPS: f64 = 1e-12;

/// Compare a child's evaluation against its parent's. Both reports must
/// cover the same task, size, and seed batch. Passing a writer attaches
/// model-written text (LLM mode); `None` is the offline mode.
pub fn reflect(
    parent_eval: &GapReport,
    child_eval: &GapReport,
    ctx: &ReflectContext,
    mut writer: Option<&mut dyn ReflectionWriter>,
) -> Result<ReflectionNote> {
    if parent_eval.task != child_eval.task
        || parent_eval.n != child_eval.n
        || parent_eval.batch != child_eval.batch
        || parent_eval.base_seed != child_eval.base_seed
    {
        return Err(Error::Comparison(format!(
            "reports not comparable: parent ({}, n={}, batch={}, base={}) vs child ({}, n={}, batch={}, base={})",
            parent_eval.task,
            parent_eval.n,
            parent_eval.batch,
            parent_eval.base_seed,
            child_eval.task,
            child_eval.n,
            child_eval.batch,
            child_eval.base_seed
        )));
    }

    let fitness_delta = child_eval.gap - parent_eval.gap;

    // Per-instance hardness deltas, paired by seed position. Positive
    // delta = the solver did worse on the child's instance batch.
    let mut degraded = 0usize;
    let mut improved = 0usize;
    let mut delta_sum = 0.0;
    for (p, c) in parent_eval.per_instance.iter().zip(&child_eval.per_instance) {
        let d = instance_hardness(child_eval.task, c) - instance_hardness(parent_eval.task, p);
        delta_sum += d;
        if d > DELTA_EPS {
            degraded += 1;
        } else if d < -DELTA_EPS {
            improved += 1;
        }
    }
    let mean_delta = delta_sum / parent_eval.per_instance.len().max(1) as f64;

    // All instances in a report come from one generator program, so the
    // bucket is the child's root family.
    let family = child_eval.generator_family.clone();
    let degraded_families = if mean_delta > DELTA_EPS {
        vec![family.clone()]
    } else {
        Vec::new()
    };
    let improved_families = if mean_delta < -DELTA_EPS {
        vec![family.clone()]
    } else {
        Vec::new()
    };

    // Bandit suggestion: reward edit classes that move fitness in the
    // side's preferred direction.
    let improvement = match ctx.side {
        Side::Generator => fitness_delta,
        Side::Heuristic => -fitness_delta,
    };
    let sign = if improvement > DELTA_EPS {
        1.0
    } else if improvement < -DELTA_EPS {
        -1.0
    } else {
        0.0
    };
    let weight_multiplier = 1.0 + 0.2 * sign;

    let mut stats = BTreeMap::new();
    stats.insert("parent_gap".to_string(), parent_eval.gap);
    stats.insert("child_gap".to_string(), child_eval.gap);
    stats.insert("mean_instance_delta".to_string(), mean_delta);
    stats.insert("instances_degraded".to_string(), degraded as f64);
    stats.insert("instances_improved".to_string(), improved as f64);

    let mut note = ReflectionNote {
        subject: ctx.subject.to_string(),
        parent: ctx.parent.to_string(),
        side: ctx.side,
        generation: ctx.generation,
        fitness_delta,
        summary: ReflectionSummary {
            edit_class: ctx.edit_class.to_string(),
            degraded_families,
            improved_families,
            stats,
            weight_multiplier,
            text: None,
        },
    };
    if let Some(w) = writer.as_deref_mut() {
        note.summary.text = Some(w.describe(&note)?);
    }
    Ok(note)
}

/// Per-instance hardness in the report's gap orientation.
fn instance_hardness(task: Task, p: &crate::eval::PerInstance) -> f64 {
    match task {
        Task::TspGls | Task::TspAco => p.heur_cost / p.ref_cost - 1.0,
        Task::OpAco => 1.0 - p.heur_cost / p.ref_cost,
    }
}

/// Clamp range for bandit-updated mutation weights.
pub const WEIGHT_RANGE: std::ops::RangeInclusive<f64> = 0.25..=4.0;

/// Apply a suggested multiplier to one weight, clamped to [`WEIGHT_RANGE`].
pub fn apply_weight_update(weight: &mut f64, multiplier: f64) {
    *weight = (*weight * multiplier).clamp(*WEIGHT_RANGE.start(), *WEIGHT_RANGE.end());
}
