//! The adversarial co-evolution engine: alternating best-response between
//! a generator population maximizing the hardness gap and a heuristic
//! population minimizing it, with elitist selection, reflection notes, and
//! a resumable on-disk run log.

mod reflect;

pub use reflect::{
    apply_weight_update, reflect, ReflectContext, ReflectionNote, ReflectionSummary,
    ReflectionWriter, Side, WEIGHT_RANGE,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    evaluate_hardness_cached, GapReport, ReferenceCache, ReferencePolicy, SolverBudget, Task,
};
use crate::gen_dsl::{
    self, canonical_uniform, mutate_generator_traced, BudgetRule, GeneratorProgram, PrizeRule,
};
use crate::heur_dsl::{self, baseline_heuristic, mutate_heuristic_traced, HeuristicProgram};
use crate::rng::{channel, derive_seed, Seed};

/// Which backend proposes offspring programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesizerKind {
    Offline,
    Llm,
}

/// Full configuration of a co-evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub task: Task,
    pub n: usize,
    pub batch: usize,
    pub pop_gen: usize,
    pub pop_heur: usize,
    pub generations: usize,
    pub offspring_per_parent: usize,
    pub elitism: usize,
    pub synthesizer: SynthesizerKind,
    pub master_seed: Seed,
    pub reference: ReferencePolicy,
}

impl EvolutionConfig {
    pub fn new(task: Task, n: usize, generations: usize, master_seed: Seed) -> Self {
        EvolutionConfig {
            task,
            n,
            batch: 16,
            pop_gen: 8,
            pop_heur: 8,
            generations,
            offspring_per_parent: 2,
            elitism: 2,
            synthesizer: SynthesizerKind::Offline,
            master_seed,
            reference: ReferencePolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_gen < 2 || self.pop_heur < 2 {
            return Err(Error::Evolution("populations must be at least 2".into()));
        }
        if self.elitism >= self.pop_gen || self.elitism >= self.pop_heur {
            return Err(Error::Evolution(
                "elitism must be smaller than both populations".into(),
            ));
        }
        if self.batch == 0 || self.offspring_per_parent == 0 {
            return Err(Error::Evolution(
                "batch and offspring_per_parent must be positive".into(),
            ));
        }
        self.reference.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }
}

/// A generator with its fitness, scored once at birth against the then-
/// current champion heuristic. Cached birth fitness plus elitist
/// truncation is what makes champion hardness non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredGenerator {
    pub id: String,
    pub program: GeneratorProgram,
    pub fitness: f64,
    pub parent: Option<String>,
    pub edit: Option<String>,
    pub born_gen: usize,
    /// Derivation path of the RNG draw that created this program.
    pub lineage: String,
    pub report: GapReport,
}

/// A heuristic with its fitness: mean gap over the current top-3
/// generators, re-scored whenever that opponent set changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHeuristic {
    pub id: String,
    pub program: HeuristicProgram,
    pub fitness: f64,
    pub parent: Option<String>,
    pub edit: Option<String>,
    pub born_gen: usize,
    pub lineage: String,
    /// Evaluation against the top-1 generator, kept for reflection.
    pub report: GapReport,
    /// "+"-joined ids of the generator set the fitness was measured on.
    pub scored_against: String,
    /// The seeded baseline is never evicted, so the champion's fitness is
    /// at most the baseline's on every frozen opponent set.
    pub is_baseline: bool,
}

/// One row of the hardness curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub generation: usize,
    pub champion_hardness: f64,
    pub champion_gap: f64,
}

/// Complete engine state; serializing it is the resume point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionState {
    pub generation: usize,
    /// Sorted by fitness descending, ties to the earlier id.
    pub generators: Vec<ScoredGenerator>,
    /// Sorted by fitness ascending (ties to the earlier id), except the
    /// pinned baseline may sit last when it would otherwise be evicted.
    pub heuristics: Vec<ScoredHeuristic>,
    pub champion_generator: String,
    pub champion_heuristic: String,
    pub gen_weights: gen_dsl::MutationWeights,
    pub heur_weights: heur_dsl::MutationWeights,
    pub next_gen_id: u64,
    pub next_heur_id: u64,
    /// Base seed for every hardness evaluation in the run.
    pub eval_base: Seed,
    pub reflections: Vec<ReflectionNote>,
    /// Synthesizer fallbacks and discarded offspring, in order.
    pub events: Vec<String>,
    pub curve: Vec<CurvePoint>,
}

impl EvolutionState {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn champion_generator(&self) -> &ScoredGenerator {
        self.generators
            .iter()
            .find(|g| g.id == self.champion_generator)
            .expect("champion generator is in the population")
    }

    pub fn champion_heuristic(&self) -> &ScoredHeuristic {
        self.heuristics
            .iter()
            .find(|h| h.id == self.champion_heuristic)
            .expect("champion heuristic is in the population")
    }

    pub fn baseline_heuristic(&self) -> &ScoredHeuristic {
        self.heuristics
            .iter()
            .find(|h| h.is_baseline)
            .expect("baseline heuristic is pinned in the population")
    }

    fn check_invariants(&self) -> Result<()> {
        if self
            .generators
            .iter()
            .map(|g| g.fitness)
            .chain(self.heuristics.iter().map(|h| h.fitness))
            .any(|f| !f.is_finite())
        {
            return Err(Error::Evolution("non-finite fitness in state".into()));
        }
        let best_gen = self
            .generators
            .iter()
            .max_by(|a, b| a.fitness.total_cmp(&b.fitness).then(b.id.cmp(&a.id)))
            .ok_or_else(|| Error::Evolution("empty generator population".into()))?;
        if best_gen.id != self.champion_generator {
            return Err(Error::Evolution(format!(
                "champion generator {} is not the argmax {}",
                self.champion_generator, best_gen.id
            )));
        }
        let best_heur = self
            .heuristics
            .iter()
            .min_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)))
            .ok_or_else(|| Error::Evolution("empty heuristic population".into()))?;
        if best_heur.id != self.champion_heuristic {
            return Err(Error::Evolution(format!(
                "champion heuristic {} is not the argmin {}",
                self.champion_heuristic, best_heur.id
            )));
        }
        if !self.heuristics.iter().any(|h| h.is_baseline) {
            return Err(Error::Evolution("baseline heuristic was evicted".into()));
        }
        Ok(())
    }
}

/// Conversation context handed to synthesizers.
pub struct SynthesisContext<'a> {
    pub task: Task,
    pub reflections: &'a [ReflectionNote],
}

/// Proposes offspring programs. Implementations must be deterministic in
/// `seed` or honestly fallible; on error the engine substitutes an offline
/// mutation and logs the event.
pub trait Synthesizer {
    fn propose_generator(
        &mut self,
        parent: &GeneratorProgram,
        weights: &gen_dsl::MutationWeights,
        seed: Seed,
        ctx: &SynthesisContext,
    ) -> Result<(GeneratorProgram, String)>;

    fn propose_heuristic(
        &mut self,
        parent: &HeuristicProgram,
        weights: &heur_dsl::MutationWeights,
        seed: Seed,
        ctx: &SynthesisContext,
    ) -> Result<(HeuristicProgram, String)>;

    fn name(&self) -> &'static str;
}

/// Grammar-based mutation, the default synthesizer. Infallible and fully
/// seeded.
#[derive(Debug, Default)]
pub struct OfflineSynthesizer;

impl Synthesizer for OfflineSynthesizer {
    fn propose_generator(
        &mut self,
        parent: &GeneratorProgram,
        weights: &gen_dsl::MutationWeights,
        seed: Seed,
        _ctx: &SynthesisContext,
    ) -> Result<(GeneratorProgram, String)> {
        let (program, class) = mutate_generator_traced(parent, seed, weights);
        Ok((program, class.to_string()))
    }

    fn propose_heuristic(
        &mut self,
        parent: &HeuristicProgram,
        weights: &heur_dsl::MutationWeights,
        seed: Seed,
        _ctx: &SynthesisContext,
    ) -> Result<(HeuristicProgram, String)> {
        let (program, class) = mutate_heuristic_traced(parent, seed, weights);
        Ok((program, class.to_string()))
    }

    fn name(&self) -> &'static str {
        "offline"
    }
}

/// Final state plus where it was persisted.
#[derive(Debug)]
pub struct RunArtifacts {
    pub state: EvolutionState,
    pub run_dir: PathBuf,
}

fn gen_weight_update(weights: &mut gen_dsl::MutationWeights, class: &str, mult: f64) {
    let slot = match class {
        "perturb" => &mut weights.perturb,
        "replace" => &mut weights.replace,
        "insert" => &mut weights.insert,
        "delete" => &mut weights.delete,
        _ => return,
    };
    apply_weight_update(slot, mult);
}

fn heur_weight_update(weights: &mut heur_dsl::MutationWeights, class: &str, mult: f64) {
    let slot = match class {
        "perturb" => &mut weights.perturb,
        "replace" => &mut weights.replace,
        "regenerate" => &mut weights.regenerate,
        _ => return,
    };
    apply_weight_update(slot, mult);
}

fn sort_generators(generators: &mut [ScoredGenerator]) {
    generators.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then(a.id.cmp(&b.id)));
}

fn sort_heuristics(heuristics: &mut [ScoredHeuristic]) {
    heuristics.sort_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)));
}

/// Truncation selection with guaranteed elite survival: the named elites
/// always stay, remaining slots go to the fittest of the rest.
fn select_generators(
    mut pool: Vec<ScoredGenerator>,
    elites: &[String],
    pop: usize,
) -> Vec<ScoredGenerator> {
    sort_generators(&mut pool);
    let mut kept = Vec::with_capacity(pop);
    let mut rest = Vec::new();
    for g in pool {
        if elites.iter().any(|e| *e == g.id) {
            kept.push(g);
        } else {
            rest.push(g);
        }
    }
    kept.extend(rest.into_iter().take(pop.saturating_sub(kept.len())));
    sort_generators(&mut kept);
    kept
}

/// Heuristic selection: elites survive, the seeded baseline is never
/// evicted. When the baseline would miss the cut it replaces the worst
/// non-elite and sits last, out of sorted order.
fn select_heuristics(
    mut pool: Vec<ScoredHeuristic>,
    elites: &[String],
    pop: usize,
) -> Vec<ScoredHeuristic> {
    sort_heuristics(&mut pool);
    let mut kept = Vec::with_capacity(pop);
    let mut rest = Vec::new();
    for h in pool {
        if elites.iter().any(|e| *e == h.id) {
            kept.push(h);
        } else {
            rest.push(h);
        }
    }
    let mut rest = rest.into_iter();
    while kept.len() < pop {
        let Some(h) = rest.next() else { break };
        kept.push(h);
    }
    let mut leftovers: Vec<ScoredHeuristic> = rest.collect();
    sort_heuristics(&mut kept);
    if !kept.iter().any(|h| h.is_baseline) {
        let pos = leftovers
            .iter()
            .position(|h| h.is_baseline)
            .expect("baseline heuristic is pinned in the population");
        let baseline = leftovers.remove(pos);
        let evict = kept
            .iter()
            .rposition(|h| !elites.iter().any(|e| *e == h.id))
            .expect("a non-elite slot exists because elitism < population");
        kept.remove(evict);
        kept.push(baseline);
    }
    kept
}

/// Seed generator program: the canonical uniform square; OP runs get the
/// default prize/budget rules attached so rule parameters are mutable.
fn seed_generator(task: Task) -> GeneratorProgram {
    let mut program = canonical_uniform();
    if task == Task::OpAco {
        program.prize_rule = Some(PrizeRule::UniformPrize { scale: 1.0 });
        program.budget_rule = Some(BudgetRule { factor: 0.6 });
    }
    program
}

fn score_generator(
    program: &GeneratorProgram,
    opponent: &HeuristicProgram,
    config: &EvolutionConfig,
    eval_base: Seed,
    cache: &ReferenceCache,
) -> Result<GapReport> {
    evaluate_hardness_cached(
        program,
        opponent,
        config.n,
        config.batch,
        eval_base,
        config.task,
        &config.reference,
        &SolverBudget::default(),
        cache,
    )
}

/// Mean gap over the top generator set; returns the fitness and the
/// report against the top-1 generator.
fn score_heuristic(
    program: &HeuristicProgram,
    top: &[(String, GeneratorProgram)],
    config: &EvolutionConfig,
    eval_base: Seed,
    cache: &ReferenceCache,
) -> Result<(f64, GapReport)> {
    let mut sum = 0.0;
    let mut first = None;
    for (_, gen_program) in top {
        let report = evaluate_hardness_cached(
            gen_program,
            program,
            config.n,
            config.batch,
            eval_base,
            config.task,
            &config.reference,
            &SolverBudget::default(),
            cache,
        )?;
        sum += report.gap;
        if first.is_none() {
            first = Some(report);
        }
    }
    let fitness = sum / top.len() as f64;
    Ok((fitness, first.expect("top set is nonempty")))
}

fn top_generator_set(state: &EvolutionState) -> (String, Vec<(String, GeneratorProgram)>) {
    let top: Vec<(String, GeneratorProgram)> = state
        .generators
        .iter()
        .take(3)
        .map(|g| (g.id.clone(), g.program.clone()))
        .collect();
    let fingerprint = top
        .iter()
        .map(|(id, _)| id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    (fingerprint, top)
}

/// Build generation 0: seeded programs plus mutated draws, everything
/// scored and champions picked.
fn init_state(
    config: &EvolutionConfig,
    synth: &mut dyn Synthesizer,
    cache: &ReferenceCache,
) -> Result<EvolutionState> {
    let eval_base = derive_seed(config.master_seed, &[channel::EVAL_BASE]);
    let mut state = EvolutionState {
        generation: 0,
        generators: Vec::with_capacity(config.pop_gen),
        heuristics: Vec::with_capacity(config.pop_heur),
        champion_generator: String::new(),
        champion_heuristic: String::new(),
        gen_weights: gen_dsl::MutationWeights::default(),
        heur_weights: heur_dsl::MutationWeights::default(),
        next_gen_id: 0,
        next_heur_id: 0,
        eval_base,
        reflections: Vec::new(),
        events: Vec::new(),
        curve: Vec::new(),
    };

    let base_gen = seed_generator(config.task);
    let baseline = baseline_heuristic(config.task.target());
    let ctx = SynthesisContext {
        task: config.task,
        reflections: &[],
    };

    // Generator seeds: canonical + mutated draws, scored against the
    // baseline heuristic.
    let mut gen_programs = vec![(base_gen.clone(), "seed".to_string(), "init/generator/0".to_string())];
    for i in 1..config.pop_gen {
        let seed = derive_seed(config.master_seed, &[channel::INIT_GENERATOR, i as u64]);
        let (program, edit) = match synth.propose_generator(&base_gen, &state.gen_weights, seed, &ctx)
        {
            Ok(p) => p,
            Err(err) => {
                state.events.push(format!(
                    "generation 0: synthesizer {} failed for init generator {i}: {err}; offline fallback",
                    synth.name()
                ));
                let (p, c) = mutate_generator_traced(&base_gen, seed, &state.gen_weights);
                (p, c.to_string())
            }
        };
        gen_programs.push((program, edit, format!("init/generator/{i}")));
    }
    for (program, edit, lineage) in gen_programs {
        let id = format!("g{:04}", state.next_gen_id);
        state.next_gen_id += 1;
        let report = score_generator(&program, &baseline, config, eval_base, cache)?;
        state.generators.push(ScoredGenerator {
            id,
            fitness: report.gap,
            program,
            parent: None,
            edit: if edit == "seed" { None } else { Some(edit) },
            born_gen: 0,
            lineage,
            report,
        });
    }
    sort_generators(&mut state.generators);
    state.champion_generator = state.generators[0].id.clone();

    // Heuristic seeds: pinned baseline + mutated draws, scored against
    // the initial top-3 generators.
    let (fingerprint, top) = top_generator_set(&state);
    let mut heur_programs = vec![(baseline.clone(), "seed".to_string(), "init/heuristic/0".to_string(), true)];
    for i in 1..config.pop_heur {
        let seed = derive_seed(config.master_seed, &[channel::INIT_HEURISTIC, i as u64]);
        let (program, edit) =
            match synth.propose_heuristic(&baseline, &state.heur_weights, seed, &ctx) {
                Ok(p) => p,
                Err(err) => {
                    state.events.push(format!(
                        "generation 0: synthesizer {} failed for init heuristic {i}: {err}; offline fallback",
                        synth.name()
                    ));
                    let (p, c) = mutate_heuristic_traced(&baseline, seed, &state.heur_weights);
                    (p, c.to_string())
                }
            };
        heur_programs.push((program, edit, format!("init/heuristic/{i}"), false));
    }
    for (program, edit, lineage, is_baseline) in heur_programs {
        let id = format!("h{:04}", state.next_heur_id);
        state.next_heur_id += 1;
        let (fitness, report) = score_heuristic(&program, &top, config, eval_base, cache)?;
        state.heuristics.push(ScoredHeuristic {
            id,
            fitness,
            program,
            parent: None,
            edit: if edit == "seed" { None } else { Some(edit) },
            born_gen: 0,
            lineage,
            report,
            scored_against: fingerprint.clone(),
            is_baseline,
        });
    }
    sort_heuristics(&mut state.heuristics);
    state.champion_heuristic = state.heuristics[0].id.clone();

    state.curve.push(CurvePoint {
        generation: 0,
        champion_hardness: state.generators[0].fitness,
        champion_gap: state.heuristics[0].fitness,
    });
    state.check_invariants()?;
    Ok(state)
}

/// One full alternation: generator MAX phase, heuristic MIN phase,
/// reflections and champions updated. Pure in (state, config) for the
/// offline synthesizer.
pub fn step_generation(
    state: &EvolutionState,
    config: &EvolutionConfig,
    synth: &mut dyn Synthesizer,
    cache: &ReferenceCache,
) -> Result<EvolutionState> {
    config.validate()?;
    let mut next = state.clone();
    next.generation += 1;
    let g = next.generation as u64;

    // MAX phase: offspring scored at birth against the current champion
    // heuristic; parents keep their birth fitness (elitism makes champion
    // hardness non-decreasing).
    let opponent = next.champion_heuristic().program.clone();
    let parents: Vec<(String, GeneratorProgram, GapReport)> = next
        .generators
        .iter()
        .map(|p| (p.id.clone(), p.program.clone(), p.report.clone()))
        .collect();
    let gen_elites: Vec<String> = parents
        .iter()
        .take(config.elitism)
        .map(|(id, _, _)| id.clone())
        .collect();
    for (pi, (parent_id, parent_program, parent_report)) in parents.iter().enumerate() {
        for j in 0..config.offspring_per_parent {
            let seed = derive_seed(
                config.master_seed,
                &[channel::MUTATE_GENERATOR, g, pi as u64, j as u64],
            );
            let ctx = SynthesisContext {
                task: config.task,
                reflections: &next.reflections,
            };
            let lineage = format!("mutate/generator/gen{g}/parent{pi}/off{j}");
            let (program, edit) =
                match synth.propose_generator(parent_program, &next.gen_weights, seed, &ctx) {
                    Ok(p) => p,
                    Err(err) => {
                        next.events.push(format!(
                            "generation {g}: synthesizer {} failed for parent {parent_id}: {err}; offline fallback",
                            synth.name()
                        ));
                        let (p, c) = mutate_generator_traced(parent_program, seed, &next.gen_weights);
                        (p, c.to_string())
                    }
                };
            let id = format!("g{:04}", state_counter(&mut next.next_gen_id));
            let report = match score_generator(&program, &opponent, config, next.eval_base, cache)
            {
                Ok(r) => r,
                Err(err) => {
                    next.events.push(format!(
                        "generation {g}: evaluation failed for generator {id} (parent {parent_id}): {err}; offspring discarded"
                    ));
                    continue;
                }
            };
            let note = reflect(
                parent_report,
                &report,
                &ReflectContext {
                    subject: &id,
                    parent: parent_id,
                    side: Side::Generator,
                    edit_class: &edit,
                    generation: next.generation,
                },
                None,
            )?;
            gen_weight_update(&mut next.gen_weights, &edit, note.summary.weight_multiplier);
            next.reflections.push(note);
            next.generators.push(ScoredGenerator {
                id,
                fitness: report.gap,
                program,
                parent: Some(parent_id.clone()),
                edit: Some(edit),
                born_gen: next.generation,
                lineage,
                report,
            });
        }
    }
    next.generators = select_generators(std::mem::take(&mut next.generators), &gen_elites, config.pop_gen);
    next.champion_generator = next.generators[0].id.clone();

    // MIN phase: re-score everyone on the new frozen top-3 set, spawn
    // offspring, select with the baseline pinned.
    let (fingerprint, top) = top_generator_set(&next);
    let mut rescored = Vec::with_capacity(next.heuristics.len());
    for mut h in std::mem::take(&mut next.heuristics) {
        if h.scored_against != fingerprint {
            match score_heuristic(&h.program, &top, config, next.eval_base, cache) {
                Ok((fitness, report)) => {
                    h.fitness = fitness;
                    h.report = report;
                    h.scored_against = fingerprint.clone();
                }
                Err(err) => {
                    if h.is_baseline {
                        return Err(Error::Evolution(format!(
                            "generation {g}: baseline heuristic stopped evaluating: {err}"
                        )));
                    }
                    next.events.push(format!(
                        "generation {g}: re-scoring failed for heuristic {}: {err}; dropped",
                        h.id
                    ));
                    continue;
                }
            }
        }
        rescored.push(h);
    }
    sort_heuristics(&mut rescored);
    next.heuristics = rescored;

    let parents: Vec<(String, HeuristicProgram, GapReport)> = next
        .heuristics
        .iter()
        .map(|p| (p.id.clone(), p.program.clone(), p.report.clone()))
        .collect();
    let heur_elites: Vec<String> = parents
        .iter()
        .take(config.elitism)
        .map(|(id, _, _)| id.clone())
        .collect();
    for (pi, (parent_id, parent_program, parent_report)) in parents.iter().enumerate() {
        for j in 0..config.offspring_per_parent {
            let seed = derive_seed(
                config.master_seed,
                &[channel::MUTATE_HEURISTIC, g, pi as u64, j as u64],
            );
            let ctx = SynthesisContext {
                task: config.task,
                reflections: &next.reflections,
            };
            let lineage = format!("mutate/heuristic/gen{g}/parent{pi}/off{j}");
            let (program, edit) =
                match synth.propose_heuristic(parent_program, &next.heur_weights, seed, &ctx) {
                    Ok(p) => p,
                    Err(err) => {
                        next.events.push(format!(
                            "generation {g}: synthesizer {} failed for parent {parent_id}: {err}; offline fallback",
                            synth.name()
                        ));
                        let (p, c) = mutate_heuristic_traced(parent_program, seed, &next.heur_weights);
                        (p, c.to_string())
                    }
                };
            let id = format!("h{:04}", state_counter(&mut next.next_heur_id));
            let (fitness, report) =
                match score_heuristic(&program, &top, config, next.eval_base, cache) {
                    Ok(r) => r,
                    Err(err) => {
                        next.events.push(format!(
                            "generation {g}: evaluation failed for heuristic {id} (parent {parent_id}): {err}; offspring discarded"
                        ));
                        continue;
                    }
                };
            let note = reflect(
                parent_report,
                &report,
                &ReflectContext {
                    subject: &id,
                    parent: parent_id,
                    side: Side::Heuristic,
                    edit_class: &edit,
                    generation: next.generation,
                },
                None,
            )?;
            heur_weight_update(&mut next.heur_weights, &edit, note.summary.weight_multiplier);
            next.reflections.push(note);
            next.heuristics.push(ScoredHeuristic {
                id,
                fitness,
                program,
                parent: Some(parent_id.clone()),
                edit: Some(edit),
                born_gen: next.generation,
                lineage,
                report,
                scored_against: fingerprint.clone(),
                is_baseline: false,
            });
        }
    }
    next.heuristics =
        select_heuristics(std::mem::take(&mut next.heuristics), &heur_elites, config.pop_heur);
    next.champion_heuristic = next.heuristics[0].id.clone();

    next.curve.push(CurvePoint {
        generation: next.generation,
        champion_hardness: next.generators[0].fitness,
        champion_gap: next.heuristics[0].fitness,
    });
    next.check_invariants()?;
    Ok(next)
}

fn state_counter(counter: &mut u64) -> u64 {
    let v = *counter;
    *counter += 1;
    v
}

/// Run (or resume) a full co-evolution in `run_dir`. The directory is the
/// durable artifact: config snapshot, per-generation populations, fitness
/// tables, reflections, and the champion curve.
pub fn run_coevolution(
    config: &EvolutionConfig,
    run_dir: &Path,
    synth: &mut dyn Synthesizer,
) -> Result<RunArtifacts> {
    config.validate()?;
    fs::create_dir_all(run_dir)?;

    let config_path = run_dir.join("config.json");
    if config_path.exists() {
        let existing = fs::read_to_string(&config_path)?;
        let parsed: EvolutionConfig = serde_json::from_str(&existing)?;
        if parsed != *config {
            return Err(Error::Evolution(format!(
                "run directory {} was created with a different config",
                run_dir.display()
            )));
        }
    } else {
        write_atomic(&config_path, &config.to_json())?;
    }

    let cache = ReferenceCache::new();
    let mut state = match load_latest_state(run_dir)? {
        Some(resumed) => {
            if resumed.generation > config.generations {
                return Err(Error::Evolution(format!(
                    "run directory already holds generation {} > configured {}",
                    resumed.generation, config.generations
                )));
            }
            resumed
        }
        None => {
            let fresh = init_state(config, synth, &cache)?;
            persist_generation(run_dir, &fresh)?;
            fresh
        }
    };

    while state.generation < config.generations {
        state = step_generation(&state, config, synth, &cache)?;
        persist_generation(run_dir, &state)?;
    }
    write_summary(run_dir, config, &state)?;
    Ok(RunArtifacts {
        state,
        run_dir: run_dir.to_path_buf(),
    })
}

fn gen_dir(run_dir: &Path, generation: usize) -> PathBuf {
    run_dir.join(format!("gen_{generation:04}"))
}

/// Latest persisted state in a run directory, if any generation has
/// completed there.
pub fn load_latest_state(run_dir: &Path) -> Result<Option<EvolutionState>> {
    let mut latest: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(run_dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(rest) = name.to_str().and_then(|s| s.strip_prefix("gen_")) else {
            continue;
        };
        let Ok(k) = rest.parse::<usize>() else {
            continue;
        };
        let state_path = entry.path().join("state.json");
        if state_path.is_file() && latest.as_ref().is_none_or(|(best, _)| k > *best) {
            latest = Some((k, state_path));
        }
    }
    match latest {
        None => Ok(None),
        Some((_, path)) => {
            let state = EvolutionState::from_json(&fs::read_to_string(&path)?)?;
            state.check_invariants()?;
            Ok(Some(state))
        }
    }
}

/// Persist one generation: populations, fitness table, the reflections
/// appended this generation, and (last, as the completion marker) the
/// full state snapshot.
fn persist_generation(run_dir: &Path, state: &EvolutionState) -> Result<()> {
    let dir = gen_dir(run_dir, state.generation);
    fs::create_dir_all(&dir)?;
    write_atomic(
        &dir.join("generators.json"),
        &serde_json::to_string_pretty(&state.generators)?,
    )?;
    write_atomic(
        &dir.join("heuristics.json"),
        &serde_json::to_string_pretty(&state.heuristics)?,
    )?;

    let mut fitness = String::from("side,id,fitness,parent,edit,born_gen\n");
    for g in &state.generators {
        fitness.push_str(&format!(
            "generator,{},{},{},{},{}\n",
            g.id,
            g.fitness,
            g.parent.as_deref().unwrap_or(""),
            g.edit.as_deref().unwrap_or(""),
            g.born_gen
        ));
    }
    for h in &state.heuristics {
        fitness.push_str(&format!(
            "heuristic,{},{},{},{},{}\n",
            h.id,
            h.fitness,
            h.parent.as_deref().unwrap_or(""),
            h.edit.as_deref().unwrap_or(""),
            h.born_gen
        ));
    }
    write_atomic(&dir.join("fitness.csv"), &fitness)?;

    let mut notes = String::new();
    for note in state
        .reflections
        .iter()
        .filter(|r| r.generation == state.generation)
    {
        notes.push_str(&serde_json::to_string(note)?);
        notes.push('\n');
    }
    write_atomic(&dir.join("reflections.jsonl"), &notes)?;
    write_atomic(&dir.join("state.json"), &state.to_json())?;
    Ok(())
}

/// Champions summary for the acceptance harness and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChampionsFile {
    pub generation: usize,
    pub task: Task,
    pub n: usize,
    pub batch: usize,
    pub eval_base: Seed,
    pub champion_generator_id: String,
    pub champion_generator: GeneratorProgram,
    pub champion_hardness: f64,
    pub champion_heuristic_id: String,
    pub champion_heuristic: HeuristicProgram,
    pub champion_gap: f64,
    /// Ids of the final top-3 generator pool the champion gap refers to.
    pub final_pool: Vec<String>,
}

pub fn curve_csv(state: &EvolutionState) -> String {
    let mut out = String::from("generation,champion_hardness,champion_gap\n");
    for p in &state.curve {
        out.push_str(&format!(
            "{},{},{}\n",
            p.generation, p.champion_hardness, p.champion_gap
        ));
    }
    out
}

fn write_summary(run_dir: &Path, config: &EvolutionConfig, state: &EvolutionState) -> Result<()> {
    write_atomic(&run_dir.join("curve.csv"), &curve_csv(state))?;
    let champions = ChampionsFile {
        generation: state.generation,
        task: config.task,
        n: config.n,
        batch: config.batch,
        eval_base: state.eval_base,
        champion_generator_id: state.champion_generator.clone(),
        champion_generator: state.champion_generator().program.clone(),
        champion_hardness: state.champion_generator().fitness,
        champion_heuristic_id: state.champion_heuristic.clone(),
        champion_heuristic: state.champion_heuristic().program.clone(),
        champion_gap: state.champion_heuristic().fitness,
        final_pool: state
            .generators
            .iter()
            .take(3)
            .map(|g| g.id.clone())
            .collect(),
    };
    write_atomic(
        &run_dir.join("champions.json"),
        &serde_json::to_string_pretty(&champions)?,
    )?;
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small, exact-reference config so engine tests stay fast.
    fn tiny_config(generations: usize) -> EvolutionConfig {
        EvolutionConfig {
            batch: 3,
            pop_gen: 4,
            pop_heur: 4,
            ..EvolutionConfig::new(Task::TspGls, 10, generations, Seed(42))
        }
    }

    #[test]
    fn init_builds_full_scored_populations() {
        let config = tiny_config(0);
        let cache = ReferenceCache::new();
        let state = init_state(&config, &mut OfflineSynthesizer, &cache).unwrap();
        assert_eq!(state.generation, 0);
        assert_eq!(state.generators.len(), 4);
        assert_eq!(state.heuristics.len(), 4);
        assert!(state.heuristics.iter().any(|h| h.is_baseline));
        assert_eq!(state.curve.len(), 1);
        assert_eq!(state.generators[0].id, state.champion_generator);
        // Populations are sorted in champion-first order.
        for w in state.generators.windows(2) {
            assert!(w[0].fitness >= w[1].fitness);
        }
        for w in state.heuristics.windows(2) {
            assert!(w[0].fitness <= w[1].fitness);
        }
    }

    #[test]
    fn step_increments_generation_and_preserves_population_sizes() {
        let config = tiny_config(1);
        let cache = ReferenceCache::new();
        let state = init_state(&config, &mut OfflineSynthesizer, &cache).unwrap();
        let next = step_generation(&state, &config, &mut OfflineSynthesizer, &cache).unwrap();
        assert_eq!(next.generation, state.generation + 1);
        assert_eq!(next.generators.len(), config.pop_gen);
        assert_eq!(next.heuristics.len(), config.pop_heur);
        assert!(next.reflections.len() > state.reflections.len());
    }

    #[test]
    fn step_is_deterministic_from_the_same_state() {
        let config = tiny_config(1);
        let cache = ReferenceCache::new();
        let state = init_state(&config, &mut OfflineSynthesizer, &cache).unwrap();
        let a = step_generation(&state, &config, &mut OfflineSynthesizer, &cache).unwrap();
        let b = step_generation(&state, &config, &mut OfflineSynthesizer, &ReferenceCache::new())
            .unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn champion_hardness_is_monotone_and_reflections_append_only() {
        let config = tiny_config(4);
        let cache = ReferenceCache::new();
        let mut state = init_state(&config, &mut OfflineSynthesizer, &cache).unwrap();
        let mut previous_notes = state.reflections.clone();
        for _ in 0..4 {
            let next = step_generation(&state, &config, &mut OfflineSynthesizer, &cache).unwrap();
            assert!(
                next.generators[0].fitness >= state.generators[0].fitness,
                "champion hardness regressed: {} -> {}",
                state.generators[0].fitness,
                next.generators[0].fitness
            );
            assert_eq!(&next.reflections[..previous_notes.len()], &previous_notes[..]);
            previous_notes = next.reflections.clone();
            state = next;
        }
        for w in state.curve.windows(2) {
            assert!(w[1].champion_hardness >= w[0].champion_hardness);
        }
        // Champion heuristic beats or ties the pinned baseline on the
        // same frozen opponent set.
        let champ = state.champion_heuristic();
        let baseline = state.baseline_heuristic();
        assert_eq!(champ.scored_against, baseline.scored_against);
        assert!(champ.fitness <= baseline.fitness);
    }

    #[test]
    fn failing_synthesizer_falls_back_to_offline_mutation() {
        struct Failing;
        impl Synthesizer for Failing {
            fn propose_generator(
                &mut self,
                _p: &GeneratorProgram,
                _w: &gen_dsl::MutationWeights,
                _s: Seed,
                _c: &SynthesisContext,
            ) -> Result<(GeneratorProgram, String)> {
                Err(Error::Transport("connector down".into()))
            }
            fn propose_heuristic(
                &mut self,
                _p: &HeuristicProgram,
                _w: &heur_dsl::MutationWeights,
                _s: Seed,
                _c: &SynthesisContext,
            ) -> Result<(HeuristicProgram, String)> {
                Err(Error::Transport("connector down".into()))
            }
            fn name(&self) -> &'static str {
                "failing"
            }
        }
        let config = tiny_config(1);
        let cache = ReferenceCache::new();
        let state = init_state(&config, &mut Failing, &cache).unwrap();
        let next = step_generation(&state, &config, &mut Failing, &cache).unwrap();
        assert_eq!(next.generators.len(), config.pop_gen);
        assert!(next
            .events
            .iter()
            .any(|e| e.contains("offline fallback")));
    }

    #[test]
    fn zero_generation_run_reports_seeded_champions() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(0);
        let artifacts =
            run_coevolution(&config, dir.path(), &mut OfflineSynthesizer).unwrap();
        assert_eq!(artifacts.state.generation, 0);
        assert!(dir.path().join("gen_0000/state.json").is_file());
        assert!(dir.path().join("champions.json").is_file());
        let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
        assert_eq!(curve.lines().count(), 2);
        // Champion hardness equals the best initial generator's hardness
        // against the baseline heuristic.
        let champions: ChampionsFile = serde_json::from_str(
            &fs::read_to_string(dir.path().join("champions.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(champions.champion_hardness, artifacts.state.generators[0].fitness);
    }

    #[test]
    fn reruns_and_resumed_runs_match_byte_for_byte() {
        let config = tiny_config(2);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_coevolution(&config, dir_a.path(), &mut OfflineSynthesizer).unwrap();
        run_coevolution(&config, dir_b.path(), &mut OfflineSynthesizer).unwrap();
        let curve_a = fs::read_to_string(dir_a.path().join("curve.csv")).unwrap();
        let curve_b = fs::read_to_string(dir_b.path().join("curve.csv")).unwrap();
        assert_eq!(curve_a, curve_b);

        // Simulate an interrupted run: copy only the config and the first
        // generation, then resume.
        let dir_c = tempfile::tempdir().unwrap();
        fs::copy(
            dir_a.path().join("config.json"),
            dir_c.path().join("config.json"),
        )
        .unwrap();
        fs::create_dir_all(dir_c.path().join("gen_0000")).unwrap();
        for f in ["generators.json", "heuristics.json", "fitness.csv", "reflections.jsonl", "state.json"] {
            fs::copy(
                dir_a.path().join("gen_0000").join(f),
                dir_c.path().join("gen_0000").join(f),
            )
            .unwrap();
        }
        run_coevolution(&config, dir_c.path(), &mut OfflineSynthesizer).unwrap();
        let final_a =
            fs::read_to_string(dir_a.path().join("gen_0002/state.json")).unwrap();
        let final_c =
            fs::read_to_string(dir_c.path().join("gen_0002/state.json")).unwrap();
        assert_eq!(final_a, final_c);
    }

    #[test]
    fn mismatched_config_is_rejected_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(1);
        run_coevolution(&config, dir.path(), &mut OfflineSynthesizer).unwrap();
        let mut other = config.clone();
        other.master_seed = Seed(43);
        let err = run_coevolution(&other, dir.path(), &mut OfflineSynthesizer);
        assert!(matches!(err, Err(Error::Evolution(_))));
    }

    #[test]
    fn config_validation_catches_bad_shapes() {
        let mut config = tiny_config(1);
        config.pop_gen = 1;
        assert!(config.validate().is_err());
        let mut config = tiny_config(1);
        config.elitism = 4;
        assert!(config.validate().is_err());
        let mut config = tiny_config(1);
        config.batch = 0;
        assert!(config.validate().is_err());
    }
}
