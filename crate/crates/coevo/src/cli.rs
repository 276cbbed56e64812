//! Command-line surface: thin sequential drivers over the library. Every
//! output is deterministic given flags and seeds; exit codes are 0 on
//! success, 2 on usage errors, 1 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{
    evaluate_hardness_cached, evaluate_on_instances, ReferenceCache, ReferencePolicy,
    SolverBudget, Task,
};
use crate::evolve::{
    curve_csv, load_latest_state, run_coevolution, EvolutionConfig, EvolutionState,
    OfflineSynthesizer, SynthesizerKind,
};
use crate::gen_dsl::{self, canonical_uniform, GeneratorProgram};
use crate::heur_dsl::{baseline_heuristic, HeuristicProgram};
use crate::instance::{Instance, InstanceKind};
use crate::llm::{ConnectorConfig, HttpTransport, LlmSynthesizer};
use crate::report::{render_table, ReportTable, TableFormat};
use crate::rng::Seed;
use crate::solvers::{solve_aco_op, solve_aco_tsp, solve_gls, AcoParams, GlsParams, SolveResult};
use crate::tsplib::{parse_tsplib, parse_tsplib_with_sidecar, CostUnits};

#[derive(Parser)]
#[command(
    name = "coevo",
    version,
    about = "Co-evolve hard routing instances and solver heuristics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample instance files from a generator program.
    Gen(GenArgs),
    /// Solve one instance file with a heuristic program.
    Solve(SolveArgs),
    /// Measure the hardness gap of a generator or an instance directory.
    Gap(GapArgs),
    /// Run the adversarial co-evolution loop into a run directory.
    Evolve(EvolveArgs),
    /// Solve a TSPLIB file and report the original-unit cost.
    Tsplib(TsplibArgs),
    /// Regenerate curve and summary tables from a run directory.
    Report(ReportArgs),
    /// Export instance coordinates as one flat CSV.
    ExportCoords(ExportCoordsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Tsp,
    Op,
}

impl From<KindArg> for InstanceKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Tsp => InstanceKind::Tsp,
            KindArg::Op => InstanceKind::Op,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthArg {
    Offline,
    Llm,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["program", "uniform"])))]
struct GenArgs {
    /// Generator program JSON file.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Use the canonical uniform-square generator.
    #[arg(long)]
    uniform: bool,
    /// Instance kind to emit.
    #[arg(long, value_enum, default_value = "tsp")]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    /// How many instances to sample (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    seed: u64,
    /// Output directory for instance_NNNN.json files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    task: Task,
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Heuristic program JSON file; defaults to the task's baseline.
    #[arg(long)]
    heuristic: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Local-search move budget (GLS tasks).
    #[arg(long)]
    budget: Option<u64>,
    /// Stall cutoff in penalty cycles (GLS tasks).
    #[arg(long)]
    stall: Option<u32>,
    /// Colony iterations (ACO tasks).
    #[arg(long)]
    iterations: Option<usize>,
    /// Write the SolveResult JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("subject").required(true).args(["generator", "instances"])))]
struct GapArgs {
    #[arg(long)]
    task: Task,
    /// Generator program JSON file.
    #[arg(long)]
    generator: Option<PathBuf>,
    /// Directory of instance JSON files (sorted by file name).
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Heuristic program JSON file; defaults to the task's baseline.
    #[arg(long)]
    heuristic: Option<PathBuf>,
    /// Instance size (generator mode).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sizes up to this bound use the exact reference solver.
    #[arg(long, default_value_t = 12)]
    exact_threshold: usize,
    /// Reference budget as a multiple of the default heuristic budget.
    #[arg(long, default_value_t = 10.0)]
    ref_multiplier: f64,
    /// Emit the two-line CSV form instead of JSON.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long)]
    task: Task,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    generations: usize,
    #[arg(long, value_enum, default_value = "offline")]
    synthesizer: SynthArg,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 8)]
    pop_gen: usize,
    #[arg(long, default_value_t = 8)]
    pop_heur: usize,
    #[arg(long, default_value_t = 2)]
    offspring_per_parent: usize,
    #[arg(long, default_value_t = 2)]
    elitism: usize,
    #[arg(long, default_value_t = 12)]
    exact_threshold: usize,
    #[arg(long, default_value_t = 10.0)]
    ref_multiplier: f64,
    /// Run directory; defaults to runs/<task>_n<n>_g<generations>_s<seed>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Chat-completions endpoint (llm synthesizer).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name (llm synthesizer).
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct TsplibArgs {
    /// TSPLIB EUC_2D file.
    #[arg(long)]
    file: PathBuf,
    /// Best-known sidecar CSV of name,cost rows.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// GLS guide program JSON; defaults to the distance baseline.
    #[arg(long)]
    heuristic: Option<PathBuf>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    stall: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report real-valued original-unit costs instead of TSPLIB nint.
    #[arg(long)]
    real_units: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory written by `evolve`.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct ExportCoordsArgs {
    /// Instance JSON files or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    instances: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse argv and run; never panics on user input. Returns the process
/// exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Gap(args) => cmd_gap(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Tsplib(args) => cmd_tsplib(args),
        Command::Report(args) => cmd_report(args),
        Command::ExportCoords(args) => cmd_export_coords(args),
    }
}

fn load_generator(path: &Path) -> Result<GeneratorProgram> {
    GeneratorProgram::from_json(&fs::read_to_string(path)?)
}

fn load_heuristic(path: Option<&Path>, task: Task) -> Result<HeuristicProgram> {
    match path {
        Some(p) => HeuristicProgram::from_json(&fs::read_to_string(p)?),
        None => Ok(baseline_heuristic(task.target())),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text)?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let program = match &args.program {
        Some(path) => load_generator(path)?,
        None => canonical_uniform(),
    };
    fs::create_dir_all(&args.out)?;
    for i in 0..args.count {
        let instance = gen_dsl::generate(&program, args.n, Seed(args.seed + i), args.kind.into())?;
        let path = args.out.join(format!("instance_{i:04}.json"));
        fs::write(&path, instance.to_json())?;
    }
    println!("wrote {} instances to {}", args.count, args.out.display());
    Ok(())
}

fn solve_with(
    task: Task,
    instance: &Instance,
    heuristic: &HeuristicProgram,
    seed: u64,
    budget: Option<u64>,
    stall: Option<u32>,
    iterations: Option<usize>,
) -> Result<SolveResult> {
    match task {
        Task::TspGls => {
            let mut params = GlsParams::with_seed(Seed(seed));
            if let Some(b) = budget {
                params.budget_ls_iters = b;
            }
            if let Some(s) = stall {
                params.stall_cycles = s;
            }
            solve_gls(instance, heuristic, &params)
        }
        Task::TspAco => {
            let mut params = AcoParams::with_seed(Seed(seed));
            if let Some(it) = iterations {
                params.iterations = it;
            }
            solve_aco_tsp(instance, heuristic, &params)
        }
        Task::OpAco => {
            let mut params = AcoParams::with_seed(Seed(seed));
            if let Some(it) = iterations {
                params.iterations = it;
            }
            solve_aco_op(instance, heuristic, &params)
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let instance = Instance::from_json(&fs::read_to_string(&args.instance)?)?;
    let heuristic = load_heuristic(args.heuristic.as_deref(), args.task)?;
    let result = solve_with(
        args.task,
        &instance,
        &heuristic,
        args.seed,
        args.budget,
        args.stall,
        args.iterations,
    )?;
    emit(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&result)?,
    )
}

fn sorted_instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Evaluation(format!(
            "no .json instances in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn cmd_gap(args: GapArgs) -> Result<()> {
    let policy = ReferencePolicy {
        exact_threshold: args.exact_threshold,
        ref_budget_multiplier: args.ref_multiplier,
    };
    policy.validate()?;
    let heuristic = load_heuristic(args.heuristic.as_deref(), args.task)?;
    let cache = ReferenceCache::new();
    let report = match (&args.generator, &args.instances) {
        (Some(path), None) => {
            let n = args.n.ok_or_else(|| {
                Error::Evaluation("--n is required with --generator".into())
            })?;
            evaluate_hardness_cached(
                &load_generator(path)?,
                &heuristic,
                n,
                args.batch,
                Seed(args.seed),
                args.task,
                &policy,
                &SolverBudget::default(),
                &cache,
            )?
        }
        (None, Some(dir)) => {
            let instances = sorted_instance_files(dir)?
                .iter()
                .map(|p| Instance::from_json(&fs::read_to_string(p)?))
                .collect::<Result<Vec<_>>>()?;
            evaluate_on_instances(
                &instances,
                &heuristic,
                Seed(args.seed),
                args.task,
                &policy,
                &SolverBudget::default(),
                &cache,
            )?
        }
        _ => unreachable!("clap group enforces exactly one subject"),
    };
    let text = if args.csv {
        format!("{}\n{}", crate::eval::GapReport::csv_header(), report.csv_row())
    } else {
        report.to_json()
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_evolve(args: EvolveArgs) -> Result<()> {
    let config = EvolutionConfig {
        task: args.task,
        n: args.n,
        batch: args.batch,
        pop_gen: args.pop_gen,
        pop_heur: args.pop_heur,
        generations: args.generations,
        offspring_per_parent: args.offspring_per_parent,
        elitism: args.elitism,
        synthesizer: match args.synthesizer {
            SynthArg::Offline => SynthesizerKind::Offline,
            SynthArg::Llm => SynthesizerKind::Llm,
        },
        master_seed: Seed(args.seed),
        reference: ReferencePolicy {
            exact_threshold: args.exact_threshold,
            ref_budget_multiplier: args.ref_multiplier,
        },
    };
    let run_dir = args.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!(
            "{}_n{}_g{}_s{}",
            config.task, config.n, config.generations, args.seed
        ))
    });
    let artifacts = match args.synthesizer {
        SynthArg::Offline => run_coevolution(&config, &run_dir, &mut OfflineSynthesizer)?,
        SynthArg::Llm => {
            let mut connector = ConnectorConfig::default();
            if let Some(endpoint) = args.endpoint {
                connector.endpoint = endpoint;
            }
            if let Some(model) = args.model {
                connector.model = model;
            }
            let mut synth = LlmSynthesizer::new(connector, HttpTransport);
            run_coevolution(&config, &run_dir, &mut synth)?
        }
    };
    let state = &artifacts.state;
    println!(
        "run {} finished at generation {}: champion generator {} (hardness {:.6}), champion heuristic {} (gap {:.6})",
        artifacts.run_dir.display(),
        state.generation,
        state.champion_generator,
        state.champion_generator().fitness,
        state.champion_heuristic,
        state.champion_heuristic().fitness,
    );
    Ok(())
}

#[derive(Serialize)]
struct TsplibReport {
    name: String,
    dimension: usize,
    cost_units: String,
    cost: f64,
    evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_known: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
}

fn cmd_tsplib(args: TsplibArgs) -> Result<()> {
    let file = match &args.sidecar {
        Some(sidecar) => parse_tsplib_with_sidecar(&args.file, sidecar)?,
        None => parse_tsplib(&args.file)?,
    };
    let instance = file.to_instance()?;
    let heuristic = load_heuristic(args.heuristic.as_deref(), Task::TspGls)?;
    let result = solve_with(
        Task::TspGls,
        &instance,
        &heuristic,
        args.seed,
        args.budget,
        args.stall,
        None,
    )?;
    let tour = result
        .tour()
        .ok_or_else(|| Error::Solver("GLS returned no tour".into()))?;
    let units = if args.real_units {
        CostUnits::Real
    } else {
        CostUnits::RoundedNint
    };
    let cost = file.original_cost(&tour.order, units)?;
    let report = TsplibReport {
        name: file.name.clone(),
        dimension: file.dimension,
        cost_units: if args.real_units { "real" } else { "nint" }.to_string(),
        cost,
        evaluations: result.evaluations,
        best_known: file.best_known,
        gap: file.gap_vs_best_known(cost),
    };
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn curve_markdown(state: &EvolutionState) -> Result<String> {
    let mut table = ReportTable::new(
        "Champion hardness and champion gap by generation",
        "generation",
        vec!["champion hardness".to_string(), "champion gap".to_string()],
        vec![6, 6],
    );
    for point in &state.curve {
        table.push_row(
            point.generation.to_string(),
            vec![point.champion_hardness, point.champion_gap],
        );
    }
    render_table(&table, TableFormat::Markdown)
}

fn fitness_markdown(state: &EvolutionState) -> Result<String> {
    let mut generators = ReportTable::new(
        format!("Generator population at generation {}", state.generation),
        "id",
        vec!["fitness".to_string(), "born".to_string()],
        vec![6, 0],
    );
    for g in &state.generators {
        generators.push_row(g.id.clone(), vec![g.fitness, g.born_gen as f64]);
    }
    let mut heuristics = ReportTable::new(
        format!("Heuristic population at generation {}", state.generation),
        "id",
        vec!["fitness".to_string(), "born".to_string()],
        vec![6, 0],
    );
    for h in &state.heuristics {
        heuristics.push_row(h.id.clone(), vec![h.fitness, h.born_gen as f64]);
    }
    Ok(format!(
        "{}\n{}",
        render_table(&generators, TableFormat::Markdown)?,
        render_table(&heuristics, TableFormat::Markdown)?
    ))
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let state = load_latest_state(&args.run)?.ok_or_else(|| {
        Error::Evolution(format!(
            "{} holds no completed generations",
            args.run.display()
        ))
    })?;
    fs::write(args.run.join("curve.csv"), curve_csv(&state))?;
    fs::write(args.run.join("curve.md"), curve_markdown(&state)?)?;
    fs::write(args.run.join("populations.md"), fitness_markdown(&state)?)?;
    println!(
        "wrote curve.csv, curve.md, populations.md to {}",
        args.run.display()
    );
    Ok(())
}

fn cmd_export_coords(args: ExportCoordsArgs) -> Result<()> {
    let mut files = Vec::new();
    for path in &args.instances {
        if path.is_dir() {
            files.extend(sorted_instance_files(path)?);
        } else {
            files.push(path.clone());
        }
    }
    let mut out = String::from("instance_id,node,x,y\n");
    for path in &files {
        let instance = Instance::from_json(&fs::read_to_string(path)?)?;
        for (i, c) in instance.coords.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", instance.id, i, c[0], c[1]));
        }
    }
    emit(args.out.as_deref(), &out)
}
