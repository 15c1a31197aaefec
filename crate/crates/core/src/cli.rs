//! The `crp` command-line experiment harness.
//!
//! Subcommands: `generate` (seeded training/test sets), `train` (evolve
//! priority functions), `evaluate` (run a rule or evolved genome over a
//! test set), `calibrate` (pin the crane travel convention against a
//! reference dataset), and `report` (summary tables, significance matrix,
//! node census, runtimes).
//!
//! Exit codes: 0 success, 2 dataset unavailable/unreadable, 3 bad usage or
//! configuration, 4 infeasibility or partial failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::energy::{calibrate, default_config_space, CASERTA_RI_TOTAL, CASERTA_TLP_TOTAL};
use crate::evolve::{
    evolve, FitnessEnv, GpRepresentation, GrhRepresentation, Representation, RunConfig,
};
use crate::ga::{GrhParams, MutationScope, GENE_NAMES};
use crate::gp::ExprTree;
use crate::instance::{
    attach_weights, generate_training_set, instance_paths, load_adapted_dataset,
    load_instance_file, to_native, GeneratedKind,
};
use crate::priority::{GrhPriority, LowestStack, PriorityFunction, ReshuffleIndex, TreePriority};
use crate::scheme::{run_scheme, Scheme};
use crate::stats::{dunn_bonferroni, kruskal_wallis, summarize, ResultSample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATASET: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// Environment variable naming the root directory of the adapted reference
/// datasets (expected to contain `caserta/` and `zhu/` subdirectories).
pub const DATASET_ROOT_ENV: &str = "CRP_DATASET_ROOT";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn dataset(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATASET,
            message: message.into(),
        }
    }

    fn infeasible(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "crp",
    about = "Energy-aware container relocation: rules, hyperheuristic training, and experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Restricted,
    Unrestricted,
}

impl From<SchemeArg> for Scheme {
    fn from(value: SchemeArg) -> Scheme {
        match value {
            SchemeArg::Restricted => Scheme::Restricted,
            SchemeArg::Unrestricted => Scheme::Unrestricted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMethod {
    Gp,
    GrhGa,
}

impl TrainMethod {
    fn label(self) -> &'static str {
        match self {
            TrainMethod::Gp => "gp",
            TrainMethod::GrhGa => "grh-ga",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BuiltinRule {
    Tlp,
    Ri,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    CasertaLike,
    ZhuLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    Single,
    All,
}

#[derive(Args, Debug)]
struct CommonOpts {
    /// Worker threads for parallel evaluation (default: all cores).
    /// Results are identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Energy/kinematics configuration file (key = value format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded set of weighted instances in the native format.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Output directory; one `<id>.crp` file per instance.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evolve priority functions and persist per-repetition run artifacts.
    Train {
        #[arg(long, value_enum)]
        method: TrainMethod,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Directory of weighted training instances.
        #[arg(long)]
        train_set: PathBuf,
        /// Independent repetitions; repetition i uses seed + i.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 1000)]
        pop: usize,
        #[arg(long, default_value_t = 50_000)]
        evals: u64,
        /// Mutation probability (default 0.3 restricted / 0.1 unrestricted).
        #[arg(long)]
        mutation_prob: Option<f64>,
        /// Whether initial-population evaluations consume budget.
        #[arg(long, default_value_t = true)]
        count_init_evals: bool,
        /// GA uniform mutation scope: resample a single gene or all genes.
        #[arg(long, value_enum, default_value_t = ScopeArg::Single)]
        mutation_scope: ScopeArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate a built-in rule or evolved genome files over a test set.
    Evaluate {
        #[arg(long, value_enum, conflicts_with = "genome")]
        rule: Option<BuiltinRule>,
        /// Evolved genome file (tree s-expression or 12-gene CSV);
        /// repeatable.
        #[arg(long)]
        genome: Vec<PathBuf>,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Directory of weighted test instances.
        #[arg(long)]
        test_set: PathBuf,
        /// Attach seeded weights to instances that lack them.
        #[arg(long)]
        weights_seed: Option<u64>,
        /// Output CSV file (single source) or directory (multiple genomes);
        /// stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Pick the crane travel convention whose lowest-stack total lands
    /// closest to the published reference total, and freeze it to a file.
    Calibrate {
        /// Directory of adapted reference instances (default:
        /// $CRP_DATASET_ROOT/caserta).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Where to write the chosen configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Summaries, significance matrix, node census, and runtimes over
    /// completed training runs.
    Report {
        /// One run directory per method (as produced by `train --out`).
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Test set the stored genomes are re-evaluated on.
        #[arg(long)]
        test_set: PathBuf,
        /// Output directory for the CSV/Markdown tables.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    run_with(&args)
}

/// Run the CLI against an explicit argument vector (first element is the
/// program name). Used directly by integration tests.
pub fn run_with(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text.
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate {
            kind,
            count,
            seed,
            out,
            common,
        } => with_pool(&common, |config| {
            cmd_generate(kind, count, seed, &out, config)
        }),
        Command::Train {
            method,
            scheme,
            train_set,
            reps,
            pop,
            evals,
            mutation_prob,
            count_init_evals,
            mutation_scope,
            seed,
            out,
            common,
        } => with_pool(&common, |config| {
            cmd_train(TrainArgs {
                method,
                scheme: scheme.into(),
                train_set,
                reps,
                pop,
                evals,
                mutation_prob,
                count_init_evals,
                mutation_scope,
                seed,
                out,
                config,
            })
        }),
        Command::Evaluate {
            rule,
            genome,
            scheme,
            test_set,
            weights_seed,
            out,
            common,
        } => with_pool(&common, |config| {
            cmd_evaluate(
                rule,
                &genome,
                scheme.into(),
                &test_set,
                weights_seed,
                out.as_deref(),
                config,
            )
        }),
        Command::Calibrate {
            dataset,
            out,
            common,
        } => with_pool(&common, |config| {
            cmd_calibrate(dataset.as_deref(), out.as_deref(), config)
        }),
        Command::Report {
            runs,
            test_set,
            out,
            common,
        } => with_pool(&common, |config| {
            cmd_report(&runs, &test_set, out.as_deref(), config)
        }),
    }
}

/// Load the configuration file (or defaults) and run the command body
/// inside a rayon pool of the requested size, so `--jobs` bounds every
/// parallel section.
fn with_pool<F>(common: &CommonOpts, body: F) -> CliResult<()>
where
    F: FnOnce(Config) -> CliResult<()> + Send,
{
    let config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            Config::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(format!("cannot build thread pool: {e}")))?;
    pool.install(move || body(config))
}

fn cmd_generate(
    kind: KindArg,
    count: usize,
    seed: u64,
    out: &Path,
    _config: Config,
) -> CliResult<()> {
    if count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    let kind = match kind {
        KindArg::CasertaLike => GeneratedKind::CasertaLike,
        KindArg::ZhuLike => GeneratedKind::ZhuLike,
    };
    fs::create_dir_all(out).map_err(|e| CliError::usage(format!("{}: {e}", out.display())))?;
    let set = generate_training_set(kind, count, seed);
    for inst in &set {
        let path = out.join(format!("{}.crp", inst.id));
        fs::write(&path, to_native(inst))
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    println!("wrote {} instances to {}", set.len(), out.display());
    Ok(())
}

struct TrainArgs {
    method: TrainMethod,
    scheme: Scheme,
    train_set: PathBuf,
    reps: usize,
    pop: usize,
    evals: u64,
    mutation_prob: Option<f64>,
    count_init_evals: bool,
    mutation_scope: ScopeArg,
    seed: u64,
    out: PathBuf,
    config: Config,
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    let instances =
        load_adapted_dataset(&args.train_set).map_err(|e| CliError::dataset(e.to_string()))?;
    let mutation_probability = args.mutation_prob.unwrap_or(match args.scheme {
        Scheme::Restricted => 0.3,
        Scheme::Unrestricted => 0.1,
    });
    if !(0.0..=1.0).contains(&mutation_probability) {
        return Err(CliError::usage("--mutation-prob must be within [0, 1]"));
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.out.display())))?;

    for rep in 0..args.reps {
        let run_config = RunConfig {
            population_size: args.pop,
            max_evaluations: args.evals,
            mutation_probability,
            scheme: args.scheme,
            seed: args.seed + rep as u64,
            count_init_evals: args.count_init_evals,
        };
        let env = FitnessEnv {
            instances: &instances,
            scheme: args.scheme,
            energy: &args.config.energy,
            kinematics: &args.config.kinematics,
        };
        let rep_dir = args.out.join(format!("rep{rep:02}"));
        fs::create_dir_all(&rep_dir)
            .map_err(|e| CliError::usage(format!("{}: {e}", rep_dir.display())))?;
        let (genome_text, log_csv, runtime, best_fitness, evaluations) = match args.method {
            TrainMethod::Gp => {
                let rep_impl = GpRepresentation::default();
                let result = evolve(&rep_impl, &run_config, &env)
                    .map_err(|e| CliError::infeasible(e.to_string()))?;
                (
                    rep_impl.serialize_genome(&result.best.genome),
                    result.log.to_csv(),
                    result.runtime,
                    result.best.fitness,
                    result.evaluations,
                )
            }
            TrainMethod::GrhGa => {
                let rep_impl = GrhRepresentation {
                    mutation_scope: match args.mutation_scope {
                        ScopeArg::Single => MutationScope::SingleGene,
                        ScopeArg::All => MutationScope::AllGenes,
                    },
                };
                let result = evolve(&rep_impl, &run_config, &env)
                    .map_err(|e| CliError::infeasible(e.to_string()))?;
                (
                    rep_impl.serialize_genome(&result.best.genome),
                    result.log.to_csv(),
                    result.runtime,
                    result.best.fitness,
                    result.evaluations,
                )
            }
        };
        let mut snapshot = String::new();
        writeln!(snapshot, "method = {}", args.method.label()).unwrap();
        writeln!(snapshot, "scheme = {}", args.scheme.label()).unwrap();
        writeln!(snapshot, "population_size = {}", run_config.population_size).unwrap();
        writeln!(snapshot, "max_evaluations = {}", run_config.max_evaluations).unwrap();
        writeln!(snapshot, "mutation_probability = {mutation_probability}").unwrap();
        writeln!(snapshot, "seed = {}", run_config.seed).unwrap();
        writeln!(snapshot, "count_init_evals = {}", run_config.count_init_evals).unwrap();
        snapshot.push_str(&args.config.to_text());
        let writes = [
            (rep_dir.join("config.txt"), snapshot),
            (
                rep_dir.join("genome.txt"),
                format!("{}\n", genome_text.trim_end()),
            ),
            (rep_dir.join("convergence.csv"), log_csv),
            (
                rep_dir.join("runtime.txt"),
                format!("{}\n", runtime.as_secs_f64()),
            ),
        ];
        for (path, contents) in writes {
            fs::write(&path, contents)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        }
        println!(
            "rep {rep:02}: best fitness {best_fitness} after {evaluations} evaluations ({:.1}s)",
            runtime.as_secs_f64()
        );
    }
    Ok(())
}

/// A parsed genome file: either an expression tree or a GRH vector.
enum Genome {
    Tree(ExprTree),
    Grh(GrhParams),
}

impl Genome {
    fn priority(&self) -> Box<dyn PriorityFunction> {
        match self {
            Genome::Tree(tree) => Box::new(TreePriority::new(tree.clone())),
            Genome::Grh(params) => Box::new(GrhPriority::new(*params)),
        }
    }
}

fn load_genome(path: &Path) -> CliResult<Genome> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    if first.starts_with(GENE_NAMES[0]) {
        GrhParams::from_csv(&text)
            .map(Genome::Grh)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    } else {
        ExprTree::parse(text.trim())
            .map(Genome::Tree)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

struct EvalRow {
    instance_id: String,
    moves: usize,
    relocations: usize,
    total_energy: f64,
}

/// Stream every instance file through one episode; failures are collected
/// instead of aborting the sweep.
fn evaluate_rule(
    pf: &dyn PriorityFunction,
    paths: &[PathBuf],
    scheme: Scheme,
    weights_seed: Option<u64>,
    config: &Config,
) -> (Vec<EvalRow>, Vec<String>) {
    use rayon::prelude::*;
    let results: Vec<Result<EvalRow, String>> = paths
        .par_iter()
        .map(|path| {
            let inst = load_instance_file(path).map_err(|e| e.to_string())?;
            let inst = match (inst.weights.is_some(), weights_seed) {
                (false, Some(seed)) => {
                    attach_weights(&inst, seed).map_err(|e| format!("{}: {e}", path.display()))?
                }
                _ => inst,
            };
            let bay = inst
                .to_bay(config.kinematics.initial_crane_position)
                .map_err(|e| format!("{}: {e}", inst.id))?;
            let episode = run_scheme(scheme, bay, pf, &config.energy, &config.kinematics)
                .map_err(|e| format!("{}: {e}", inst.id))?;
            Ok(EvalRow {
                instance_id: inst.id,
                moves: episode.moves.len(),
                relocations: episode.relocations(),
                total_energy: episode.total_energy,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(message) => failures.push(message),
        }
    }
    (rows, failures)
}

fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from("instance_id,moves,relocations,total_energy\n");
    let mut total_moves = 0usize;
    let mut total_relocations = 0usize;
    let mut total_energy = 0.0f64;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.instance_id, row.moves, row.relocations, row.total_energy
        )
        .unwrap();
        total_moves += row.moves;
        total_relocations += row.relocations;
        total_energy += row.total_energy;
    }
    writeln!(out, "total,{total_moves},{total_relocations},{total_energy}").unwrap();
    out
}

fn cmd_evaluate(
    rule: Option<BuiltinRule>,
    genomes: &[PathBuf],
    scheme: Scheme,
    test_set: &Path,
    weights_seed: Option<u64>,
    out: Option<&Path>,
    config: Config,
) -> CliResult<()> {
    let paths = instance_paths(test_set).map_err(|e| CliError::dataset(e.to_string()))?;
    let mut sources: Vec<(String, Box<dyn PriorityFunction>)> = Vec::new();
    match (rule, genomes.is_empty()) {
        (Some(BuiltinRule::Tlp), true) => sources.push(("tlp".into(), Box::new(LowestStack))),
        (Some(BuiltinRule::Ri), true) => sources.push(("ri".into(), Box::new(ReshuffleIndex))),
        (None, false) => {
            for path in genomes {
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("genome")
                    .to_string();
                sources.push((stem, load_genome(path)?.priority()));
            }
        }
        _ => {
            return Err(CliError::usage(
                "pass exactly one of --rule or one or more --genome files",
            ))
        }
    }

    let multi = sources.len() > 1;
    if multi {
        let dir = out.ok_or_else(|| {
            CliError::usage("--out must be a directory when evaluating several genomes")
        })?;
        fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    }

    let mut any_failures = false;
    for (name, pf) in &sources {
        let (rows, failures) = evaluate_rule(pf.as_ref(), &paths, scheme, weights_seed, &config);
        for failure in &failures {
            eprintln!("warning [{name}]: {failure}");
        }
        any_failures |= !failures.is_empty();
        let csv = rows_to_csv(&rows);
        let total: f64 = rows.iter().map(|r| r.total_energy).sum();
        match (multi, out) {
            (true, Some(dir)) => {
                let path = dir.join(format!("{name}.csv"));
                fs::write(&path, &csv)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            }
            (false, Some(file)) => {
                fs::write(file, &csv)
                    .map_err(|e| CliError::usage(format!("{}: {e}", file.display())))?;
            }
            (_, None) => print!("{csv}"),
        }
        println!("{name}: {} instances, total energy {total}", rows.len());
    }
    if any_failures {
        Err(CliError::infeasible(
            "some instances could not be evaluated (see warnings above)",
        ))
    } else {
        Ok(())
    }
}

fn cmd_calibrate(dataset: Option<&Path>, out: Option<&Path>, config: Config) -> CliResult<()> {
    let dataset_dir = match dataset {
        Some(d) => d.to_path_buf(),
        None => match std::env::var(DATASET_ROOT_ENV) {
            Ok(root) => Path::new(&root).join("caserta"),
            Err(_) => {
                return Err(CliError::dataset(format!(
                    "pass --dataset or set {DATASET_ROOT_ENV}"
                )))
            }
        },
    };
    let instances =
        load_adapted_dataset(&dataset_dir).map_err(|e| CliError::dataset(e.to_string()))?;
    let outcomes = calibrate(
        &default_config_space(),
        &instances,
        &config.energy,
        CASERTA_TLP_TOTAL,
    )
    .map_err(|e| CliError::dataset(e.to_string()))?;
    println!("candidate conventions ranked by deviation from {CASERTA_TLP_TOTAL}:");
    for o in &outcomes {
        println!(
            "  empty_moves={} truck_tier={} -> total {:.0} (deviation {:.0})",
            o.config.count_empty_moves, o.config.truck_tier, o.total, o.deviation
        );
    }
    let best = &outcomes[0];
    // Cross-check the runner-up baseline under the chosen convention.
    let ri_total: f64 = {
        use rayon::prelude::*;
        let energies: Result<Vec<f64>, String> = instances
            .par_iter()
            .map(|inst| {
                let bay = inst
                    .to_bay(best.config.initial_crane_position)
                    .map_err(|e| e.to_string())?;
                run_scheme(
                    Scheme::Restricted,
                    bay,
                    &ReshuffleIndex,
                    &config.energy,
                    &best.config,
                )
                .map(|ep| ep.total_energy)
                .map_err(|e| e.to_string())
            })
            .collect();
        energies.map_err(CliError::infeasible)?.into_iter().sum()
    };
    println!("cross-check: reshuffle-index total {ri_total:.0} (reference {CASERTA_RI_TOTAL})");
    let chosen = Config {
        energy: config.energy,
        kinematics: best.config,
    };
    let text = format!(
        "# frozen by `crp calibrate`\n\
         # lowest-stack total {:.0} vs reference {}\n\
         # reshuffle-index total {ri_total:.0} vs reference {}\n\
         {}",
        best.total,
        CASERTA_TLP_TOTAL,
        CASERTA_RI_TOTAL,
        chosen.to_text()
    );
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Per-repetition artifacts reloaded from a run directory.
struct LoadedRun {
    label: String,
    scheme: Scheme,
    genomes: Vec<Genome>,
    runtimes: Vec<f64>,
}

fn parse_snapshot_key(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim().to_string())
    })
}

fn load_run_dir(dir: &Path) -> CliResult<LoadedRun> {
    let label = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("run")
        .to_string();
    let mut rep_dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            let name = path.file_name()?.to_str()?;
            (path.is_dir() && name.starts_with("rep")).then_some(path)
        })
        .collect();
    rep_dirs.sort();
    if rep_dirs.is_empty() {
        return Err(CliError::usage(format!(
            "missing artifacts: {} holds no rep* directories",
            dir.display()
        )));
    }
    let mut genomes = Vec::new();
    let mut runtimes = Vec::new();
    let mut scheme = Scheme::Restricted;
    for rep_dir in &rep_dirs {
        let snapshot_path = rep_dir.join("config.txt");
        let snapshot = fs::read_to_string(&snapshot_path).map_err(|e| {
            CliError::usage(format!(
                "missing artifacts: {}: {e}",
                snapshot_path.display()
            ))
        })?;
        let scheme_label = parse_snapshot_key(&snapshot, "scheme")
            .ok_or_else(|| CliError::usage(format!("{}: no scheme", snapshot_path.display())))?;
        scheme = scheme_label.parse().map_err(CliError::usage)?;
        genomes.push(load_genome(&rep_dir.join("genome.txt"))?);
        let runtime_text = fs::read_to_string(rep_dir.join("runtime.txt")).map_err(|e| {
            CliError::usage(format!("missing artifacts: {}: {e}", rep_dir.display()))
        })?;
        runtimes.push(
            runtime_text
                .trim()
                .parse::<f64>()
                .map_err(|e| CliError::usage(format!("{}: runtime: {e}", rep_dir.display())))?,
        );
    }
    Ok(LoadedRun {
        label,
        scheme,
        genomes,
        runtimes,
    })
}

fn cmd_report(
    runs: &[PathBuf],
    test_set: &Path,
    out: Option<&Path>,
    config: Config,
) -> CliResult<()> {
    let loaded: Vec<LoadedRun> = runs
        .iter()
        .map(|d| load_run_dir(d))
        .collect::<CliResult<_>>()?;
    let paths = instance_paths(test_set).map_err(|e| CliError::dataset(e.to_string()))?;

    // Re-evaluate every stored genome on the held-out test set.
    let mut samples: Vec<ResultSample> = Vec::new();
    for run in &loaded {
        let mut totals = Vec::with_capacity(run.genomes.len());
        for genome in &run.genomes {
            let (rows, failures) =
                evaluate_rule(genome.priority().as_ref(), &paths, run.scheme, None, &config);
            if !failures.is_empty() {
                return Err(CliError::infeasible(format!(
                    "{}: {} instances failed during re-evaluation",
                    run.label,
                    failures.len()
                )));
            }
            totals.push(rows.iter().map(|r| r.total_energy).sum());
        }
        samples.push(ResultSample::new(run.label.clone(), totals));
    }

    let mut summary_csv = String::from("method,reps,min,median,max,sd\n");
    let mut summary_md =
        String::from("| Method | Min | Median | Max | SD |\n|---|---:|---:|---:|---:|\n");
    for s in &samples {
        let stats = summarize(&s.values).map_err(|e| CliError::usage(e.to_string()))?;
        writeln!(
            summary_csv,
            "{},{},{},{},{},{}",
            s.name,
            s.values.len(),
            stats.min,
            stats.median,
            stats.max,
            stats.sd
        )
        .unwrap();
        writeln!(
            summary_md,
            "| {} | {:.0} | {:.0} | {:.0} | {:.0} |",
            s.name, stats.min, stats.median, stats.max, stats.sd
        )
        .unwrap();
    }

    // Pairwise significance: Kruskal-Wallis gate, then Dunn/Bonferroni.
    let mut significance_md = String::new();
    let mut significance_csv = String::new();
    if samples.len() >= 2 {
        let kw = kruskal_wallis(&samples).map_err(|e| CliError::usage(e.to_string()))?;
        writeln!(
            significance_md,
            "Kruskal-Wallis H = {:.4}, p = {:.6}\n",
            kw.h, kw.p
        )
        .unwrap();
        if kw.p < 0.05 {
            let dunn =
                dunn_bonferroni(&samples, 0.05).map_err(|e| CliError::usage(e.to_string()))?;
            let names: Vec<&str> = samples.iter().map(|s| s.name.as_str()).collect();
            writeln!(significance_md, "| | {} |", names.join(" | ")).unwrap();
            writeln!(significance_md, "|---|{}", "---|".repeat(names.len())).unwrap();
            writeln!(significance_csv, "method,{}", names.join(",")).unwrap();
            for (i, name) in names.iter().enumerate() {
                let mut md_row = format!("| {name} |");
                let mut csv_row = name.to_string();
                for j in 0..names.len() {
                    let cell = if i == j {
                        "-".to_string()
                    } else {
                        dunn.relations[i][j].symbol().to_string()
                    };
                    write!(md_row, " {cell} |").unwrap();
                    write!(csv_row, ",{cell}").unwrap();
                }
                significance_md.push_str(&md_row);
                significance_md.push('\n');
                significance_csv.push_str(&csv_row);
                significance_csv.push('\n');
            }
        } else {
            significance_md
                .push_str("No significant differences at p < 0.05; pairwise matrix omitted.\n");
        }
    } else {
        significance_md
            .push_str("Significance matrix omitted: need at least two run sets to compare.\n");
    }

    // Node census over every evolved tree.
    let trees: Vec<ExprTree> = loaded
        .iter()
        .flat_map(|run| {
            run.genomes.iter().filter_map(|g| match g {
                Genome::Tree(t) => Some(t.clone()),
                Genome::Grh(_) => None,
            })
        })
        .collect();
    let census_csv = if trees.is_empty() {
        None
    } else {
        let census: BTreeMap<&'static str, usize> = ExprTree::node_census(&trees);
        let mut csv = String::from("node,count\n");
        for (label, count) in census {
            writeln!(csv, "{label},{count}").unwrap();
        }
        Some(csv)
    };

    let mut runtime_csv = String::from("method,reps,mean_seconds,min_seconds,max_seconds\n");
    let mut runtime_md = String::from("| Method | Mean s | Min s | Max s |\n|---|---:|---:|---:|\n");
    for run in &loaded {
        let stats = summarize(&run.runtimes).map_err(|e| CliError::usage(e.to_string()))?;
        let mean = run.runtimes.iter().sum::<f64>() / run.runtimes.len() as f64;
        writeln!(
            runtime_csv,
            "{},{},{},{},{}",
            run.label,
            run.runtimes.len(),
            mean,
            stats.min,
            stats.max
        )
        .unwrap();
        writeln!(
            runtime_md,
            "| {} | {:.1} | {:.1} | {:.1} |",
            run.label, mean, stats.min, stats.max
        )
        .unwrap();
    }

    println!("## Summary (total energy on test set)\n");
    println!("{summary_md}");
    println!("## Pairwise significance\n");
    println!("{significance_md}");
    match &census_csv {
        Some(_) => println!("Node census written for {} evolved trees.", trees.len()),
        None => println!("Node census omitted: no tree genomes among the runs."),
    }
    println!("\n## Training runtimes\n");
    println!("{runtime_md}");

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
        let mut writes: Vec<(PathBuf, String)> = vec![
            (dir.join("summary.csv"), summary_csv),
            (dir.join("summary.md"), summary_md),
            (dir.join("significance.md"), significance_md),
            (dir.join("runtime.csv"), runtime_csv),
            (dir.join("runtime.md"), runtime_md),
        ];
        if !significance_csv.is_empty() {
            writes.push((dir.join("significance.csv"), significance_csv));
        }
        if let Some(census) = census_csv {
            writes.push((dir.join("node_census.csv"), census));
        }
        for (path, contents) in writes {
            fs::write(&path, contents)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        }
        println!("\ntables written to {}", dir.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genome_sniffing() {
        let dir = tempfile::tempdir().unwrap();
        let tree_path = dir.path().join("tree.txt");
        fs::write(&tree_path, "(add n_s k_s)\n").unwrap();
        assert!(matches!(load_genome(&tree_path).unwrap(), Genome::Tree(_)));
        let leaf_path = dir.path().join("leaf.txt");
        fs::write(&leaf_path, "n_s\n").unwrap();
        assert!(matches!(load_genome(&leaf_path).unwrap(), Genome::Tree(_)));
        let grh_path = dir.path().join("grh.txt");
        let params = GrhParams::zeros();
        fs::write(&grh_path, params.to_csv()).unwrap();
        assert!(matches!(load_genome(&grh_path).unwrap(), Genome::Grh(_)));
    }

    #[test]
    fn snapshot_key_parsing() {
        let text = "method = gp\nscheme = restricted\nseed = 7\n";
        assert_eq!(parse_snapshot_key(text, "method").as_deref(), Some("gp"));
        assert_eq!(parse_snapshot_key(text, "seed").as_deref(), Some("7"));
        assert_eq!(parse_snapshot_key(text, "missing"), None);
    }
}
