//! Steady-state evolutionary loop shared by the GA (12-gene GRH vectors)
//! and GP (expression trees): sample three individuals, breed the better
//! two, maybe mutate the child, evaluate it, and replace the worst of the
//! three. One step costs exactly one fitness evaluation; the run stops when
//! the evaluation budget is spent.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::energy::{EnergyParams, KinematicsConfig};
use crate::ga::{ga_crossover, ga_mutate, GrhParams, MutationScope};
use crate::gp::{crossover, mutate, random_tree, ExprTree, MAX_DEPTH};
use crate::instance::{Instance, ParseError};
use crate::priority::{GrhPriority, PriorityFunction, TreePriority};
use crate::rng::{substream, Stream};
use crate::scheme::{run_scheme, Scheme, SchemeError};

/// Best-fitness samples are recorded every this many evaluations.
pub const CONVERGENCE_INTERVAL: u64 = 500;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("budget of {budget} evaluations cannot cover the initial population of {population}")]
    BudgetTooSmall { budget: u64, population: usize },
    #[error("population of {0} is too small for 3-tournament selection")]
    PopulationTooSmall(usize),
    #[error("genome evaluation infeasible on instance {instance}: {source}")]
    Infeasible {
        instance: String,
        #[source]
        source: SchemeError,
    },
    #[error("instance {instance} cannot be simulated: {source}")]
    InvalidInstance {
        instance: String,
        #[source]
        source: ParseError,
    },
}

/// A genome representation the steady-state loop can evolve.
pub trait Representation: Sync {
    type Genome: Clone + Send + Sync;

    fn random_genome(&self, rng: &mut ChaCha8Rng) -> Self::Genome;
    fn crossover(&self, a: &Self::Genome, b: &Self::Genome, rng: &mut ChaCha8Rng) -> Self::Genome;
    fn mutate(&self, genome: &Self::Genome, rng: &mut ChaCha8Rng) -> Self::Genome;
    fn priority_fn(&self, genome: &Self::Genome) -> Box<dyn PriorityFunction>;
    fn serialize_genome(&self, genome: &Self::Genome) -> String;
    fn method_label(&self) -> &'static str;
}

/// Expression-tree genomes.
pub struct GpRepresentation {
    pub max_depth: usize,
}

impl Default for GpRepresentation {
    fn default() -> Self {
        GpRepresentation {
            max_depth: MAX_DEPTH,
        }
    }
}

impl Representation for GpRepresentation {
    type Genome = ExprTree;

    fn random_genome(&self, rng: &mut ChaCha8Rng) -> ExprTree {
        random_tree(self.max_depth, rng)
    }

    fn crossover(&self, a: &ExprTree, b: &ExprTree, rng: &mut ChaCha8Rng) -> ExprTree {
        crossover(a, b, rng)
    }

    fn mutate(&self, genome: &ExprTree, rng: &mut ChaCha8Rng) -> ExprTree {
        mutate(genome, rng)
    }

    fn priority_fn(&self, genome: &ExprTree) -> Box<dyn PriorityFunction> {
        Box::new(TreePriority::new(genome.clone()))
    }

    fn serialize_genome(&self, genome: &ExprTree) -> String {
        genome.to_sexpr()
    }

    fn method_label(&self) -> &'static str {
        "gp"
    }
}

/// 12-gene GRH parameter vectors.
pub struct GrhRepresentation {
    pub mutation_scope: MutationScope,
}

impl Default for GrhRepresentation {
    fn default() -> Self {
        GrhRepresentation {
            mutation_scope: MutationScope::SingleGene,
        }
    }
}

impl Representation for GrhRepresentation {
    type Genome = GrhParams;

    fn random_genome(&self, rng: &mut ChaCha8Rng) -> GrhParams {
        GrhParams::random(rng)
    }

    fn crossover(&self, a: &GrhParams, b: &GrhParams, rng: &mut ChaCha8Rng) -> GrhParams {
        ga_crossover(a, b, rng)
    }

    fn mutate(&self, genome: &GrhParams, rng: &mut ChaCha8Rng) -> GrhParams {
        ga_mutate(genome, rng, self.mutation_scope)
    }

    fn priority_fn(&self, genome: &GrhParams) -> Box<dyn PriorityFunction> {
        Box::new(GrhPriority::new(*genome))
    }

    fn serialize_genome(&self, genome: &GrhParams) -> String {
        genome.to_csv()
    }

    fn method_label(&self) -> &'static str {
        "grh-ga"
    }
}

/// Run parameters for one evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub population_size: usize,
    pub max_evaluations: u64,
    pub mutation_probability: f64,
    pub scheme: Scheme,
    pub seed: u64,
    /// Whether evaluating the random initial population consumes budget.
    pub count_init_evals: bool,
}

impl RunConfig {
    /// Full-scale defaults: population 1000, 50k evaluations, mutation
    /// probability 0.3 (restricted) / 0.1 (unrestricted).
    pub fn new(scheme: Scheme, seed: u64) -> Self {
        RunConfig {
            population_size: 1000,
            max_evaluations: 50_000,
            mutation_probability: match scheme {
                Scheme::Restricted => 0.3,
                Scheme::Unrestricted => 0.1,
            },
            scheme,
            seed,
            count_init_evals: true,
        }
    }
}

/// An evaluated genome.
#[derive(Debug, Clone)]
pub struct Individual<G> {
    pub genome: G,
    /// Total training-set energy; lower is better.
    pub fitness: f64,
    /// Evaluation index at which the fitness was computed.
    pub eval_stamp: u64,
}

/// Best-fitness samples over the course of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceLog {
    samples: Vec<(u64, f64)>,
}

impl ConvergenceLog {
    fn push(&mut self, evaluations: u64, best_fitness: f64) {
        if let Some(&(last, _)) = self.samples.last() {
            debug_assert!(evaluations > last, "samples must be strictly increasing");
        }
        self.samples.push((evaluations, best_fitness));
    }

    pub fn samples(&self) -> &[(u64, f64)] {
        &self.samples
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("evaluations,best_fitness\n");
        for (evals, fitness) in &self.samples {
            out.push_str(&format!("{evals},{fitness}\n"));
        }
        out
    }
}

/// Outcome of one evolution run.
#[derive(Debug, Clone)]
pub struct RunResult<G> {
    pub best: Individual<G>,
    pub log: ConvergenceLog,
    pub evaluations: u64,
    pub runtime: Duration,
}

/// The training environment fitness is measured against.
pub struct FitnessEnv<'a> {
    pub instances: &'a [Instance],
    pub scheme: Scheme,
    pub energy: &'a EnergyParams,
    pub kinematics: &'a KinematicsConfig,
}

impl FitnessEnv<'_> {
    /// Total episode energy of `pf` over the instance set. Instances are
    /// simulated in parallel but summed in instance order, so the result is
    /// identical regardless of worker count.
    pub fn fitness(&self, pf: &dyn PriorityFunction) -> Result<f64, EvolveError> {
        let energies: Result<Vec<f64>, EvolveError> = self
            .instances
            .par_iter()
            .map(|inst| self.episode_energy(inst, pf))
            .collect();
        Ok(energies?.into_iter().sum())
    }

    fn episode_energy(
        &self,
        inst: &Instance,
        pf: &dyn PriorityFunction,
    ) -> Result<f64, EvolveError> {
        let bay = inst
            .to_bay(self.kinematics.initial_crane_position)
            .map_err(|source| EvolveError::InvalidInstance {
                instance: inst.id.clone(),
                source,
            })?;
        run_scheme(self.scheme, bay, pf, self.energy, self.kinematics)
            .map(|ep| ep.total_energy)
            .map_err(|source| EvolveError::Infeasible {
                instance: inst.id.clone(),
                source,
            })
    }

    /// Fitness for use inside the evolutionary loop: a genome that
    /// deadlocks an instance is not a run-aborting condition but the worst
    /// possible individual, so it scores infinite energy and gets bred out.
    /// Broken instances still abort.
    fn fitness_or_penalty(&self, pf: &dyn PriorityFunction) -> Result<f64, EvolveError> {
        match self.fitness(pf) {
            Ok(fitness) => Ok(fitness),
            Err(EvolveError::Infeasible { .. }) => Ok(f64::INFINITY),
            Err(other) => Err(other),
        }
    }
}

/// One steady-state iteration: sample 3 distinct individuals uniformly,
/// breed the two with better (lower) fitness, mutate the child with the
/// given probability, evaluate it, and overwrite the worst of the three.
/// Ties are resolved by sampling order. Returns the replaced slot.
pub fn steady_state_step<R: Representation>(
    rep: &R,
    population: &mut [Individual<R::Genome>],
    rng_selection: &mut ChaCha8Rng,
    rng_operators: &mut ChaCha8Rng,
    mutation_probability: f64,
    env: &FitnessEnv<'_>,
    eval_stamp: u64,
) -> Result<usize, EvolveError> {
    if population.len() < 3 {
        return Err(EvolveError::PopulationTooSmall(population.len()));
    }
    let mut picks: Vec<usize> = Vec::with_capacity(3);
    while picks.len() < 3 {
        let i = rng_selection.random_range(0..population.len());
        if !picks.contains(&i) {
            picks.push(i);
        }
    }
    // Stable sort keeps sampling order among equal fitnesses.
    let mut order = picks;
    order.sort_by(|&a, &b| population[a].fitness.total_cmp(&population[b].fitness));
    let (first, second, worst) = (order[0], order[1], order[2]);

    let mut child = rep.crossover(
        &population[first].genome,
        &population[second].genome,
        rng_operators,
    );
    if rng_operators.random::<f64>() < mutation_probability {
        child = rep.mutate(&child, rng_operators);
    }
    let fitness = env.fitness_or_penalty(&*rep.priority_fn(&child))?;
    population[worst] = Individual {
        genome: child,
        fitness,
        eval_stamp,
    };
    Ok(worst)
}

/// Evolve a priority function. Initial-population evaluations count toward
/// the budget when `count_init_evals` is set (the default); the best-ever
/// individual is tracked across the whole run and the best fitness is
/// logged every [`CONVERGENCE_INTERVAL`] evaluations.
pub fn evolve<R: Representation>(
    rep: &R,
    config: &RunConfig,
    env: &FitnessEnv<'_>,
) -> Result<RunResult<R::Genome>, EvolveError> {
    if config.population_size < 3 {
        return Err(EvolveError::PopulationTooSmall(config.population_size));
    }
    if config.count_init_evals && config.max_evaluations < config.population_size as u64 {
        return Err(EvolveError::BudgetTooSmall {
            budget: config.max_evaluations,
            population: config.population_size,
        });
    }
    let started = Instant::now();
    let mut rng_init = substream(config.seed, Stream::Init);
    let mut rng_selection = substream(config.seed, Stream::Selection);
    let mut rng_operators = substream(config.seed, Stream::Operators);

    let mut evaluations: u64 = 0;
    let mut log = ConvergenceLog::default();
    let mut population: Vec<Individual<R::Genome>> = Vec::with_capacity(config.population_size);
    let mut best: Option<Individual<R::Genome>> = None;

    let note_best =
        |best: &mut Option<Individual<R::Genome>>,
         candidate: &Individual<R::Genome>| {
            if best
                .as_ref()
                .is_none_or(|b| candidate.fitness < b.fitness)
            {
                *best = Some(candidate.clone());
            }
        };

    for _ in 0..config.population_size {
        let genome = rep.random_genome(&mut rng_init);
        let fitness = env.fitness_or_penalty(&*rep.priority_fn(&genome))?;
        if config.count_init_evals {
            evaluations += 1;
        }
        let individual = Individual {
            genome,
            fitness,
            eval_stamp: evaluations,
        };
        note_best(&mut best, &individual);
        population.push(individual);
        if config.count_init_evals && evaluations.is_multiple_of(CONVERGENCE_INTERVAL) {
            log.push(evaluations, best.as_ref().expect("best set").fitness);
        }
    }

    while evaluations < config.max_evaluations {
        evaluations += 1;
        let replaced = steady_state_step(
            rep,
            &mut population,
            &mut rng_selection,
            &mut rng_operators,
            config.mutation_probability,
            env,
            evaluations,
        )?;
        note_best(&mut best, &population[replaced]);
        if evaluations.is_multiple_of(CONVERGENCE_INTERVAL) {
            log.push(evaluations, best.as_ref().expect("best set").fitness);
        }
    }

    let best = best.expect("population is non-empty");
    if log.samples().last().map(|&(e, _)| e) != Some(evaluations) {
        log.push(evaluations, best.fitness);
    }
    Ok(RunResult {
        best,
        log,
        evaluations,
        runtime: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_training_set, GeneratedKind};
    use crate::priority::{LowestStack, ScoreContext};
    use crate::scheme::run_restricted;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    fn env<'a>(
        instances: &'a [Instance],
        energy: &'a EnergyParams,
        kin: &'a KinematicsConfig,
    ) -> FitnessEnv<'a> {
        FitnessEnv {
            instances,
            scheme: Scheme::Restricted,
            energy,
            kinematics: kin,
        }
    }

    #[test]
    fn fitness_of_empty_set_is_zero() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let e = env(&[], &energy, &kin);
        assert_eq!(e.fitness(&LowestStack).unwrap(), 0.0);
    }

    #[test]
    fn fitness_matches_single_episode_and_is_additive() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let set = generate_training_set(GeneratedKind::CasertaLike, 10, 3);

        let single = env(&set[..1], &energy, &kin);
        let bay = set[0].to_bay(kin.initial_crane_position).unwrap();
        let direct = run_restricted(bay, &LowestStack, &energy, &kin).unwrap();
        assert_eq!(single.fitness(&LowestStack).unwrap(), direct.total_energy);

        let all = env(&set, &energy, &kin);
        let total = all.fitness(&LowestStack).unwrap();
        let sum: f64 = (0..set.len())
            .map(|i| env(&set[i..=i], &energy, &kin).fitness(&LowestStack).unwrap())
            .sum();
        assert!((total - sum).abs() < 1e-9 * sum.abs());
    }

    /// Test double that records crossover parents and counts evaluations.
    struct ProbeRep {
        crossings: Mutex<Vec<(u32, u32)>>,
        evaluations: AtomicUsize,
    }

    impl ProbeRep {
        fn new() -> Self {
            ProbeRep {
                crossings: Mutex::new(Vec::new()),
                evaluations: AtomicUsize::new(0),
            }
        }
    }

    struct ConstPf;
    impl PriorityFunction for ConstPf {
        fn score(&self, _ctx: &ScoreContext<'_>) -> f64 {
            0.0
        }
    }

    impl Representation for ProbeRep {
        type Genome = u32;

        fn random_genome(&self, rng: &mut ChaCha8Rng) -> u32 {
            rng.random_range(0..1000)
        }

        fn crossover(&self, a: &u32, b: &u32, _rng: &mut ChaCha8Rng) -> u32 {
            self.crossings.lock().unwrap().push((*a, *b));
            a + b
        }

        fn mutate(&self, genome: &u32, _rng: &mut ChaCha8Rng) -> u32 {
            *genome
        }

        fn priority_fn(&self, _genome: &u32) -> Box<dyn PriorityFunction> {
            self.evaluations.fetch_add(1, Ordering::SeqCst);
            Box::new(ConstPf)
        }

        fn serialize_genome(&self, genome: &u32) -> String {
            genome.to_string()
        }

        fn method_label(&self) -> &'static str {
            "probe"
        }
    }

    #[test]
    fn step_breeds_better_two_and_replaces_worst() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let e = env(&[], &energy, &kin);
        let rep = ProbeRep::new();
        let mut population = vec![
            Individual { genome: 111, fitness: 20.0, eval_stamp: 0 },
            Individual { genome: 222, fitness: 10.0, eval_stamp: 0 },
            Individual { genome: 333, fitness: 30.0, eval_stamp: 0 },
        ];
        let mut sel = substream(1, Stream::Selection);
        let mut ops = substream(1, Stream::Operators);
        let replaced =
            steady_state_step(&rep, &mut population, &mut sel, &mut ops, 0.0, &e, 1).unwrap();
        assert_eq!(replaced, 2, "the fitness-30 slot is replaced");
        assert_eq!(population[2].genome, 111 + 222);
        assert_eq!(population[2].eval_stamp, 1);
        let crossings = rep.crossings.lock().unwrap();
        assert_eq!(*crossings, vec![(222, 111)], "parents ordered best-first");
    }

    #[test]
    fn step_tie_break_follows_sampling_order() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let e = env(&[], &energy, &kin);
        let rep = ProbeRep::new();
        let make = |g| Individual { genome: g, fitness: 5.0, eval_stamp: 0 };
        let mut pop_a = vec![make(1), make(2), make(3)];
        let mut pop_b = vec![make(1), make(2), make(3)];
        let mut sel_a = substream(9, Stream::Selection);
        let mut ops_a = substream(9, Stream::Operators);
        let mut sel_b = substream(9, Stream::Selection);
        let mut ops_b = substream(9, Stream::Operators);
        let ra = steady_state_step(&rep, &mut pop_a, &mut sel_a, &mut ops_a, 0.0, &e, 1).unwrap();
        let rb = steady_state_step(&rep, &mut pop_b, &mut sel_b, &mut ops_b, 0.0, &e, 1).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(pop_a[ra].genome, pop_b[rb].genome);
    }

    #[test]
    fn budget_checks() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let e = env(&[], &energy, &kin);
        let rep = ProbeRep::new();
        let config = RunConfig {
            population_size: 10,
            max_evaluations: 5,
            mutation_probability: 0.0,
            scheme: Scheme::Restricted,
            seed: 1,
            count_init_evals: true,
        };
        assert!(matches!(
            evolve(&rep, &config, &e),
            Err(EvolveError::BudgetTooSmall { .. })
        ));
        let config = RunConfig {
            population_size: 2,
            max_evaluations: 50,
            ..config
        };
        assert!(matches!(
            evolve(&rep, &config, &e),
            Err(EvolveError::PopulationTooSmall(2))
        ));
    }

    #[test]
    fn zero_step_run_returns_best_of_initial_population() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let set = generate_training_set(GeneratedKind::CasertaLike, 3, 17);
        let e = env(&set, &energy, &kin);
        let rep = GpRepresentation::default();
        let config = RunConfig {
            population_size: 20,
            max_evaluations: 20,
            mutation_probability: 0.3,
            scheme: Scheme::Restricted,
            seed: 5,
            count_init_evals: true,
        };
        let result = evolve(&rep, &config, &e).unwrap();
        assert_eq!(result.evaluations, 20);
        // Re-derive the initial population from the same stream.
        let mut rng = substream(5, Stream::Init);
        let mut best = f64::INFINITY;
        for _ in 0..20 {
            let genome = rep.random_genome(&mut rng);
            let fitness = e.fitness_or_penalty(&*rep.priority_fn(&genome)).unwrap();
            best = best.min(fitness);
        }
        assert_eq!(result.best.fitness, best);
    }

    #[test]
    fn evaluation_accounting_is_exact() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let e = env(&[], &energy, &kin);
        let rep = ProbeRep::new();
        let config = RunConfig {
            population_size: 10,
            max_evaluations: 137,
            mutation_probability: 0.5,
            scheme: Scheme::Restricted,
            seed: 3,
            count_init_evals: true,
        };
        let result = evolve(&rep, &config, &e).unwrap();
        assert_eq!(result.evaluations, 137);
        assert_eq!(rep.evaluations.load(Ordering::SeqCst), 137);
    }

    #[test]
    fn best_fitness_is_monotone_and_log_increasing() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let set = generate_training_set(GeneratedKind::CasertaLike, 4, 23);
        let e = env(&set, &energy, &kin);
        let rep = GpRepresentation::default();
        let config = RunConfig {
            population_size: 10,
            max_evaluations: 1500,
            mutation_probability: 0.3,
            scheme: Scheme::Restricted,
            seed: 11,
            count_init_evals: true,
        };
        let result = evolve(&rep, &config, &e).unwrap();
        let samples = result.log.samples();
        assert!(!samples.is_empty());
        for pair in samples.windows(2) {
            assert!(pair[1].0 > pair[0].0);
            assert!(pair[1].1 <= pair[0].1, "best fitness must never rise");
        }
        assert_eq!(samples.last().unwrap().0, 1500);
    }

    #[test]
    fn evolution_is_seed_deterministic() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let set = generate_training_set(GeneratedKind::CasertaLike, 3, 29);
        let e = env(&set, &energy, &kin);
        let rep = GrhRepresentation::default();
        let config = RunConfig {
            population_size: 8,
            max_evaluations: 300,
            mutation_probability: 0.3,
            scheme: Scheme::Restricted,
            seed: 77,
            count_init_evals: true,
        };
        let a = evolve(&rep, &config, &e).unwrap();
        let b = evolve(&rep, &config, &e).unwrap();
        assert_eq!(a.best.genome, b.best.genome);
        assert_eq!(a.best.fitness.to_bits(), b.best.fitness.to_bits());
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn desk_run_gp_beats_lowest_stack_on_training_set() {
        let energy = EnergyParams::default();
        let kin = KinematicsConfig::default();
        let set = generate_training_set(GeneratedKind::CasertaLike, 20, 41);
        let e = env(&set, &energy, &kin);
        let tlp_fitness = e.fitness(&LowestStack).unwrap();
        let rep = GpRepresentation::default();
        let config = RunConfig {
            population_size: 100,
            max_evaluations: 2000,
            mutation_probability: 0.3,
            scheme: Scheme::Restricted,
            seed: 2,
            count_init_evals: true,
        };
        let result = evolve(&rep, &config, &e).unwrap();
        assert!(
            result.best.fitness < tlp_fitness,
            "evolved {} vs lowest-stack {tlp_fitness}",
            result.best.fitness
        );
    }
}
