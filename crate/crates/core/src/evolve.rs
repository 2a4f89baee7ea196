//! The evolutionary loop: population lifecycle, sequential fitness
//! commitment against the growing demonstration pool, elitist migration,
//! and the random/training baseline runners.
//!
//! Offspring rollouts are independent and run as a batch (parallel when the
//! `parallel` feature is on); scoring and pool commitment stay strictly
//! sequential in id order because every individual is evaluated against the
//! pool exactly as it stood at that moment. Fitness is cached once and
//! never recomputed, so early individuals keep the score they earned
//! against a smaller pool.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{self, Genome, GenomeSpec};
use crate::env::{Env, EnvError, Position};
use crate::metrics::{self, DemoPool, FitnessBreakdown, FitnessMode, PoolEntry};
use crate::policy::{rollout, RolloutMode, TabularPolicy, Trajectory};
use crate::runlog::{DemoRecord, GenerationRecord, MemberRecord, RunLog, RunMeta, SCHEMA_VERSION};

/// Evolution hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default = "default_generations")]
    pub generations: u32,
    #[serde(default = "default_crossover")]
    pub crossover_prob: f64,
    #[serde(default = "default_mutation")]
    pub mutation_prob: f64,
    #[serde(default = "default_tournament")]
    pub tournament_size: usize,
    pub seed: u64,
    pub fitness_mode: FitnessMode,
    #[serde(default)]
    pub rollout_mode: RolloutMode,
}

fn default_population() -> usize {
    10
}
fn default_generations() -> u32 {
    40
}
fn default_crossover() -> f64 {
    0.75
}
fn default_mutation() -> f64 {
    0.5
}
fn default_tournament() -> usize {
    3
}

impl EvolveConfig {
    pub fn new(seed: u64, fitness_mode: FitnessMode) -> Self {
        Self {
            population_size: default_population(),
            generations: default_generations(),
            crossover_prob: default_crossover(),
            mutation_prob: default_mutation(),
            tournament_size: default_tournament(),
            seed,
            fitness_mode,
            rollout_mode: RolloutMode::Greedy,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.population_size < 2 {
            return Err(EnvError::InvalidSpec("population_size must be >= 2".into()));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(EnvError::InvalidSpec(format!("{name} must be in [0, 1]")));
            }
        }
        if self.tournament_size < 2 || self.tournament_size > self.population_size {
            return Err(EnvError::InvalidSpec(
                "tournament_size must be in [2, population_size]".into(),
            ));
        }
        Ok(())
    }
}

/// An evaluated population member. The fitness breakdown is the one cached
/// at first evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub genome: Genome,
    pub initial_state: Position,
    pub trajectory: Trajectory,
    pub fitness: FitnessBreakdown,
    pub birth_generation: u32,
}

/// An offspring before evaluation.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: u64,
    pub genome: Genome,
    pub birth_generation: u32,
}

/// Members kept in ascending id order for deterministic iteration.
#[derive(Debug, Clone, Default)]
pub struct Population {
    pub members: Vec<Individual>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Shared context of one run.
#[derive(Clone, Copy)]
pub struct RunContext<'a> {
    pub env: &'a Env,
    pub policy: &'a TabularPolicy,
    pub genome_spec: &'a GenomeSpec,
}

fn demo_rng(run_seed: u64, id: u64) -> ChaCha8Rng {
    let mixed = run_seed
        ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Roll out one trajectory per `(id, start)` pair. Items are independent;
/// this is the data-parallel inner loop of a generation.
pub fn rollout_batch(
    ctx: RunContext<'_>,
    starts: &[(u64, Position)],
    mode: RolloutMode,
    run_seed: u64,
) -> Vec<Trajectory> {
    crate::batch::map(starts, |&(id, s0)| {
        let mut rng = demo_rng(run_seed, id);
        rollout(ctx.env, ctx.policy, s0, mode, &mut rng).expect("decoded starts are legal")
    })
}

/// Sequential twin of [`rollout_batch`]; produces identical output.
pub fn rollout_batch_seq(
    ctx: RunContext<'_>,
    starts: &[(u64, Position)],
    mode: RolloutMode,
    run_seed: u64,
) -> Vec<Trajectory> {
    crate::batch::map_seq(starts, |&(id, s0)| {
        let mut rng = demo_rng(run_seed, id);
        rollout(ctx.env, ctx.policy, s0, mode, &mut rng).expect("decoded starts are legal")
    })
}

/// Evaluate candidates in id order: batch rollouts first, then sequential
/// scoring against the pool as it stands when each candidate's turn comes,
/// committing each trajectory before the next candidate is scored.
pub fn evaluate_candidates(
    ctx: RunContext<'_>,
    candidates: Vec<Candidate>,
    pool: &mut DemoPool,
    config: &EvolveConfig,
) -> Vec<Individual> {
    debug_assert!(candidates.windows(2).all(|w| w[0].id < w[1].id));
    let starts: Vec<(u64, Position)> = candidates
        .iter()
        .map(|c| {
            let s0 = ctx
                .genome_spec
                .decode_start(&c.genome, ctx.env)
                .expect("genome length matches spec");
            (c.id, s0)
        })
        .collect();
    let trajectories = rollout_batch(ctx, &starts, config.rollout_mode, config.seed);

    let mut out = Vec::with_capacity(candidates.len());
    for ((candidate, (id, s0)), trajectory) in candidates.into_iter().zip(starts).zip(trajectories)
    {
        let fitness = metrics::score(&trajectory, None, pool, config.fitness_mode, ctx.env)
            .expect("rollout trajectories are non-empty");
        pool.insert(
            id,
            PoolEntry {
                trajectory: trajectory.clone(),
                d_local: fitness.d_local,
                certainty: fitness.certainty,
            },
        );
        out.push(Individual {
            id,
            genome: candidate.genome,
            initial_state: s0,
            trajectory,
            fitness,
            birth_generation: candidate.birth_generation,
        });
    }
    out
}

/// Build and evaluate the initial population against the initially empty
/// demonstration pool.
pub fn init_population(
    ctx: RunContext<'_>,
    config: &EvolveConfig,
    rng: &mut ChaCha8Rng,
    next_id: &mut u64,
) -> (Population, DemoPool) {
    let candidates: Vec<Candidate> = (0..config.population_size)
        .map(|_| {
            let id = *next_id;
            *next_id += 1;
            Candidate {
                id,
                genome: encoding::random_genome(ctx.genome_spec, rng),
                birth_generation: 0,
            }
        })
        .collect();
    let mut pool = DemoPool::new();
    let members = evaluate_candidates(ctx, candidates, &mut pool, config);
    (Population { members }, pool)
}

/// Tournament selection: sample `sigma` distinct members (with replacement
/// if `sigma` exceeds the population) and return the fittest, ties going to
/// the lowest id.
pub fn tournament_select<'a, R: Rng>(
    population: &'a Population,
    sigma: usize,
    rng: &mut R,
) -> &'a Individual {
    let n = population.len();
    assert!(n > 0, "tournament over empty population");
    let mut best: Option<&Individual> = None;
    let consider = |member: &'a Individual, best: &mut Option<&'a Individual>| match best {
        Some(b) if member.fitness.total < b.fitness.total => {}
        Some(b) if member.fitness.total == b.fitness.total && member.id >= b.id => {}
        _ => *best = Some(member),
    };
    if sigma <= n {
        let mut indices: Vec<usize> = (0..n).collect();
        for i in 0..sigma {
            let j = rng.gen_range(i..n);
            indices.swap(i, j);
            consider(&population.members[indices[i]], &mut best);
        }
    } else {
        for _ in 0..sigma {
            let idx = rng.gen_range(0..n);
            consider(&population.members[idx], &mut best);
        }
    }
    best.expect("sigma >= 1")
}

/// Generate unevaluated offspring: one mutant per member with probability
/// `mutation_prob` (originals are retained), then `floor(p/2)` tournament
/// pairs each producing two crossover children with probability
/// `crossover_prob`.
pub fn make_offspring(
    population: &Population,
    config: &EvolveConfig,
    rng: &mut ChaCha8Rng,
    next_id: &mut u64,
    generation: u32,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for member in &population.members {
        if rng.gen::<f64>() < config.mutation_prob {
            let id = *next_id;
            *next_id += 1;
            out.push(Candidate {
                id,
                genome: encoding::mutate(&member.genome, rng),
                birth_generation: generation,
            });
        }
    }
    for _ in 0..population.len() / 2 {
        let a = tournament_select(population, config.tournament_size, rng);
        let b = tournament_select(population, config.tournament_size, rng);
        if rng.gen::<f64>() < config.crossover_prob {
            let (c1, c2) = encoding::crossover_single_point(&a.genome, &b.genome, rng)
                .expect("genomes share one spec");
            for genome in [c1, c2] {
                let id = *next_id;
                *next_id += 1;
                out.push(Candidate {
                    id,
                    genome,
                    birth_generation: generation,
                });
            }
        }
    }
    out
}

/// Keep the `population_size` fittest of parents plus offspring (ties favor
/// elders via lower id) and prune extinct demonstrations from the pool.
pub fn migrate(
    population: Population,
    offspring: Vec<Individual>,
    population_size: usize,
    pool: &mut DemoPool,
) -> Population {
    let mut all: Vec<Individual> = population.members;
    all.extend(offspring);
    all.sort_by(|a, b| {
        b.fitness
            .total
            .partial_cmp(&a.fitness.total)
            .expect("fitness totals are finite")
            .then(a.id.cmp(&b.id))
    });
    all.truncate(population_size);
    all.sort_by_key(|ind| ind.id);
    let survivors = all.iter().map(|ind| ind.id).collect();
    pool.retain_ids(&survivors);
    Population { members: all }
}

fn record_generation(
    generation: u32,
    population: &Population,
    pool: &DemoPool,
    offspring_count: u32,
) -> GenerationRecord {
    GenerationRecord {
        generation,
        members: population
            .members
            .iter()
            .map(|m| MemberRecord {
                id: m.id,
                birth_generation: m.birth_generation,
                fitness: m.fitness,
            })
            .collect(),
        fidelity: metrics::fidelity(pool).expect("pool is non-empty after evaluation"),
        offspring_count,
        survivor_ids: population.members.iter().map(|m| m.id).collect(),
    }
}

fn final_demos(pool: &DemoPool, population: &Population) -> Vec<DemoRecord> {
    pool.iter()
        .map(|(id, entry)| DemoRecord {
            id,
            genome: population
                .members
                .iter()
                .find(|m| m.id == id)
                .map(|m| m.genome.clone()),
            trajectory: entry.trajectory.clone(),
            d_local: entry.d_local,
            certainty: entry.certainty,
        })
        .collect()
}

/// Run the full optimization: initialize, then `generations` rounds of
/// offspring generation, sequential evaluation, and elitist migration.
pub fn run(ctx: RunContext<'_>, config: &EvolveConfig) -> RunLog {
    run_tagged(ctx, config, config.fitness_mode.as_str())
}

fn run_tagged(ctx: RunContext<'_>, config: &EvolveConfig, kind: &str) -> RunLog {
    config.validate().expect("invalid evolve config");
    ctx.env.validate().expect("invalid environment spec");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut next_id = 0u64;

    let (mut population, mut pool) = init_population(ctx, config, &mut rng, &mut next_id);
    let mut generations = Vec::with_capacity(config.generations as usize + 1);
    generations.push(record_generation(0, &population, &pool, 0));

    for generation in 1..=config.generations {
        let offspring = make_offspring(&population, config, &mut rng, &mut next_id, generation);
        let offspring_count = offspring.len() as u32;
        let evaluated = evaluate_candidates(ctx, offspring, &mut pool, config);
        population = migrate(population, evaluated, config.population_size, &mut pool);
        generations.push(record_generation(
            generation,
            &population,
            &pool,
            offspring_count,
        ));
    }

    RunLog {
        meta: RunMeta {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            seed: config.seed,
            env: ctx.env.clone(),
            evolve: Some(config.clone()),
            bits_per_dim: ctx.genome_spec.bits_per_dim,
        },
        generations,
        demos: final_demos(&pool, &population),
    }
}

/// Random-search baseline: the initial population without any evolution.
pub fn run_random_baseline(ctx: RunContext<'_>, config: &EvolveConfig) -> RunLog {
    let config = EvolveConfig {
        generations: 0,
        ..config.clone()
    };
    run_tagged(ctx, &config, "random")
}

/// Training baseline: the single trajectory produced from the fixed
/// training start.
pub fn run_training_baseline(
    env: &Env,
    policy: &TabularPolicy,
    rollout_mode: RolloutMode,
) -> RunLog {
    env.validate().expect("invalid environment spec");
    let s0 = env.training_start();
    let mut rng = demo_rng(0, 0);
    let trajectory =
        rollout(env, policy, s0, rollout_mode, &mut rng).expect("training start is legal");
    let mut pool = DemoPool::new();
    let fitness = metrics::score(&trajectory, None, &pool, FitnessMode::Joint, env)
        .expect("training trajectory is non-empty");
    pool.insert(
        0,
        PoolEntry {
            trajectory: trajectory.clone(),
            d_local: fitness.d_local,
            certainty: fitness.certainty,
        },
    );
    let population = Population {
        members: vec![Individual {
            id: 0,
            genome: Genome::from_bits(Vec::new()),
            initial_state: s0,
            trajectory,
            fitness,
            birth_generation: 0,
        }],
    };
    let generations = vec![record_generation(0, &population, &pool, 0)];
    let mut demos = final_demos(&pool, &population);
    for demo in &mut demos {
        demo.genome = None;
    }
    RunLog {
        meta: RunMeta {
            schema_version: SCHEMA_VERSION,
            kind: "training".to_string(),
            seed: 0,
            env: env.clone(),
            evolve: None,
            bits_per_dim: 0,
        },
        generations,
        demos,
    }
}
