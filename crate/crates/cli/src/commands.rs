//! Command implementations behind the CLI surface.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use react_core::batch;
use react_core::encoding::{
    occupancy_counts_per_dim, occupancy_histogram, DimKind, DimSpec, GenomeSpec, OccupancyMode,
    SKEW_WARN_THRESHOLD,
};
use react_core::env::Env;
use react_core::evolve::{run, run_random_baseline, run_training_baseline, RunContext};
use react_core::metrics::{self, DemoPool, FitnessMode, PoolEntry};
use react_core::policy::{rollout_greedy, train_q, TabularPolicy, TrainConfig};
use react_core::report;
use react_core::runlog::RunLog;

use crate::config::{RunConfig, RunSpec, SweepConfig};

pub const RUN_LOG_FILE: &str = "run_log.jsonl";

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub struct TrainOptions {
    pub env_path: PathBuf,
    pub out: PathBuf,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub gamma: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epsilon_start: Option<f64>,
    pub epsilon_end: Option<f64>,
    pub exploring_starts: Option<bool>,
    pub temperature: Option<f64>,
}

pub fn cmd_train(opts: TrainOptions) -> Result<()> {
    let env = crate::config::load_env_spec(&opts.env_path)?;
    let seed = opts.seed.unwrap_or(0);
    let mut config = match opts.preset.as_deref() {
        Some("grid-full") => TrainConfig::grid_full(seed),
        Some("grid-undertrained") => TrainConfig::grid_undertrained(seed),
        Some("reach-converged") => TrainConfig::reach_converged(seed),
        Some(other) => {
            bail!("unknown preset `{other}` (valid: grid-full, grid-undertrained, reach-converged)")
        }
        None => match env {
            Env::Grid(_) => TrainConfig::grid_full(seed),
            Env::Reach(_) => TrainConfig::reach_converged(seed),
        },
    };
    if let Some(v) = opts.episodes {
        config.episodes = v;
    }
    if let Some(v) = opts.gamma {
        config.gamma = v;
    }
    if let Some(v) = opts.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = opts.epsilon_start {
        config.epsilon_start = v;
    }
    if let Some(v) = opts.epsilon_end {
        config.epsilon_end = v;
    }
    if let Some(v) = opts.exploring_starts {
        config.exploring_starts = v;
    }
    if let Some(v) = opts.temperature {
        config.temperature = v;
    }
    config
        .validate()
        .map_err(|e| anyhow::anyhow!("train config: {e}"))?;

    let policy = train_q(&env, &config);
    if let Some(parent) = opts.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    policy
        .save(&opts.out)
        .with_context(|| format!("writing {}", opts.out.display()))?;

    let traj = rollout_greedy(&env, &policy, env.training_start())
        .map_err(|e| anyhow::anyhow!("training-start rollout: {e}"))?;
    println!("policy={}", opts.out.display());
    println!("states_seen={}", policy.states_seen());
    println!("greedy_return={}", traj.ret);
    Ok(())
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

fn execute_run(
    env: &Env,
    policy: &TabularPolicy,
    spec: &GenomeSpec,
    config: &RunConfig,
    mode: RunSpec,
    seed: u64,
) -> RunLog {
    let ctx = RunContext {
        env,
        policy,
        genome_spec: spec,
    };
    match mode {
        RunSpec::Fitness(fitness_mode) => run(ctx, &config.evolve.to_config(seed, fitness_mode)),
        RunSpec::Random => {
            run_random_baseline(ctx, &config.evolve.to_config(seed, FitnessMode::Joint))
        }
        RunSpec::Training => run_training_baseline(env, policy, config.evolve.rollout_mode),
    }
}

fn run_dir(out: &Path, mode: RunSpec, seed: u64) -> PathBuf {
    out.join(mode.as_str()).join(format!("seed_{seed}"))
}

fn save_run(log: &RunLog, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    log.save(&dir.join(RUN_LOG_FILE))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    report::export_artifacts(log, dir)?;
    Ok(())
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

pub fn warn_on_skew(spec: &GenomeSpec) {
    let ratio = spec.skew_ratio();
    if ratio > SKEW_WARN_THRESHOLD {
        eprintln!(
            "warning: encoding skew ratio {ratio:.3} exceeds {SKEW_WARN_THRESHOLD}; \
             consider more bits per dimension"
        );
    }
}

pub fn cmd_optimize(config: &RunConfig) -> Result<()> {
    let policy = TabularPolicy::load(&config.policy_path)
        .with_context(|| format!("loading policy {}", config.policy_path.display()))?;
    let spec = GenomeSpec::for_env(&config.env, config.bits_per_dim)
        .map_err(|e| anyhow::anyhow!("genome spec: {e}"))?;
    warn_on_skew(&spec);

    let jobs: Vec<(RunSpec, u64)> = config
        .modes
        .iter()
        .flat_map(|&mode| config.seeds.iter().map(move |&seed| (mode, seed)))
        .collect();
    let results: Vec<Result<f64>> = batch::map(&jobs, |&(mode, seed)| {
        let log = execute_run(&config.env, &policy, &spec, config, mode, seed);
        let final_fidelity = log.final_fidelity();
        save_run(&log, &run_dir(&config.out, mode, seed))?;
        Ok(final_fidelity)
    });

    let mut by_mode: Vec<(RunSpec, Vec<f64>)> =
        config.modes.iter().map(|&m| (m, Vec::new())).collect();
    for ((mode, _), result) in jobs.iter().zip(results) {
        let fidelity = result?;
        by_mode
            .iter_mut()
            .find(|(m, _)| m == mode)
            .expect("job mode is listed")
            .1
            .push(fidelity);
    }
    for (mode, fidelities) in &by_mode {
        let iqm = metrics::iqm(fidelities).map_err(|e| anyhow::anyhow!("{e}"))?;
        println!(
            "mode={} fidelity_iqm={:.3} std={:.3} seeds={}",
            mode.as_str(),
            iqm,
            sample_std(fidelities),
            fidelities.len()
        );
    }
    println!("out={}", config.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// encoding-study
// ---------------------------------------------------------------------------

pub struct StudyOptions {
    pub bits: Vec<u32>,
    pub env_path: Option<PathBuf>,
    pub values: Option<u64>,
    pub dims: usize,
    pub samples: Option<u64>,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_encoding_study(opts: StudyOptions) -> Result<()> {
    if opts.bits.is_empty() {
        bail!("encoding-study needs at least one bits value");
    }
    let dims: Vec<DimSpec> = match (&opts.env_path, opts.values) {
        (Some(path), _) => {
            let env = crate::config::load_env_spec(path)?;
            GenomeSpec::for_env(&env, *opts.bits.iter().max().expect("non-empty"))
                .map_err(|e| anyhow::anyhow!("genome spec: {e}"))?
                .dims
        }
        (None, Some(values)) => {
            vec![DimSpec::discrete(0, values as i64 - 1); opts.dims]
        }
        (None, None) => bail!("encoding-study needs either --env or --values"),
    };

    fs::create_dir_all(&opts.out)?;
    let mut table = String::from("m\ttotal_bits\tmode\tratio\twarn\n");
    for &m in &opts.bits {
        let spec = GenomeSpec::new(dims.clone(), m).map_err(|e| anyhow::anyhow!("m={m}: {e}"))?;
        let ratio = per_dim_ratio(&spec);
        let warn = ratio > SKEW_WARN_THRESHOLD;

        let total_bits = spec.len();
        let (mode_name, mode) = match opts.samples {
            Some(n) => ("sampled", OccupancyMode::Sampled { n, seed: opts.seed }),
            None if total_bits <= 24 => ("exhaustive", OccupancyMode::Exhaustive),
            None => (
                "sampled",
                OccupancyMode::Sampled {
                    n: 81_000,
                    seed: opts.seed,
                },
            ),
        };
        let histogram = occupancy_histogram(&spec, mode).map_err(|e| anyhow::anyhow!("{e}"))?;
        if spec.dims.len() == 2 && spec.dims.iter().all(|d| d.kind == DimKind::Discrete) {
            let matrix = histogram_matrix(&spec, &histogram.counts);
            fs::write(opts.out.join(format!("occupancy_m{m}.tsv")), matrix)?;
        }

        let _ = writeln!(table, "{m}\t{total_bits}\t{mode_name}\t{ratio:.6}\t{warn}");
        println!(
            "m={m} ratio={ratio:.3} warn={}",
            if warn { "yes" } else { "no" }
        );
    }
    fs::write(opts.out.join("study.tsv"), table)?;
    println!("out={}", opts.out.display());
    Ok(())
}

/// Worst per-dimension max/min occurrence ratio, by exhaustive decode of
/// one dimension's code space.
fn per_dim_ratio(spec: &GenomeSpec) -> f64 {
    let mut worst = 1.0f64;
    for dim in &spec.dims {
        if dim.kind == DimKind::Discrete {
            let counts =
                occupancy_counts_per_dim(spec.bits_per_dim, dim.min as i64, dim.max as i64);
            let max = *counts.iter().max().expect("non-empty") as f64;
            let min = *counts.iter().min().expect("non-empty") as f64;
            worst = worst.max(max / min);
        }
    }
    worst
}

fn histogram_matrix(
    spec: &GenomeSpec,
    counts: &std::collections::BTreeMap<Vec<i64>, u64>,
) -> String {
    let (min0, max0) = (spec.dims[0].min as i64, spec.dims[0].max as i64);
    let (min1, max1) = (spec.dims[1].min as i64, spec.dims[1].max as i64);
    let mut out = String::from("value0");
    for v1 in min1..=max1 {
        let _ = write!(out, "\t{v1}");
    }
    out.push('\n');
    for v0 in min0..=max0 {
        let _ = write!(out, "{v0}");
        for v1 in min1..=max1 {
            let count = counts.get(&vec![v0, v1]).copied().unwrap_or(0);
            let _ = write!(out, "\t{count}");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

pub fn cmd_sweep(config: &SweepConfig) -> Result<()> {
    let policy = TabularPolicy::load(&config.base.policy_path)
        .with_context(|| format!("loading policy {}", config.base.policy_path.display()))?;

    let mut summary = String::from(
        "point\tparams\tmode\tfidelity_iqm\tfidelity_std\tgap_mean\tgap_min\tgap_max\t\
         ret_min\tret_median\tret_max\tret_iqr\tlen_min\tlen_median\tlen_max\tlen_iqr\n",
    );
    let mut survival = String::from("point\tparams\tmode\tgeneration\tnew_survivors_mean\n");

    for (point_idx, point) in config.points.iter().enumerate() {
        let spec = GenomeSpec::for_env(&config.base.env, point.bits_per_dim)
            .map_err(|e| anyhow::anyhow!("genome spec: {e}"))?;
        let params = if point.assignments.is_empty() {
            "-".to_string()
        } else {
            point
                .assignments
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        for mode_name in &point.modes {
            let mode = RunSpec::parse(mode_name)?;
            let mut run_config = config.base.clone();
            run_config.evolve = point.evolve.clone();
            run_config.bits_per_dim = point.bits_per_dim;

            let seeds = config.base.seeds.clone();
            let logs: Vec<Result<RunLog>> = batch::map(&seeds, |&seed| {
                let log = execute_run(&config.base.env, &policy, &spec, &run_config, mode, seed);
                let dir = config
                    .out
                    .join(format!("point_{point_idx}"))
                    .join(mode.as_str())
                    .join(format!("seed_{seed}"));
                save_run(&log, &dir)?;
                Ok(log)
            });
            let logs: Vec<RunLog> = logs.into_iter().collect::<Result<_>>()?;

            let fidelities: Vec<f64> = logs.iter().map(|l| l.final_fidelity()).collect();
            let iqm = metrics::iqm(&fidelities).map_err(|e| anyhow::anyhow!("{e}"))?;
            let std = sample_std(&fidelities);

            // pool all final demos across seeds for gap and spread stats
            let mut gaps: Vec<f64> = Vec::new();
            let mut returns: Vec<f64> = Vec::new();
            let mut lengths: Vec<f64> = Vec::new();
            for log in &logs {
                let mut pool = DemoPool::new();
                for demo in &log.demos {
                    pool.insert(
                        demo.id,
                        PoolEntry {
                            trajectory: demo.trajectory.clone(),
                            d_local: demo.d_local,
                            certainty: demo.certainty,
                        },
                    );
                    returns.push(demo.trajectory.ret);
                    lengths.push(demo.trajectory.steps.len() as f64);
                }
                let report = metrics::optimality_gap(&pool, &config.base.env)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                gaps.extend(report.gaps);
            }
            let gap_mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let gap_min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let gap_max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ret = report::distribution_stats(&returns)?;
            let len = report::distribution_stats(&lengths)?;

            let _ = writeln!(
                summary,
                "{point_idx}\t{params}\t{mode_name}\t{iqm:.6}\t{std:.6}\t{gap_mean:.6}\t\
                 {gap_min}\t{gap_max}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                ret.min, ret.median, ret.max, ret.iqr, len.min, len.median, len.max, len.iqr
            );

            // survival series: how many individuals born in generation g are
            // still present after that generation's migration, averaged over
            // seeds
            let max_gen = logs
                .iter()
                .map(|l| l.generations.len())
                .max()
                .unwrap_or(1)
                .saturating_sub(1);
            for generation in 1..=max_gen {
                let mean = logs
                    .iter()
                    .map(|log| {
                        log.generations
                            .get(generation)
                            .map(|record| {
                                record
                                    .members
                                    .iter()
                                    .filter(|m| m.birth_generation == generation as u32)
                                    .count() as f64
                            })
                            .unwrap_or(0.0)
                    })
                    .sum::<f64>()
                    / logs.len() as f64;
                let _ = writeln!(
                    survival,
                    "{point_idx}\t{params}\t{mode_name}\t{generation}\t{mean}"
                );
            }

            println!(
                "point={point_idx} params={params} mode={mode_name} fidelity_iqm={iqm:.3} std={std:.3} \
                 gap_mean={gap_mean:.3}"
            );
        }
    }

    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join("sweep.tsv"), summary)?;
    fs::write(config.out.join("survival.tsv"), survival)?;
    println!("out={}", config.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn cmd_report(run_dir: &Path) -> Result<()> {
    let log_path = run_dir.join(RUN_LOG_FILE);
    let log = RunLog::load(&log_path).map_err(|e| anyhow::anyhow!("{e}"))?;
    let written = report::export_artifacts(&log, run_dir)?;
    for path in &written {
        println!("wrote={}", path.display());
    }
    Ok(())
}
