//! File-first run configuration: a TOML file describes one optimization
//! campaign (environment, policy, modes, seeds); command-line flags
//! override individual fields. Sweeps wrap a base run config with a
//! parameter grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use react_core::env::Env;
use react_core::evolve::EvolveConfig;
use react_core::metrics::FitnessMode;
use react_core::policy::RolloutMode;

/// Output root fallback when neither flag nor config provide one.
pub const OUT_ROOT_ENV_VAR: &str = "REACT_OUT_ROOT";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// What a single optimization run optimizes, or which baseline it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunSpec {
    Fitness(FitnessMode),
    Random,
    Training,
}

pub const VALID_MODES: [&str; 8] = [
    "joint",
    "sum",
    "certainty_only",
    "local_only",
    "global_only",
    "fidelity",
    "random",
    "training",
];

impl RunSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(RunSpec::Random),
            "training" => Ok(RunSpec::Training),
            other => other
                .parse::<FitnessMode>()
                .map(RunSpec::Fitness)
                .map_err(|_| {
                    anyhow::anyhow!("unknown mode `{other}` (valid: {})", VALID_MODES.join(", "))
                }),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RunSpec::Fitness(m) => m.as_str(),
            RunSpec::Random => "random",
            RunSpec::Training => "training",
        }
    }
}

/// Evolution hyperparameters as they appear in config files; seed and
/// fitness mode are injected per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    #[serde(default = "d_population")]
    pub population_size: usize,
    #[serde(default = "d_generations")]
    pub generations: u32,
    #[serde(default = "d_crossover")]
    pub crossover_prob: f64,
    #[serde(default = "d_mutation")]
    pub mutation_prob: f64,
    #[serde(default = "d_tournament")]
    pub tournament_size: usize,
    #[serde(default)]
    pub rollout_mode: RolloutMode,
}

fn d_population() -> usize {
    10
}
fn d_generations() -> u32 {
    40
}
fn d_crossover() -> f64 {
    0.75
}
fn d_mutation() -> f64 {
    0.5
}
fn d_tournament() -> usize {
    3
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            population_size: d_population(),
            generations: d_generations(),
            crossover_prob: d_crossover(),
            mutation_prob: d_mutation(),
            tournament_size: d_tournament(),
            rollout_mode: RolloutMode::Greedy,
        }
    }
}

impl EvolveParams {
    pub fn to_config(&self, seed: u64, fitness_mode: FitnessMode) -> EvolveConfig {
        EvolveConfig {
            population_size: self.population_size,
            generations: self.generations,
            crossover_prob: self.crossover_prob,
            mutation_prob: self.mutation_prob,
            tournament_size: self.tournament_size,
            seed,
            fitness_mode,
            rollout_mode: self.rollout_mode,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    env: PathBuf,
    policy: PathBuf,
    #[serde(default = "default_modes")]
    modes: Vec<String>,
    seeds: Vec<u64>,
    out: Option<PathBuf>,
    bits_per_dim: Option<u32>,
    #[serde(default)]
    evolve: Option<EvolveParams>,
}

fn default_modes() -> Vec<String> {
    vec![
        "joint".to_string(),
        "random".to_string(),
        "training".to_string(),
    ]
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub env: Env,
    pub policy_path: PathBuf,
    pub modes: Vec<RunSpec>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub bits_per_dim: u32,
    pub evolve: EvolveParams,
}

pub fn load_env_spec(path: &Path) -> Result<Env> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading env spec {}", path.display()))?;
    let env: Env =
        toml::from_str(&text).with_context(|| format!("parsing env spec {}", path.display()))?;
    env.validate()
        .with_context(|| format!("validating env spec {}", path.display()))?;
    Ok(env)
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl RunConfig {
    /// Load a run config file; paths inside it resolve relative to its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading run config {}", path.display()))?;
        let file: RunConfigFile = toml::from_str(&text)
            .with_context(|| format!("parsing run config {}", path.display()))?;
        let base = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        Self::from_file(file, &base)
    }

    fn from_file(file: RunConfigFile, base: &Path) -> Result<Self> {
        if file.seeds.is_empty() {
            bail!("run config needs at least one seed");
        }
        let env = load_env_spec(&resolve(base, &file.env))?;
        let policy_path = resolve(base, &file.policy);
        if !policy_path.exists() {
            bail!("policy file {} does not exist", policy_path.display());
        }
        let modes = file
            .modes
            .iter()
            .map(|m| RunSpec::parse(m))
            .collect::<Result<Vec<_>>>()?;
        if modes.is_empty() {
            bail!("run config needs at least one mode");
        }
        let bits_per_dim = file
            .bits_per_dim
            .unwrap_or_else(|| react_core::encoding::GenomeSpec::default_bits(&env));
        Ok(Self {
            env,
            policy_path,
            modes,
            seeds: file.seeds,
            out: file
                .out
                .map(|p| resolve(base, &p))
                .unwrap_or_else(default_out_dir),
            bits_per_dim,
            evolve: file.evolve.unwrap_or_default(),
        })
    }
}

/// One axis of a sweep grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub population_size: Option<Vec<usize>>,
    #[serde(default)]
    pub generations: Option<Vec<u32>>,
    #[serde(default)]
    pub crossover_prob: Option<Vec<f64>>,
    #[serde(default)]
    pub mutation_prob: Option<Vec<f64>>,
    #[serde(default)]
    pub bits_per_dim: Option<Vec<u32>>,
    #[serde(default)]
    pub mode: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfigFile {
    #[serde(default = "default_max_points")]
    max_points: usize,
    out: Option<PathBuf>,
    base: RunConfigFile,
    grid: SweepGrid,
}

fn default_max_points() -> usize {
    64
}

/// Values a single sweep point assigns on top of the base config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub assignments: BTreeMap<String, String>,
    pub evolve: EvolveParams,
    pub bits_per_dim: u32,
    pub modes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub points: Vec<SweepPoint>,
    pub out: PathBuf,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading sweep config {}", path.display()))?;
        let file: SweepConfigFile = toml::from_str(&text)
            .with_context(|| format!("parsing sweep config {}", path.display()))?;
        let base_dir = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        let out = file
            .out
            .clone()
            .map(|p| resolve(&base_dir, &p))
            .unwrap_or_else(|| default_out_dir().join("sweep"));
        let base = RunConfig::from_file(file.base, &base_dir)?;
        let points = expand_grid(&file.grid, &base, file.max_points)?;
        Ok(Self { base, points, out })
    }
}

fn expand_grid(grid: &SweepGrid, base: &RunConfig, max_points: usize) -> Result<Vec<SweepPoint>> {
    // each axis: (name, values as strings, applier)
    type Apply = Box<dyn Fn(&mut SweepPoint, usize)>;
    let mut axes: Vec<(String, Vec<String>, Apply)> = Vec::new();

    macro_rules! axis {
        ($field:ident, $name:literal, $apply:expr) => {
            if let Some(values) = grid.$field.clone() {
                if values.is_empty() {
                    bail!(concat!("sweep axis `", $name, "` is empty"));
                }
                let strings = values.iter().map(|v| v.to_string()).collect();
                let apply: Apply = Box::new(move |point, idx| $apply(point, values[idx].clone()));
                axes.push(($name.to_string(), strings, apply));
            }
        };
    }

    axis!(
        population_size,
        "population_size",
        |p: &mut SweepPoint, v| p.evolve.population_size = v
    );
    axis!(generations, "generations", |p: &mut SweepPoint, v| p
        .evolve
        .generations =
        v);
    axis!(crossover_prob, "crossover_prob", |p: &mut SweepPoint, v| {
        p.evolve.crossover_prob = v
    });
    axis!(mutation_prob, "mutation_prob", |p: &mut SweepPoint, v| p
        .evolve
        .mutation_prob =
        v);
    axis!(bits_per_dim, "bits_per_dim", |p: &mut SweepPoint, v| p
        .bits_per_dim =
        v);
    axis!(mode, "mode", |p: &mut SweepPoint, v: String| p.modes =
        vec![v]);

    if axes.is_empty() {
        bail!("sweep grid is empty: provide at least one axis");
    }
    let total: usize = axes.iter().map(|(_, v, _)| v.len()).product();
    if total > max_points {
        bail!("sweep grid expands to {total} points, above the max_points cap of {max_points}");
    }

    let base_modes: Vec<String> = base.modes.iter().map(|m| m.as_str().to_string()).collect();
    let mut points = Vec::with_capacity(total);
    let mut counters = vec![0usize; axes.len()];
    loop {
        let mut point = SweepPoint {
            assignments: BTreeMap::new(),
            evolve: base.evolve.clone(),
            bits_per_dim: base.bits_per_dim,
            modes: base_modes.clone(),
        };
        for (axis_idx, &value_idx) in counters.iter().enumerate() {
            let (name, strings, apply) = &axes[axis_idx];
            apply(&mut point, value_idx);
            point
                .assignments
                .insert(name.clone(), strings[value_idx].clone());
        }
        points.push(point);

        // odometer increment
        let mut i = axes.len();
        loop {
            if i == 0 {
                return Ok(points);
            }
            i -= 1;
            counters[i] += 1;
            if counters[i] < axes[i].1.len() {
                break;
            }
            counters[i] = 0;
        }
    }
}
