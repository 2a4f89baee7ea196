//! Tabular softmax policies and rollout machinery.
//!
//! Policies under analysis are frozen Q-tables over discretized states. The
//! trainer is plain Q-learning with an epsilon-greedy behavior schedule;
//! stopping it early yields the partially competent policies that make
//! demonstration pools interesting. Policies never change during an
//! optimization run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, EnvError, Position, StateKey, TerminalKind, BOUNDARY_EPS};

#[derive(Debug, Error)]
pub enum PolicyIoError {
    #[error("policy file io: {0}")]
    Io(#[from] std::io::Error),
    #[error("policy file parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported policy file version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },
}

/// Maps positions to tabular state keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discretizer {
    /// Round coordinates to integer cells (grids).
    Identity,
    /// Per-axis binning at a fixed resolution.
    Bins {
        low: Vec<f64>,
        step: f64,
        bins: Vec<u64>,
    },
    /// Per-axis signed count of `step`-sized moves needed to bring the
    /// coordinate within `tolerance` of the target (reach). Absolute bins
    /// alias positions whose remaining move counts differ whenever a walk
    /// rides the exact bin-edge lattice; signed ring counts are the
    /// statistic the optimal policy actually depends on, so the tabular
    /// policy stays Markov and exactly optimal under them.
    Rings {
        target: Vec<f64>,
        tolerance: f64,
        step: f64,
        max_ring: Vec<i64>,
    },
}

impl Discretizer {
    pub fn for_env(env: &Env) -> Self {
        match env {
            Env::Grid(_) => Discretizer::Identity,
            Env::Reach(r) => Discretizer::Rings {
                target: r.target.to_vec(),
                tolerance: r.tolerance,
                step: r.step_size,
                max_ring: (0..3)
                    .map(|d| {
                        let span = (r.high[d] - r.target[d]).max(r.target[d] - r.low[d]);
                        ring_count(span, r.tolerance, r.step_size)
                    })
                    .collect(),
            },
        }
    }

    pub fn key(&self, pos: &Position) -> StateKey {
        match self {
            Discretizer::Identity => {
                let mut k = [0i64; 3];
                for (d, &x) in pos.coords().iter().enumerate() {
                    k[d] = x.round() as i64;
                }
                StateKey(k)
            }
            Discretizer::Bins { low, step, bins } => {
                let mut k = [0i64; 3];
                for (d, &x) in pos.coords().iter().enumerate() {
                    let raw = ((x - low[d]) / step + BOUNDARY_EPS).floor() as i64;
                    k[d] = raw.clamp(0, bins[d] as i64 - 1);
                }
                StateKey(k)
            }
            Discretizer::Rings {
                target,
                tolerance,
                step,
                max_ring,
            } => {
                let mut k = [0i64; 3];
                for (d, &x) in pos.coords().iter().enumerate() {
                    let offset = x - target[d];
                    let ring = ring_count(offset.abs(), *tolerance, *step).clamp(0, max_ring[d]);
                    k[d] = if offset < 0.0 { -ring } else { ring };
                }
                StateKey(k)
            }
        }
    }
}

/// Moves of size `step` needed to bring an absolute offset within
/// `tolerance`.
fn ring_count(offset: f64, tolerance: f64, step: f64) -> i64 {
    if offset <= tolerance + BOUNDARY_EPS {
        0
    } else {
        ((offset - tolerance) / step - BOUNDARY_EPS).ceil() as i64
    }
}

const POLICY_FILE_VERSION: u32 = 1;

/// Frozen action-value table queried through a temperature softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    q: BTreeMap<StateKey, Vec<f64>>,
    num_actions: usize,
    temperature: f64,
    discretizer: Discretizer,
}

impl TabularPolicy {
    pub fn uniform(env: &Env) -> Self {
        Self {
            q: BTreeMap::new(),
            num_actions: env.num_actions(),
            temperature: 1.0,
            discretizer: Discretizer::for_env(env),
        }
    }

    pub fn from_q_table(
        q: BTreeMap<StateKey, Vec<f64>>,
        num_actions: usize,
        temperature: f64,
        discretizer: Discretizer,
    ) -> Self {
        assert!(temperature > 0.0, "temperature must be positive");
        Self {
            q,
            num_actions,
            temperature,
            discretizer,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discretizer(&self) -> &Discretizer {
        &self.discretizer
    }

    pub fn key_for(&self, pos: &Position) -> StateKey {
        self.discretizer.key(pos)
    }

    pub fn states_seen(&self) -> usize {
        self.q.len()
    }

    /// Softmax over `q(state) / temperature`. States missing from the table
    /// fall back to the uniform distribution.
    pub fn action_distribution(&self, pos: &Position) -> Vec<f64> {
        match self.q.get(&self.key_for(pos)) {
            Some(row) => softmax(row, self.temperature),
            None => vec![1.0 / self.num_actions as f64; self.num_actions],
        }
    }

    /// Highest-valued action, ties broken by lowest index.
    pub fn greedy_action(&self, pos: &Position) -> usize {
        match self.q.get(&self.key_for(pos)) {
            Some(row) => argmax(row),
            None => 0,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyIoError> {
        let file = PolicyFile {
            version: POLICY_FILE_VERSION,
            num_actions: self.num_actions,
            temperature: self.temperature,
            discretizer: self.discretizer.clone(),
            entries: self
                .q
                .iter()
                .map(|(k, v)| QEntry {
                    key: k.0,
                    q: v.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyIoError> {
        let text = fs::read_to_string(path)?;
        let probe: VersionProbe = serde_json::from_str(&text)?;
        if probe.version != POLICY_FILE_VERSION {
            return Err(PolicyIoError::Version {
                found: probe.version,
                supported: POLICY_FILE_VERSION,
            });
        }
        let file: PolicyFile = serde_json::from_str(&text)?;
        let q = file
            .entries
            .into_iter()
            .map(|e| (StateKey(e.key), e.q))
            .collect();
        Ok(Self {
            q,
            num_actions: file.num_actions,
            temperature: file.temperature,
            discretizer: file.discretizer,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    version: u32,
    num_actions: usize,
    temperature: f64,
    discretizer: Discretizer,
    entries: Vec<QEntry>,
}

#[derive(Serialize, Deserialize)]
struct QEntry {
    key: [i64; 3],
    q: Vec<f64>,
}

fn softmax(row: &[f64], temperature: f64) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row
        .iter()
        .map(|&v| ((v - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Q-learning schedule. Epsilon decays linearly across episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub episodes: usize,
    pub seed: u64,
    /// Start each episode from a random legal start instead of the fixed
    /// training start.
    #[serde(default)]
    pub exploring_starts: bool,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Initial Q value for unvisited state-action pairs. Zero is optimistic
    /// in all-penalty tasks and leaves unvisited actions dominating the
    /// bootstrap max; set it below the worst achievable value for exact
    /// convergence there.
    #[serde(default)]
    pub q_init: f64,
}

fn default_temperature() -> f64 {
    1.0
}

impl TrainConfig {
    /// Budget that reliably converges a grid policy trained from the single
    /// fixed start.
    pub fn grid_full(seed: u64) -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 0.2,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            episodes: 6000,
            seed,
            exploring_starts: false,
            temperature: 1.0,
            q_init: 0.0,
        }
    }

    /// Early-stopped grid budget: the greedy policy just reaches the goal
    /// from the training start while other regions remain unexplored.
    pub fn grid_undertrained(seed: u64) -> Self {
        Self {
            episodes: 400,
            epsilon_end: 0.3,
            ..Self::grid_full(seed)
        }
    }

    /// Converged reach budget. Exploring starts cover the whole workspace,
    /// and a unit learning rate turns each update into an exact Bellman
    /// backup, which a deterministic environment rewards with exact
    /// convergence.
    pub fn reach_converged(seed: u64) -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            episodes: 40_000,
            seed,
            exploring_starts: true,
            temperature: 1.0,
            q_init: -20.0,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(EnvError::InvalidSpec("gamma must be in [0, 1)".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(EnvError::InvalidSpec("learning_rate must be > 0".into()));
        }
        if self.temperature <= 0.0 {
            return Err(EnvError::InvalidSpec("temperature must be > 0".into()));
        }
        Ok(())
    }
}

/// Train a Q-table on `env`. Deterministic for a fixed seed.
///
/// Episodes truncated by the horizon bootstrap from the successor state;
/// goal and hole terminations do not.
pub fn train_q(env: &Env, config: &TrainConfig) -> TabularPolicy {
    config.validate().expect("invalid train config");
    let actions = env.num_actions();
    let discretizer = Discretizer::for_env(env);
    let mut q: BTreeMap<StateKey, Vec<f64>> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for episode in 0..config.episodes {
        let progress = if config.episodes > 1 {
            episode as f64 / (config.episodes - 1) as f64
        } else {
            0.0
        };
        let epsilon = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * progress;
        let mut pos = if config.exploring_starts {
            sample_start(env, &mut rng)
        } else {
            env.training_start()
        };

        for step in 1..=env.horizon() {
            let key = discretizer.key(&pos);
            let action = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..actions)
            } else {
                match q.get(&key) {
                    Some(row) => argmax(row),
                    None => 0,
                }
            };
            let out = env.step(&pos, action, step);
            let bootstrap = match out.kind {
                TerminalKind::Goal | TerminalKind::Hole => 0.0,
                TerminalKind::Running | TerminalKind::Timeout => {
                    let next_key = discretizer.key(&out.next);
                    q.get(&next_key)
                        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                        .unwrap_or(config.q_init)
                }
            };
            let target = out.reward + config.gamma * bootstrap;
            let row = q.entry(key).or_insert_with(|| vec![config.q_init; actions]);
            row[action] += config.learning_rate * (target - row[action]);
            pos = out.next;
            if out.terminal() {
                break;
            }
        }
    }

    TabularPolicy::from_q_table(q, actions, config.temperature, discretizer)
}

fn sample_start<R: Rng>(env: &Env, rng: &mut R) -> Position {
    match env {
        Env::Grid(g) => {
            let cells = g.start_cells();
            let (r, c) = cells[rng.gen_range(0..cells.len())];
            Position::new2(r as f64, c as f64)
        }
        Env::Reach(r) => {
            let coords: [f64; 3] = std::array::from_fn(|d| rng.gen_range(r.low[d]..=r.high[d]));
            Position::from_slice(&coords)
        }
    }
}

/// How rollout actions are chosen from the policy's distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    /// Argmax of the action distribution, ties broken by lowest index.
    #[default]
    Greedy,
    /// Sample from the action distribution.
    Sample,
}

/// One recorded transition: the state the action was taken in, the action,
/// the probability the policy assigned to it, and the resulting reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: Position,
    pub action: usize,
    pub action_prob: f64,
    pub reward: f64,
}

/// A complete episode: the policy's phenotype for one initial state.
///
/// `positions` is the visited position sequence with consecutive duplicates
/// removed; `raw_positions` keeps every visit (dwell time included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub ret: f64,
    pub kind: TerminalKind,
    pub raw_positions: Vec<Position>,
    pub positions: Vec<Position>,
}

impl Trajectory {
    /// Deduplicated position-sequence length; the `|tau|` used by the
    /// distance and fidelity metrics.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn raw_len(&self) -> usize {
        self.raw_positions.len()
    }

    pub fn start(&self) -> Position {
        self.raw_positions[0]
    }
}

/// Remove consecutive duplicate positions, preserving order.
pub fn dedupe(positions: &[Position]) -> Vec<Position> {
    let mut out: Vec<Position> = Vec::with_capacity(positions.len());
    for &p in positions {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Run one episode of `policy` on `env` from `s0`.
///
/// The recorded `action_prob` is the distribution's value at the chosen
/// action, also under greedy selection. The rng is consumed only in
/// `Sample` mode.
pub fn rollout<R: Rng>(
    env: &Env,
    policy: &TabularPolicy,
    s0: Position,
    mode: RolloutMode,
    rng: &mut R,
) -> Result<Trajectory, EnvError> {
    if !env.is_valid_start(&s0) {
        return Err(EnvError::InvalidStart(
            s0.coords().to_vec(),
            "not a legal initial state",
        ));
    }
    let mut steps = Vec::new();
    let mut raw_positions = vec![s0];
    let mut ret = 0.0;
    let mut pos = s0;
    let mut kind = TerminalKind::Running;
    for step_index in 1..=env.horizon() {
        let dist = policy.action_distribution(&pos);
        let action = match mode {
            RolloutMode::Greedy => argmax(&dist),
            RolloutMode::Sample => sample_index(&dist, rng),
        };
        let out = env.step(&pos, action, step_index);
        steps.push(Step {
            state: pos,
            action,
            action_prob: dist[action],
            reward: out.reward,
        });
        ret += out.reward;
        raw_positions.push(out.next);
        pos = out.next;
        if out.terminal() {
            kind = out.kind;
            break;
        }
    }
    let positions = dedupe(&raw_positions);
    Ok(Trajectory {
        steps,
        ret,
        kind,
        raw_positions,
        positions,
    })
}

/// Greedy rollout; needs no caller-provided randomness.
pub fn rollout_greedy(
    env: &Env,
    policy: &TabularPolicy,
    s0: Position,
) -> Result<Trajectory, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    rollout(env, policy, s0, RolloutMode::Greedy, &mut rng)
}

fn sample_index<R: Rng>(dist: &[f64], rng: &mut R) -> usize {
    let draw = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    dist.len() - 1
}
