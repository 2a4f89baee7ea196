//! Trajectory scoring: diversity and certainty metrics, the joint fitness,
//! demonstration fidelity, interquartile means, and the optimal-return
//! oracle behind the optimality gap.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, Position};
use crate::policy::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("empty demonstration pool")]
    EmptyPool,
    #[error("empty input")]
    EmptyInput,
}

/// Which scalar the evolutionary loop optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    /// Global diversity plus the minimum (local diversity, certainty)
    /// plane distance to the pool.
    Joint,
    /// Plain sum of global diversity, local diversity, and certainty.
    Sum,
    CertaintyOnly,
    LocalOnly,
    GlobalOnly,
    /// Marginal fidelity of the pool with the candidate added.
    Fidelity,
}

impl FitnessMode {
    pub const ALL: [FitnessMode; 6] = [
        FitnessMode::Joint,
        FitnessMode::Sum,
        FitnessMode::CertaintyOnly,
        FitnessMode::LocalOnly,
        FitnessMode::GlobalOnly,
        FitnessMode::Fidelity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FitnessMode::Joint => "joint",
            FitnessMode::Sum => "sum",
            FitnessMode::CertaintyOnly => "certainty_only",
            FitnessMode::LocalOnly => "local_only",
            FitnessMode::GlobalOnly => "global_only",
            FitnessMode::Fidelity => "fidelity",
        }
    }

    /// Modes whose total decomposes into a component stack.
    pub fn has_composition(&self) -> bool {
        matches!(self, FitnessMode::Joint | FitnessMode::Sum)
    }
}

impl fmt::Display for FitnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitnessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FitnessMode::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown fitness mode `{s}`"))
    }
}

/// All fitness components of one trajectory plus the mode-dependent total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub d_local: f64,
    pub certainty: f64,
    pub d_global: f64,
    pub f_local: f64,
    pub total: f64,
    pub mode: FitnessMode,
}

/// One demonstration with the trajectory-intrinsic metrics cached at the
/// time it was committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub trajectory: Trajectory,
    pub d_local: f64,
    pub certainty: f64,
}

/// The living demonstration set, keyed by individual id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemoPool {
    entries: BTreeMap<u64, PoolEntry>,
}

impl DemoPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: u64, entry: PoolEntry) {
        self.entries.insert(id, entry);
    }

    pub fn get(&self, id: u64) -> Option<&PoolEntry> {
        self.entries.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    /// Iterate entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &PoolEntry)> {
        self.entries.iter().map(|(&id, e)| (id, e))
    }

    /// Drop every entry whose id is not in `survivors`.
    pub fn retain_ids(&mut self, survivors: &BTreeSet<u64>) {
        self.entries.retain(|id, _| survivors.contains(id));
    }
}

/// Fraction of the discretized position space one trajectory covers.
pub fn local_diversity(traj: &Trajectory, env: &Env) -> Result<f64, MetricError> {
    if traj.positions.is_empty() {
        return Err(MetricError::EmptyTrajectory);
    }
    let unique: BTreeSet<_> = traj.positions.iter().map(|p| env.state_key(p)).collect();
    Ok(unique.len() as f64 / env.position_space_size() as f64)
}

/// Mean probability the policy assigned to the actions actually taken.
pub fn certainty(traj: &Trajectory) -> Result<f64, MetricError> {
    if traj.steps.is_empty() {
        return Err(MetricError::EmptyTrajectory);
    }
    Ok(traj.steps.iter().map(|s| s.action_prob).sum::<f64>() / traj.steps.len() as f64)
}

/// Minimum Euclidean distance from a point to any trajectory position.
pub fn point_to_traj_distance(s: &Position, positions: &[Position]) -> Result<f64, MetricError> {
    if positions.is_empty() {
        return Err(MetricError::EmptyTrajectory);
    }
    Ok(positions
        .iter()
        .map(|p| s.distance(p))
        .fold(f64::INFINITY, f64::min))
}

/// Symmetrized average point-to-trajectory distance between two
/// deduplicated position sequences.
pub fn one_way_distance(a: &Trajectory, b: &Trajectory) -> Result<f64, MetricError> {
    one_way_distance_points(&a.positions, &b.positions)
}

pub fn one_way_distance_points(a: &[Position], b: &[Position]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyTrajectory);
    }
    // the directional sums are accumulated separately so that swapping the
    // arguments commutes the final addition and symmetry holds exactly
    let mut forward = 0.0;
    for s in a {
        forward += point_to_traj_distance(s, b)?;
    }
    let mut backward = 0.0;
    for s in b {
        backward += point_to_traj_distance(s, a)?;
    }
    Ok((forward + backward) / (a.len() + b.len()) as f64)
}

/// Normalized minimum one-way distance from `traj` to the rest of the
/// pool. An empty reference set means the trajectory is maximally novel.
pub fn global_diversity(
    traj: &Trajectory,
    own_id: Option<u64>,
    pool: &DemoPool,
    max_state_distance: f64,
) -> f64 {
    debug_assert!(max_state_distance >= 0.0);
    let mut min_delta = f64::INFINITY;
    for (id, entry) in pool.iter() {
        if Some(id) == own_id {
            continue;
        }
        let delta =
            one_way_distance(traj, &entry.trajectory).expect("pool trajectories are non-empty");
        min_delta = min_delta.min(delta);
    }
    if min_delta.is_infinite() {
        return 1.0;
    }
    if max_state_distance == 0.0 {
        // degenerate single-cell position space: distances are all zero
        return 0.0;
    }
    min_delta / max_state_distance
}

/// Minimum Euclidean distance in the (local diversity, certainty) plane
/// between the candidate and any other pool member. Empty reference set
/// yields the plane's diameter `sqrt(2)`.
pub fn local_fitness(d_local: f64, certainty: f64, own_id: Option<u64>, pool: &DemoPool) -> f64 {
    let mut min_dist = f64::INFINITY;
    for (id, entry) in pool.iter() {
        if Some(id) == own_id {
            continue;
        }
        let dd = d_local - entry.d_local;
        let dc = certainty - entry.certainty;
        min_dist = min_dist.min((dd * dd + dc * dc).sqrt());
    }
    if min_dist.is_infinite() {
        SQRT_2
    } else {
        min_dist
    }
}

/// Score a trajectory against the current pool under the given mode.
pub fn score(
    traj: &Trajectory,
    own_id: Option<u64>,
    pool: &DemoPool,
    mode: FitnessMode,
    env: &Env,
) -> Result<FitnessBreakdown, MetricError> {
    let d_local = local_diversity(traj, env)?;
    let cert = certainty(traj)?;
    let d_global = global_diversity(traj, own_id, pool, env.max_state_distance());
    let f_local = local_fitness(d_local, cert, own_id, pool);
    let total = match mode {
        FitnessMode::Joint => d_global + f_local,
        FitnessMode::Sum => d_global + d_local + cert,
        FitnessMode::CertaintyOnly => cert,
        FitnessMode::LocalOnly => d_local,
        FitnessMode::GlobalOnly => d_global,
        FitnessMode::Fidelity => {
            let mut items: Vec<(f64, usize)> = Vec::with_capacity(pool.len() + 1);
            for (id, entry) in pool.iter() {
                if Some(id) == own_id {
                    continue;
                }
                items.push((entry.trajectory.ret, entry.trajectory.len()));
            }
            items.push((traj.ret, traj.len()));
            fidelity_of(&items)?.fidelity
        }
    };
    Ok(FitnessBreakdown {
        d_local,
        certainty: cert,
        d_global,
        f_local,
        total,
        mode,
    })
}

/// Length-weighted deviation of trajectory returns from the pool's
/// absolute mean reward; higher values mean a wider behavioral spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub abs_mean_reward: f64,
    pub total_length: u64,
}

pub fn fidelity(pool: &DemoPool) -> Result<FidelityReport, MetricError> {
    let items: Vec<(f64, usize)> = pool
        .iter()
        .map(|(_, e)| (e.trajectory.ret, e.trajectory.len()))
        .collect();
    fidelity_of(&items)
}

/// Fidelity over explicit (return, deduplicated length) pairs.
pub fn fidelity_of(items: &[(f64, usize)]) -> Result<FidelityReport, MetricError> {
    if items.is_empty() {
        return Err(MetricError::EmptyPool);
    }
    let abs_mean_reward = items.iter().map(|(r, _)| r.abs()).sum::<f64>() / items.len() as f64;
    let total_length: u64 = items.iter().map(|&(_, l)| l as u64).sum();
    let mut s = 0.0;
    for &(ret, len) in items {
        s += (len as f64 / total_length as f64) * (abs_mean_reward - ret).abs();
    }
    Ok(FidelityReport {
        fidelity: s,
        abs_mean_reward,
        total_length,
    })
}

/// Interquartile mean: drop the lowest and highest `floor(n/4)` values and
/// average the rest.
pub fn iqm(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("iqm values must be comparable"));
    let drop = sorted.len() / 4;
    let kept = &sorted[drop..sorted.len() - drop];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Best achievable return from `s0`.
///
/// Grids: goal reward minus the breadth-first distance to the goal over
/// traversable cells; unreachable starts fall back to the timeout
/// worst case `-max_steps`. Reach: the per-axis arrival step count `n`
/// costs one penalty per step landing outside the window, so the optimum
/// is `-(n - 1)` capped by the horizon (0 if already arrived).
pub fn optimal_return(env: &Env, s0: &Position) -> f64 {
    match env {
        Env::Grid(g) => {
            let start = s0.cell();
            match bfs_distance(g, start) {
                Some(dist) => g.goal_reward - dist as f64,
                None => -(g.max_steps as f64),
            }
        }
        Env::Reach(r) => {
            let eps = crate::env::BOUNDARY_EPS;
            let mut n = 0u64;
            for d in 0..3 {
                let diff = (s0.coords()[d] - r.target[d]).abs();
                if diff > r.tolerance + eps {
                    n += ((diff - r.tolerance) / r.step_size - eps).ceil() as u64;
                }
            }
            if n == 0 {
                0.0
            } else {
                -(((n - 1).min(r.horizon as u64)) as f64)
            }
        }
    }
}

fn bfs_distance(g: &crate::env::GridSpec, start: (i64, i64)) -> Option<u64> {
    if start == g.goal {
        return Some(0);
    }
    let traversable: BTreeSet<(i64, i64)> = g.traversable_cells().into_iter().collect();
    if !traversable.contains(&start) {
        return None;
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start);
    queue.push_back((start, 0u64));
    while let Some(((r, c), dist)) = queue.pop_front() {
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let next = (r + dr, c + dc);
            if next == g.goal {
                return Some(dist + 1);
            }
            if traversable.contains(&next) && seen.insert(next) {
                queue.push_back((next, dist + 1));
            }
        }
    }
    None
}

/// Per-trajectory optimality gaps for a pool, in id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn optimality_gap(pool: &DemoPool, env: &Env) -> Result<GapReport, MetricError> {
    if pool.is_empty() {
        return Err(MetricError::EmptyPool);
    }
    let gaps: Vec<f64> = pool
        .iter()
        .map(|(_, e)| optimal_return(env, &e.trajectory.start()) - e.trajectory.ret)
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GapReport {
        gaps,
        mean,
        min,
        max,
    })
}
