//! Deterministic, seedable environments: a flat/holey gridworld and a
//! continuous kinematic point-reach task.
//!
//! Both expose the same surface to the rest of the crate: stateless `step`,
//! the agent-position extraction `rho`, the size of the discretized position
//! space, and the maximum state distance used to normalize trajectory
//! distances.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("invalid start position {0:?}: {1}")]
    InvalidStart(Vec<f64>, &'static str),
}

/// Agent position; the observable state of both environments.
///
/// Grid cells carry integer values in the real slots. Capacity is fixed at
/// three axes, which covers every environment in this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    coords: [f64; 3],
    dim: u8,
}

impl Position {
    pub fn new2(a: f64, b: f64) -> Self {
        Self {
            coords: [a, b, 0.0],
            dim: 2,
        }
    }

    pub fn new3(a: f64, b: f64, c: f64) -> Self {
        Self {
            coords: [a, b, c],
            dim: 3,
        }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        assert!(
            (1..=3).contains(&coords.len()),
            "position dimension must be 1..=3, got {}",
            coords.len()
        );
        let mut buf = [0.0; 3];
        buf[..coords.len()].copy_from_slice(coords);
        Self {
            coords: buf,
            dim: coords.len() as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    /// Grid helper: coordinates rounded to integer cell indices.
    pub fn cell(&self) -> (i64, i64) {
        (self.coords[0].round() as i64, self.coords[1].round() as i64)
    }

    pub fn distance(&self, other: &Position) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for d in 0..self.dim as usize {
            let diff = self.coords[d] - other.coords[d];
            acc += diff * diff;
        }
        acc.sqrt()
    }
}

impl Serialize for Position {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(self.coords())
    }
}

impl<'de> Deserialize<'de> for Position {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(de)?;
        if !(1..=3).contains(&v.len()) {
            return Err(serde::de::Error::custom("position dimension must be 1..=3"));
        }
        Ok(Position::from_slice(&v))
    }
}

/// How an episode step left the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    Running,
    Goal,
    Hole,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: Position,
    pub reward: f64,
    pub kind: TerminalKind,
}

impl StepOutcome {
    pub fn terminal(&self) -> bool {
        self.kind != TerminalKind::Running
    }
}

/// Discrete state key used by tabular policies and coverage counting.
///
/// Unused slots stay zero so ordering is total across one environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey(pub [i64; 3]);

/// Gridworld with an outer wall ring, optional holes, and a single goal.
///
/// Coordinates are `(row, col)`, row 0 at the top. Width and height count
/// cells including the wall ring, so an 11x11 grid has a 9x9 interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: i64,
    pub height: i64,
    #[serde(default)]
    pub holes: BTreeSet<(i64, i64)>,
    pub goal: (i64, i64),
    pub training_start: (i64, i64),
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_goal_reward")]
    pub goal_reward: f64,
    #[serde(default = "default_step_cost")]
    pub step_cost: f64,
    #[serde(default = "default_hole_penalty")]
    pub hole_penalty: f64,
}

fn default_max_steps() -> usize {
    100
}
fn default_goal_reward() -> f64 {
    50.0
}
fn default_step_cost() -> f64 {
    -1.0
}
fn default_hole_penalty() -> f64 {
    -50.0
}

/// Grid actions, in tie-breaking order.
pub const GRID_ACTIONS: usize = 4;
const GRID_DELTAS: [(i64, i64); GRID_ACTIONS] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

impl GridSpec {
    /// Obstacle-free grid: start in the top-left interior corner, goal in
    /// the bottom-right one.
    pub fn flat(width: i64, height: i64) -> Self {
        Self {
            width,
            height,
            holes: BTreeSet::new(),
            goal: (height - 2, width - 2),
            training_start: (1, 1),
            max_steps: default_max_steps(),
            goal_reward: default_goal_reward(),
            step_cost: default_step_cost(),
            hole_penalty: default_hole_penalty(),
        }
    }

    pub fn flat11() -> Self {
        Self::flat(11, 11)
    }

    /// 11x11 grid with a partial wall of holes in the middle column plus a
    /// lone hole near the lower-left region.
    pub fn holey11() -> Self {
        let mut spec = Self::flat(11, 11);
        spec.holes = [(3, 5), (4, 5), (5, 5), (6, 5), (8, 2)]
            .into_iter()
            .collect();
        spec
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.width < 3 || self.height < 3 {
            return Err(EnvError::InvalidSpec(
                "grid needs a non-empty interior".into(),
            ));
        }
        if self.max_steps < 1 {
            return Err(EnvError::InvalidSpec("max_steps must be >= 1".into()));
        }
        for &(name, cell) in &[("goal", self.goal), ("training_start", self.training_start)] {
            if !self.is_interior(cell) {
                return Err(EnvError::InvalidSpec(format!(
                    "{name} {cell:?} is not interior"
                )));
            }
            if self.holes.contains(&cell) {
                return Err(EnvError::InvalidSpec(format!(
                    "{name} {cell:?} overlaps a hole"
                )));
            }
        }
        for &hole in &self.holes {
            if !self.is_interior(hole) {
                return Err(EnvError::InvalidSpec(format!(
                    "hole {hole:?} is not interior"
                )));
            }
        }
        Ok(())
    }

    pub fn is_interior(&self, (r, c): (i64, i64)) -> bool {
        r >= 1 && r <= self.height - 2 && c >= 1 && c <= self.width - 2
    }

    pub fn is_wall(&self, cell: (i64, i64)) -> bool {
        !self.is_interior(cell)
    }

    /// Interior non-hole cells, row-major. The goal is traversable.
    pub fn traversable_cells(&self) -> Vec<(i64, i64)> {
        let mut cells = Vec::new();
        for r in 1..=self.height - 2 {
            for c in 1..=self.width - 2 {
                if !self.holes.contains(&(r, c)) {
                    cells.push((r, c));
                }
            }
        }
        cells
    }

    /// Cells an episode may start from: traversable cells minus the goal.
    pub fn start_cells(&self) -> Vec<(i64, i64)> {
        self.traversable_cells()
            .into_iter()
            .filter(|&c| c != self.goal)
            .collect()
    }

    pub fn is_valid_start(&self, cell: (i64, i64)) -> bool {
        self.is_interior(cell) && !self.holes.contains(&cell) && cell != self.goal
    }

    /// One transition. `step_index` is the 1-based count of steps taken in
    /// the episode including this one; reaching `max_steps` without another
    /// terminal condition times the episode out.
    ///
    /// Moving into a wall leaves the agent in place. Every transition pays
    /// `step_cost`; goal and hole rewards are added on top of it.
    pub fn step(&self, pos: &Position, action: usize, step_index: usize) -> StepOutcome {
        let (r, c) = pos.cell();
        debug_assert!(self.is_valid_start((r, c)) || (r, c) != self.goal);
        let (dr, dc) = GRID_DELTAS[action];
        let target = (r + dr, c + dc);
        let next = if self.is_wall(target) { (r, c) } else { target };
        let mut reward = self.step_cost;
        let kind = if next == self.goal {
            reward += self.goal_reward;
            TerminalKind::Goal
        } else if self.holes.contains(&next) {
            reward += self.hole_penalty;
            TerminalKind::Hole
        } else if step_index >= self.max_steps {
            TerminalKind::Timeout
        } else {
            TerminalKind::Running
        };
        StepOutcome {
            next: Position::new2(next.0 as f64, next.1 as f64),
            reward,
            kind,
        }
    }
}

/// Kinematic point-reach task in a box workspace.
///
/// The agent moves `step_size` along a single axis per step (or holds
/// still) and is penalized while it has not arrived at the target. Arrival
/// is per-axis: every coordinate must be within `tolerance` of the target.
/// Episodes always run to `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachSpec {
    pub low: [f64; 3],
    pub high: [f64; 3],
    pub target: [f64; 3],
    pub step_size: f64,
    pub tolerance: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_step_penalty")]
    pub per_step_penalty: f64,
    #[serde(default = "default_reach_start")]
    pub training_start: [f64; 3],
}

fn default_horizon() -> usize {
    50
}
fn default_step_penalty() -> f64 {
    -1.0
}
fn default_reach_start() -> [f64; 3] {
    [0.0; 3]
}

/// Reach actions: `2d` / `2d+1` move axis `d` by +/- `step_size`; the last
/// action is a no-op.
pub const REACH_ACTIONS: usize = 7;

/// Slack for boundary comparisons on reach coordinates. Repeated step
/// additions accumulate dust around 1e-16 while the decode lattice keeps
/// real margins around 1e-4 from bin edges, so 1e-9 classifies every
/// reachable coordinate exactly as real arithmetic would.
pub const BOUNDARY_EPS: f64 = 1e-9;

impl ReachSpec {
    /// Workspace cube of side 0.5 centered on the origin-fixed target.
    pub fn cube() -> Self {
        Self {
            low: [-0.25; 3],
            high: [0.25; 3],
            target: [0.0; 3],
            step_size: 0.05,
            tolerance: 0.05,
            horizon: default_horizon(),
            per_step_penalty: default_step_penalty(),
            training_start: default_reach_start(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.tolerance <= 0.0 {
            return Err(EnvError::InvalidSpec("tolerance must be > 0".into()));
        }
        if self.step_size <= 0.0 {
            return Err(EnvError::InvalidSpec("step_size must be > 0".into()));
        }
        if self.horizon < 1 {
            return Err(EnvError::InvalidSpec("horizon must be >= 1".into()));
        }
        for d in 0..3 {
            if self.low[d] > self.high[d] {
                return Err(EnvError::InvalidSpec(format!(
                    "axis {d} bounds are inverted"
                )));
            }
            if self.target[d] < self.low[d] || self.target[d] > self.high[d] {
                return Err(EnvError::InvalidSpec(format!(
                    "target leaves bounds on axis {d}"
                )));
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, pos: &Position) -> bool {
        pos.coords()
            .iter()
            .enumerate()
            .all(|(d, &x)| x >= self.low[d] && x <= self.high[d])
    }

    /// Per-axis arrival window around the target.
    pub fn arrived(&self, pos: &Position) -> bool {
        pos.coords()
            .iter()
            .enumerate()
            .all(|(d, &x)| (x - self.target[d]).abs() <= self.tolerance + BOUNDARY_EPS)
    }

    pub fn step(&self, pos: &Position, action: usize, step_index: usize) -> StepOutcome {
        let mut coords = [pos.coords()[0], pos.coords()[1], pos.coords()[2]];
        if action < 6 {
            let axis = action / 2;
            let sign = if action.is_multiple_of(2) { 1.0 } else { -1.0 };
            coords[axis] =
                (coords[axis] + sign * self.step_size).clamp(self.low[axis], self.high[axis]);
        }
        let next = Position::new3(coords[0], coords[1], coords[2]);
        let reward = if self.arrived(&next) {
            0.0
        } else {
            self.per_step_penalty
        };
        let kind = if step_index >= self.horizon {
            TerminalKind::Timeout
        } else {
            TerminalKind::Running
        };
        StepOutcome { next, reward, kind }
    }

    /// Bin count per axis at `step_size` resolution.
    pub fn bins(&self) -> [u64; 3] {
        std::array::from_fn(|d| {
            let span = self.high[d] - self.low[d];
            (((span / self.step_size) - 1e-9).ceil().max(1.0)) as u64
        })
    }

    pub fn bin_index(&self, pos: &Position) -> [i64; 3] {
        let bins = self.bins();
        let mut idx = [0i64; 3];
        for d in 0..3 {
            let raw =
                ((pos.coords()[d] - self.low[d]) / self.step_size + BOUNDARY_EPS).floor() as i64;
            idx[d] = raw.clamp(0, bins[d] as i64 - 1);
        }
        idx
    }
}

/// Environment selector; every operation dispatches on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Env {
    Grid(GridSpec),
    Reach(ReachSpec),
}

impl Env {
    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            Env::Grid(g) => g.validate(),
            Env::Reach(r) => r.validate(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Env::Grid(_) => 2,
            Env::Reach(_) => 3,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Env::Grid(_) => GRID_ACTIONS,
            Env::Reach(_) => REACH_ACTIONS,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Env::Grid(g) => g.max_steps,
            Env::Reach(r) => r.horizon,
        }
    }

    pub fn training_start(&self) -> Position {
        match self {
            Env::Grid(g) => Position::new2(g.training_start.0 as f64, g.training_start.1 as f64),
            Env::Reach(r) => Position::from_slice(&r.training_start),
        }
    }

    pub fn is_valid_start(&self, pos: &Position) -> bool {
        match self {
            Env::Grid(g) => pos.dim() == 2 && g.is_valid_start(pos.cell()),
            Env::Reach(r) => pos.dim() == 3 && r.in_bounds(pos),
        }
    }

    pub fn step(&self, pos: &Position, action: usize, step_index: usize) -> StepOutcome {
        match self {
            Env::Grid(g) => g.step(pos, action, step_index),
            Env::Reach(r) => r.step(pos, action, step_index),
        }
    }

    /// Position extraction from an observable state. States here already
    /// are agent positions, so this is the identity.
    pub fn rho(&self, state: &Position) -> Position {
        *state
    }

    /// Size of the discretized position space: traversable cells for grids,
    /// the product of per-axis `step_size` bins for the reach task.
    pub fn position_space_size(&self) -> u64 {
        match self {
            Env::Grid(g) => g.traversable_cells().len() as u64,
            Env::Reach(r) => r.bins().iter().product(),
        }
    }

    /// Largest Euclidean distance between two positions, taken over the
    /// corners of the position space.
    pub fn max_state_distance(&self) -> f64 {
        match self {
            Env::Grid(g) => {
                let dr = (g.height - 3) as f64;
                let dc = (g.width - 3) as f64;
                (dr * dr + dc * dc).sqrt()
            }
            Env::Reach(r) => {
                let mut acc = 0.0;
                for d in 0..3 {
                    let span = r.high[d] - r.low[d];
                    acc += span * span;
                }
                acc.sqrt()
            }
        }
    }

    /// Discrete key for tabular policies and coverage counting. Identity on
    /// grid cells, `step_size` binning on reach coordinates.
    pub fn state_key(&self, pos: &Position) -> StateKey {
        match self {
            Env::Grid(_) => {
                let (r, c) = pos.cell();
                StateKey([r, c, 0])
            }
            Env::Reach(r) => StateKey(r.bin_index(pos)),
        }
    }
}
