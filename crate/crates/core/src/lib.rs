//! Evolutionary selection of diverse, interpretable policy demonstrations.
//!
//! A fixed policy is probed by evolving a small population of perturbed
//! initial states; the trajectories it produces from them form a living
//! demonstration pool optimized for diversity, behavioral certainty spread,
//! and novelty. The crate provides the environments, the tabular policy
//! machinery, the genome encoding of initial states, the fitness metrics,
//! the evolutionary loop, and the report/export layer.

pub mod batch;
pub mod encoding;
pub mod env;
pub mod evolve;
pub mod metrics;
pub mod policy;
pub mod report;
pub mod runlog;

pub use encoding::{Genome, GenomeSpec};
pub use env::{Env, GridSpec, Position, ReachSpec, StepOutcome, TerminalKind};
pub use evolve::{EvolveConfig, Individual, Population};
pub use metrics::{DemoPool, FidelityReport, FitnessBreakdown, FitnessMode};
pub use policy::{RolloutMode, TabularPolicy, TrainConfig, Trajectory};
pub use runlog::RunLog;
