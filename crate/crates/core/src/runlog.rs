//! Line-delimited run logs: one meta record, one record per generation, and
//! one record per surviving demonstration. The format is versioned and
//! byte-stable for a fixed seed, so golden-file diffs work.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::Genome;
use crate::env::Env;
use crate::evolve::EvolveConfig;
use crate::metrics::{FidelityReport, FitnessBreakdown};
use crate::policy::Trajectory;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("run log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("run log parse error at line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("run log schema version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("run log has no meta record")]
    MissingMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: u32,
    /// Which runner produced the log: a fitness mode name, `random`, or
    /// `training`.
    pub kind: String,
    pub seed: u64,
    pub env: Env,
    pub evolve: Option<EvolveConfig>,
    pub bits_per_dim: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub id: u64,
    pub birth_generation: u32,
    pub fitness: FitnessBreakdown,
}

/// Post-migration snapshot of one generation. Generation 0 is the initial
/// population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u32,
    pub members: Vec<MemberRecord>,
    pub fidelity: FidelityReport,
    pub offspring_count: u32,
    pub survivor_ids: Vec<u64>,
}

/// One surviving demonstration of the final pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub id: u64,
    pub genome: Option<Genome>,
    pub trajectory: Trajectory,
    pub d_local: f64,
    pub certainty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    pub generations: Vec<GenerationRecord>,
    pub demos: Vec<DemoRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogLine {
    Meta(RunMeta),
    Generation(GenerationRecord),
    Demo(DemoRecord),
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

impl RunLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &LogLine| {
            out.push_str(&serde_json::to_string(line).expect("log records serialize"));
            out.push('\n');
        };
        push(&LogLine::Meta(self.meta.clone()));
        for generation in &self.generations {
            push(&LogLine::Generation(generation.clone()));
        }
        for demo in &self.demos {
            push(&LogLine::Demo(demo.clone()));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut meta = None;
        let mut generations = Vec::new();
        let mut demos = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line_no = idx + 1;
            if meta.is_none() {
                // check the version before the full parse so logs from other
                // schema versions fail with an explicit version error
                let probe: VersionProbe =
                    serde_json::from_str(raw).map_err(|source| LogError::Parse {
                        line: line_no,
                        source,
                    })?;
                if probe.schema_version != SCHEMA_VERSION {
                    return Err(LogError::Version {
                        found: probe.schema_version,
                        expected: SCHEMA_VERSION,
                    });
                }
            }
            let line: LogLine = serde_json::from_str(raw).map_err(|source| LogError::Parse {
                line: line_no,
                source,
            })?;
            match line {
                LogLine::Meta(m) => meta = Some(m),
                LogLine::Generation(g) => generations.push(g),
                LogLine::Demo(d) => demos.push(d),
            }
        }
        let meta = meta.ok_or(LogError::MissingMeta)?;
        Ok(RunLog {
            meta,
            generations,
            demos,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LogError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    /// Fidelity score per generation, index = generation.
    pub fn fidelity_series(&self) -> Vec<f64> {
        self.generations
            .iter()
            .map(|g| g.fidelity.fidelity)
            .collect()
    }

    pub fn final_fidelity(&self) -> f64 {
        self.generations
            .last()
            .map(|g| g.fidelity.fidelity)
            .unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GridSpec;
    use crate::evolve::{run, RunContext};
    use crate::metrics::FitnessMode;
    use crate::policy::{train_q, TrainConfig};

    fn small_log() -> RunLog {
        let env = Env::Grid(GridSpec::flat11());
        let policy = train_q(
            &env,
            &TrainConfig {
                episodes: 60,
                ..TrainConfig::grid_full(2)
            },
        );
        let spec = crate::encoding::GenomeSpec::for_env(&env, 6).unwrap();
        let config = EvolveConfig {
            generations: 2,
            population_size: 4,
            ..EvolveConfig::new(5, FitnessMode::Joint)
        };
        run(
            RunContext {
                env: &env,
                policy: &policy,
                genome_spec: &spec,
            },
            &config,
        )
    }

    #[test]
    fn jsonl_round_trips() {
        let log = small_log();
        let text = log.to_jsonl();
        let parsed = RunLog::from_jsonl(&text).unwrap();
        assert_eq!(parsed, log);
        assert_eq!(parsed.to_jsonl(), text);
    }

    #[test]
    fn parse_errors_carry_the_line_number() {
        let log = small_log();
        let mut text = log.to_jsonl();
        text.push_str("{broken\n");
        match RunLog::from_jsonl(&text) {
            Err(LogError::Parse { line, .. }) => {
                assert_eq!(line, log.generations.len() + log.demos.len() + 2)
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_other_schema_versions() {
        let log = small_log();
        let text = log
            .to_jsonl()
            .replace("\"schema_version\":1", "\"schema_version\":9");
        match RunLog::from_jsonl(&text) {
            Err(LogError::Version { found: 9, .. }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_missing_meta() {
        assert!(matches!(RunLog::from_jsonl(""), Err(LogError::MissingMeta)));
    }
}
