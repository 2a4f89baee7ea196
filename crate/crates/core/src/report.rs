//! Evaluation artifacts derived from run logs: log-scaled visitation
//! heatmaps, fidelity curves, fitness composition stacks, distribution
//! statistics, and the on-disk export of all of them.
//!
//! Every function here is a pure transformation of its log, so re-exporting
//! the same log yields byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, GridSpec};
use crate::metrics::{self, FitnessMode};
use crate::policy::Trajectory;
use crate::runlog::RunLog;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("heatmaps need a two-dimensional grid position space")]
    NotAGrid,
    #[error("no fitness composition for `{0}` logs")]
    NoComposition(String),
    #[error("empty input")]
    EmptyInput,
    #[error("artifact io: {0}")]
    Io(#[from] std::io::Error),
    #[error("heatmap matrix parse error: {0}")]
    MatrixParse(String),
}

/// Per-cell visit counts over a grid, with walls and holes masked.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    counts: Vec<u64>,
    mask: Vec<bool>,
}

impl Heatmap {
    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.width + col]
    }

    pub fn masked(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `log(1 + count)` per cell; zero-count cells stay finite.
    pub fn log_scaled(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| (1.0 + c as f64).ln()).collect()
    }

    /// ASCII portable graymap of the log-scaled counts; masked cells render
    /// black.
    pub fn to_pgm(&self) -> String {
        let log = self.log_scaled();
        let max = log
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| !m)
            .map(|(&v, _)| v)
            .fold(0.0f64, f64::max);
        let mut out = String::new();
        out.push_str("P2\n");
        let _ = writeln!(out, "{} {}", self.width, self.height);
        out.push_str("255\n");
        for row in 0..self.height {
            let mut line = String::new();
            for col in 0..self.width {
                let i = row * self.width + col;
                let pixel = if self.mask[i] || max == 0.0 {
                    0
                } else {
                    (255.0 * log[i] / max).round() as u32
                };
                if col > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{pixel}");
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Raw counts as a tab-separated matrix with a header row.
    pub fn to_matrix_tsv(&self) -> String {
        let mut out = String::from("row");
        for col in 0..self.width {
            let _ = write!(out, "\tc{col}");
        }
        out.push('\n');
        for row in 0..self.height {
            let _ = write!(out, "{row}");
            for col in 0..self.width {
                let _ = write!(out, "\t{}", self.count(row, col));
            }
            out.push('\n');
        }
        out
    }

    /// Parse a matrix written by [`Heatmap::to_matrix_tsv`] back into counts.
    pub fn parse_matrix_tsv(text: &str) -> Result<Vec<Vec<u64>>, ReportError> {
        let mut rows = Vec::new();
        for line in text.lines().skip(1) {
            let cells: Result<Vec<u64>, _> =
                line.split('\t').skip(1).map(str::parse::<u64>).collect();
            rows.push(cells.map_err(|e| ReportError::MatrixParse(e.to_string()))?);
        }
        Ok(rows)
    }
}

/// Visit counts over all raw (pre-deduplication) positions, so dwell time
/// stays visible. Local diversity deliberately uses the deduplicated
/// sequences instead; the two consumers differ.
pub fn heatmap<'a, I>(trajectories: I, env: &Env) -> Result<Heatmap, ReportError>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let grid = match env {
        Env::Grid(g) => g,
        Env::Reach(_) => return Err(ReportError::NotAGrid),
    };
    let width = grid.width as usize;
    let height = grid.height as usize;
    let mut counts = vec![0u64; width * height];
    for traj in trajectories {
        for pos in &traj.raw_positions {
            let (r, c) = pos.cell();
            counts[r as usize * width + c as usize] += 1;
        }
    }
    let mask = build_mask(grid);
    Ok(Heatmap {
        width,
        height,
        counts,
        mask,
    })
}

fn build_mask(grid: &GridSpec) -> Vec<bool> {
    let width = grid.width as usize;
    let height = grid.height as usize;
    let mut mask = vec![false; width * height];
    for r in 0..height {
        for c in 0..width {
            let cell = (r as i64, c as i64);
            mask[r * width + c] = grid.is_wall(cell) || grid.holes.contains(&cell);
        }
    }
    mask
}

/// Fidelity of the surviving demo set, one value per generation.
pub fn fidelity_curve(log: &RunLog) -> Vec<f64> {
    log.fidelity_series()
}

/// Population means of the fitness components for one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub generation: u32,
    pub d_global: f64,
    pub f_local: f64,
    pub d_local: f64,
    pub certainty: f64,
    pub mean_total: f64,
}

/// Per-generation component stack. Only joint and sum logs decompose; the
/// stacked components always recompose to the mean total.
pub fn fitness_composition(log: &RunLog) -> Result<Vec<CompositionRow>, ReportError> {
    let mode = log
        .meta
        .evolve
        .as_ref()
        .map(|e| e.fitness_mode)
        .ok_or_else(|| ReportError::NoComposition(log.meta.kind.clone()))?;
    if !mode.has_composition() {
        return Err(ReportError::NoComposition(log.meta.kind.clone()));
    }
    let rows = log
        .generations
        .iter()
        .map(|record| {
            let n = record.members.len() as f64;
            let mut row = CompositionRow {
                generation: record.generation,
                d_global: 0.0,
                f_local: 0.0,
                d_local: 0.0,
                certainty: 0.0,
                mean_total: 0.0,
            };
            for m in &record.members {
                row.d_global += m.fitness.d_global;
                row.f_local += m.fitness.f_local;
                row.d_local += m.fitness.d_local;
                row.certainty += m.fitness.certainty;
                row.mean_total += m.fitness.total;
            }
            row.d_global /= n;
            row.f_local /= n;
            row.d_local /= n;
            row.certainty /= n;
            row.mean_total /= n;
            row
        })
        .collect();
    Ok(rows)
}

/// The components that stack up to the mean total for `mode`.
pub fn stack_sum(row: &CompositionRow, mode: FitnessMode) -> f64 {
    match mode {
        FitnessMode::Joint => row.d_global + row.f_local,
        FitnessMode::Sum => row.d_global + row.d_local + row.certainty,
        _ => row.mean_total,
    }
}

/// Five-number summary with interquartile range and 1.5 IQR whiskers
/// clamped to the data range. Quartiles use linear interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

pub fn distribution_stats(values: &[f64]) -> Result<DistributionStats, ReportError> {
    if values.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| {
        a.partial_cmp(b)
            .expect("distribution values are comparable")
    });
    let quantile = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let q1 = quantile(0.25);
    let median = quantile(0.5);
    let q3 = quantile(0.75);
    let iqr = q3 - q1;
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    Ok(DistributionStats {
        min,
        q1,
        median,
        q3,
        max,
        iqr,
        whisker_low: (q1 - 1.5 * iqr).max(min),
        whisker_high: (q3 + 1.5 * iqr).min(max),
    })
}

/// Return and episode-length distributions of the final demo set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolDistributions {
    pub returns: DistributionStats,
    pub lengths: DistributionStats,
}

pub fn pool_distributions(log: &RunLog) -> Result<PoolDistributions, ReportError> {
    if log.demos.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let returns: Vec<f64> = log.demos.iter().map(|d| d.trajectory.ret).collect();
    let lengths: Vec<f64> = log
        .demos
        .iter()
        .map(|d| d.trajectory.steps.len() as f64)
        .collect();
    Ok(PoolDistributions {
        returns: distribution_stats(&returns)?,
        lengths: distribution_stats(&lengths)?,
    })
}

/// Fixed artifact file names, written into the run directory.
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const FIDELITY_CURVE_FILE: &str = "fidelity_curve.tsv";
pub const FITNESS_STACK_FILE: &str = "fitness_stack.tsv";
pub const HEATMAP_FILE: &str = "heatmap.pgm";
pub const HEATMAP_MATRIX_FILE: &str = "heatmap_matrix.tsv";
pub const DISTRIBUTIONS_FILE: &str = "distributions.tsv";
pub const TRAJECTORIES_FILE: &str = "trajectories.tsv";
pub const TRAJECTORIES_SVG_FILE: &str = "trajectories.svg";

/// Write every artifact the log supports into `out_dir` and return the
/// written paths. Grids get heatmaps; the reach task gets projected
/// trajectory drawings instead.
pub fn export_artifacts(log: &RunLog, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, content: String| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };

    emit(SUMMARY_FILE, summary_tsv(log))?;
    emit(FIDELITY_CURVE_FILE, fidelity_curve_tsv(log))?;
    if let Ok(rows) = fitness_composition(log) {
        emit(FITNESS_STACK_FILE, fitness_stack_tsv(&rows))?;
    }
    if !log.demos.is_empty() {
        emit(
            DISTRIBUTIONS_FILE,
            distributions_tsv(&pool_distributions(log)?),
        )?;
        emit(TRAJECTORIES_FILE, trajectories_tsv(log))?;
    }
    match &log.meta.env {
        Env::Grid(_) => {
            let map = heatmap(log.demos.iter().map(|d| &d.trajectory), &log.meta.env)?;
            emit(HEATMAP_FILE, map.to_pgm())?;
            emit(HEATMAP_MATRIX_FILE, map.to_matrix_tsv())?;
        }
        Env::Reach(r) => {
            if !log.demos.is_empty() {
                emit(TRAJECTORIES_SVG_FILE, trajectories_svg(log, r))?;
            }
        }
    }
    Ok(written)
}

fn summary_tsv(log: &RunLog) -> String {
    let mut out = String::from("key\tvalue\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}\t{v}");
    };
    kv("kind", log.meta.kind.clone());
    kv("seed", log.meta.seed.to_string());
    kv("schema_version", log.meta.schema_version.to_string());
    kv("bits_per_dim", log.meta.bits_per_dim.to_string());
    if let Some(evolve) = &log.meta.evolve {
        kv("population_size", evolve.population_size.to_string());
        kv("generations", evolve.generations.to_string());
        kv("crossover_prob", evolve.crossover_prob.to_string());
        kv("mutation_prob", evolve.mutation_prob.to_string());
        kv("tournament_size", evolve.tournament_size.to_string());
    }
    if let Some(last) = log.generations.last() {
        kv("final_fidelity", last.fidelity.fidelity.to_string());
        kv("abs_mean_reward", last.fidelity.abs_mean_reward.to_string());
        kv("total_length", last.fidelity.total_length.to_string());
    }
    kv("demos", log.demos.len().to_string());
    if !log.demos.is_empty() {
        let mut pool = metrics::DemoPool::new();
        for demo in &log.demos {
            pool.insert(
                demo.id,
                metrics::PoolEntry {
                    trajectory: demo.trajectory.clone(),
                    d_local: demo.d_local,
                    certainty: demo.certainty,
                },
            );
        }
        if let Ok(gaps) = metrics::optimality_gap(&pool, &log.meta.env) {
            kv("gap_mean", gaps.mean.to_string());
            kv("gap_min", gaps.min.to_string());
            kv("gap_max", gaps.max.to_string());
        }
    }
    out
}

fn fidelity_curve_tsv(log: &RunLog) -> String {
    let mut out = String::from("generation\tfidelity\tabs_mean_reward\ttotal_length\n");
    for record in &log.generations {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            record.generation,
            record.fidelity.fidelity,
            record.fidelity.abs_mean_reward,
            record.fidelity.total_length
        );
    }
    out
}

fn fitness_stack_tsv(rows: &[CompositionRow]) -> String {
    let mut out = String::from("generation\td_global\tf_local\td_local\tcertainty\tmean_total\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            row.generation, row.d_global, row.f_local, row.d_local, row.certainty, row.mean_total
        );
    }
    out
}

fn distributions_tsv(dist: &PoolDistributions) -> String {
    let mut out =
        String::from("metric\tmin\tq1\tmedian\tq3\tmax\tiqr\twhisker_low\twhisker_high\n");
    for (name, d) in [("returns", dist.returns), ("lengths", dist.lengths)] {
        let _ = writeln!(
            out,
            "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.min, d.q1, d.median, d.q3, d.max, d.iqr, d.whisker_low, d.whisker_high
        );
    }
    out
}

fn trajectories_tsv(log: &RunLog) -> String {
    let dim = log.meta.env.dim();
    let mut out = String::from("demo_id\tpoint\t");
    out.push_str(if dim == 2 { "row\tcol" } else { "x\ty\tz" });
    out.push('\n');
    for demo in &log.demos {
        for (i, pos) in demo.trajectory.raw_positions.iter().enumerate() {
            let _ = write!(out, "{}\t{i}", demo.id);
            for &c in pos.coords() {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
    }
    out
}

const SVG_COLORS: [&str; 10] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
    "#1f78b4", "#b2df8a",
];

/// Three orthographic projections (xy, xz, yz) of the demo trajectories.
fn trajectories_svg(log: &RunLog, reach: &crate::env::ReachSpec) -> String {
    let panel = 260.0;
    let margin = 30.0;
    let width = 3.0 * panel + 4.0 * margin;
    let height = panel + 2.0 * margin;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    for (panel_idx, &(ax, ay, label)) in [(0usize, 1usize, "xy"), (0, 2, "xz"), (1, 2, "yz")]
        .iter()
        .enumerate()
    {
        let x0 = margin + panel_idx as f64 * (panel + margin);
        let y0 = margin;
        let sx = |v: f64| x0 + (v - reach.low[ax]) / (reach.high[ax] - reach.low[ax]) * panel;
        let sy =
            |v: f64| y0 + panel - (v - reach.low[ay]) / (reach.high[ay] - reach.low[ay]) * panel;
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{panel}" height="{panel}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" font-size="12" fill="#333">{label}</text>"##,
            x0 + 4.0,
            y0 + 14.0
        );
        // target marker
        let _ = writeln!(
            out,
            r##"<circle cx="{:.3}" cy="{:.3}" r="3" fill="none" stroke="#000"/>"##,
            sx(reach.target[ax]),
            sy(reach.target[ay])
        );
        for (i, demo) in log.demos.iter().enumerate() {
            let color = SVG_COLORS[i % SVG_COLORS.len()];
            let mut points = String::new();
            for pos in &demo.trajectory.raw_positions {
                let _ = write!(
                    points,
                    "{:.3},{:.3} ",
                    sx(pos.coords()[ax]),
                    sy(pos.coords()[ay])
                );
            }
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2" opacity="0.85"/>"#,
                points.trim_end()
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::GenomeSpec;
    use crate::env::{Position, ReachSpec, TerminalKind};
    use crate::evolve::{run, run_training_baseline, EvolveConfig, RunContext};
    use crate::policy::{train_q, RolloutMode, Step, TrainConfig};

    fn grid_log(generations: u32, mode: FitnessMode) -> RunLog {
        let env = Env::Grid(GridSpec::flat11());
        let policy = train_q(
            &env,
            &TrainConfig {
                episodes: 100,
                ..TrainConfig::grid_full(2)
            },
        );
        let spec = GenomeSpec::for_env(&env, 6).unwrap();
        let config = EvolveConfig {
            generations,
            population_size: 5,
            ..EvolveConfig::new(7, mode)
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

    fn line_traj(cells: &[(i64, i64)]) -> Trajectory {
        let raw: Vec<Position> = cells
            .iter()
            .map(|&(r, c)| Position::new2(r as f64, c as f64))
            .collect();
        Trajectory {
            steps: cells[1..]
                .iter()
                .map(|&(r, c)| Step {
                    state: Position::new2(r as f64, c as f64),
                    action: 0,
                    action_prob: 1.0,
                    reward: -1.0,
                })
                .collect(),
            ret: -(cells.len() as f64 - 1.0),
            kind: TerminalKind::Timeout,
            raw_positions: raw.clone(),
            positions: crate::policy::dedupe(&raw),
        }
    }

    #[test]
    fn heatmap_counts_conserve_raw_lengths() {
        let env = Env::Grid(GridSpec::flat11());
        let t1 = line_traj(&[(1, 1), (1, 2), (1, 3)]);
        let t2 = line_traj(&[(5, 5), (5, 5), (6, 5)]);
        let map = heatmap([&t1, &t2], &env).unwrap();
        assert_eq!(map.total(), (t1.raw_len() + t2.raw_len()) as u64);
        assert_eq!(map.count(1, 1), 1);
        assert_eq!(map.count(1, 2), 1);
        assert_eq!(map.count(5, 5), 2);
        // empty pool -> all-zero counts
        let empty = heatmap(std::iter::empty(), &env).unwrap();
        assert_eq!(empty.total(), 0);
    }

    #[test]
    fn heatmap_rejects_the_reach_task() {
        let env = Env::Reach(ReachSpec::cube());
        assert!(matches!(
            heatmap(std::iter::empty(), &env),
            Err(ReportError::NotAGrid)
        ));
    }

    #[test]
    fn heatmap_matrix_round_trips() {
        let env = Env::Grid(GridSpec::holey11());
        let t1 = line_traj(&[(1, 1), (2, 1), (3, 1), (3, 1)]);
        let map = heatmap([&t1], &env).unwrap();
        let parsed = Heatmap::parse_matrix_tsv(&map.to_matrix_tsv()).unwrap();
        for (row, cells) in parsed.iter().enumerate() {
            for (col, &count) in cells.iter().enumerate() {
                assert_eq!(count, map.count(row, col));
            }
        }
    }

    #[test]
    fn fidelity_curve_has_one_point_per_generation() {
        let log = grid_log(3, FitnessMode::Joint);
        assert_eq!(fidelity_curve(&log).len(), 4);
        let g0 = grid_log(0, FitnessMode::Joint);
        assert_eq!(fidelity_curve(&g0).len(), 1);
    }

    #[test]
    fn training_baseline_curve_is_zero() {
        let env = Env::Grid(GridSpec::flat11());
        let policy = train_q(&env, &TrainConfig::grid_full(3));
        let log = run_training_baseline(&env, &policy, RolloutMode::Greedy);
        assert_eq!(fidelity_curve(&log), vec![0.0]);
    }

    #[test]
    fn composition_stacks_recompose_and_include_first_individual_convention() {
        let log = grid_log(3, FitnessMode::Joint);
        let rows = fitness_composition(&log).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!((stack_sum(row, FitnessMode::Joint) - row.mean_total).abs() < 1e-9);
        }
        // generation 0 contains the maximally novel first individual
        let max_f_local = log.generations[0]
            .members
            .iter()
            .map(|m| m.fitness.f_local)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max_f_local, std::f64::consts::SQRT_2);
    }

    #[test]
    fn single_component_logs_have_no_composition() {
        let log = grid_log(1, FitnessMode::CertaintyOnly);
        assert!(matches!(
            fitness_composition(&log),
            Err(ReportError::NoComposition(_))
        ));
    }

    #[test]
    fn distribution_stats_examples() {
        let d = distribution_stats(&[4.0; 6]).unwrap();
        assert_eq!(d.iqr, 0.0);
        assert_eq!(d.min, d.max);

        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        let d = distribution_stats(&v).unwrap();
        assert_eq!(d.median, 4.5);
        assert_eq!(d.q1, 2.75);
        assert_eq!(d.q3, 6.25);
        assert_eq!(d.iqr, 3.5);
        assert!(d.whisker_low >= d.min && d.whisker_high <= d.max);
    }

    #[test]
    fn distribution_ordering_holds_on_fuzzed_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..500 {
            let n = rng.gen_range(1..40);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let d = distribution_stats(&values).unwrap();
            assert!(d.min <= d.q1 && d.q1 <= d.median && d.median <= d.q3 && d.q3 <= d.max);
            assert!(d.whisker_low >= d.min && d.whisker_high <= d.max);
        }
    }

    #[test]
    fn exports_are_deterministic_and_complete() {
        let log = grid_log(2, FitnessMode::Joint);
        let dir = tempfile::tempdir().unwrap();
        let first = export_artifacts(&log, dir.path()).unwrap();
        let snapshot: Vec<(PathBuf, Vec<u8>)> = first
            .iter()
            .map(|p| (p.clone(), fs::read(p).unwrap()))
            .collect();
        let second = export_artifacts(&log, dir.path()).unwrap();
        assert_eq!(first, second);
        for (path, bytes) in snapshot {
            assert_eq!(
                fs::read(&path).unwrap(),
                bytes,
                "{path:?} changed on re-export"
            );
        }
        let names: Vec<String> = first
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for expected in [
            SUMMARY_FILE,
            FIDELITY_CURVE_FILE,
            FITNESS_STACK_FILE,
            HEATMAP_FILE,
            HEATMAP_MATRIX_FILE,
            DISTRIBUTIONS_FILE,
            TRAJECTORIES_FILE,
        ] {
            assert!(names.contains(&expected.to_string()), "missing {expected}");
        }
        // curve row count = generations + 1 (+ header)
        let curve = fs::read_to_string(dir.path().join(FIDELITY_CURVE_FILE)).unwrap();
        assert_eq!(curve.lines().count(), 1 + log.generations.len());
    }

    #[test]
    fn reach_logs_export_svg_instead_of_heatmap() {
        let env = Env::Reach(ReachSpec::cube());
        let policy = train_q(
            &env,
            &TrainConfig {
                episodes: 300,
                ..TrainConfig::reach_converged(3)
            },
        );
        let spec = GenomeSpec::for_env(&env, 9).unwrap();
        let config = EvolveConfig {
            generations: 1,
            population_size: 4,
            ..EvolveConfig::new(3, FitnessMode::Joint)
        };
        let log = run(
            RunContext {
                env: &env,
                policy: &policy,
                genome_spec: &spec,
            },
            &config,
        );
        let dir = tempfile::tempdir().unwrap();
        let written = export_artifacts(&log, dir.path()).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&TRAJECTORIES_SVG_FILE.to_string()));
        assert!(!names.contains(&HEATMAP_FILE.to_string()));
        let svg = fs::read_to_string(dir.path().join(TRAJECTORIES_SVG_FILE)).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 3 * log.demos.len());
    }
}
