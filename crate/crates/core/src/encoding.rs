//! Bit-string genotypes for perturbed initial states.
//!
//! Each state dimension is encoded by `m` bits. Discrete dimensions decode
//! through floor-based inverse normalization over `2^m` codes; continuous
//! dimensions decode over `2^m - 1` so both interval endpoints are exactly
//! attainable. Decoding is total: grid genomes that land on a hole or the
//! goal are remapped to the nearest legal start cell.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, Position};

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("dimension {dim} needs {need} values but {m} bits only encode {have}")]
    InsufficientBits {
        dim: usize,
        m: u32,
        need: u64,
        have: u64,
    },
    #[error("genome length {got} does not match spec length {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("exhaustive enumeration over {bits} bits exceeds the {limit}-bit cap")]
    SpaceTooLarge { bits: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimKind {
    Discrete,
    Continuous,
}

/// Value range of one encoded dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub kind: DimKind,
    pub min: f64,
    pub max: f64,
}

impl DimSpec {
    pub fn discrete(min: i64, max: i64) -> Self {
        Self {
            kind: DimKind::Discrete,
            min: min as f64,
            max: max as f64,
        }
    }

    pub fn continuous(min: f64, max: f64) -> Self {
        Self {
            kind: DimKind::Continuous,
            min,
            max,
        }
    }

    fn value_count(&self) -> u64 {
        (self.max as i64 - self.min as i64 + 1) as u64
    }
}

/// Layout of a genome: `dims.len() * bits_per_dim` bits total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeSpec {
    pub dims: Vec<DimSpec>,
    pub bits_per_dim: u32,
}

/// Per-dimension skew above this ratio is worth flagging to the operator.
pub const SKEW_WARN_THRESHOLD: f64 = 1.25;

impl GenomeSpec {
    pub fn new(dims: Vec<DimSpec>, bits_per_dim: u32) -> Result<Self, EncodingError> {
        assert!(
            (1..=63).contains(&bits_per_dim),
            "bits_per_dim out of range"
        );
        for (i, dim) in dims.iter().enumerate() {
            assert!(dim.max >= dim.min, "dimension {i} has max < min");
            if dim.kind == DimKind::Discrete {
                let need = dim.value_count();
                let have = 1u64 << bits_per_dim;
                if have < need {
                    return Err(EncodingError::InsufficientBits {
                        dim: i,
                        m: bits_per_dim,
                        need,
                        have,
                    });
                }
            }
        }
        Ok(Self { dims, bits_per_dim })
    }

    /// Spec covering an environment's start-state space: grid rows/cols as
    /// discrete dims, reach axes as continuous dims.
    pub fn for_env(env: &Env, bits_per_dim: u32) -> Result<Self, EncodingError> {
        let dims = match env {
            Env::Grid(g) => vec![
                DimSpec::discrete(1, g.height - 2),
                DimSpec::discrete(1, g.width - 2),
            ],
            Env::Reach(r) => (0..3)
                .map(|d| DimSpec::continuous(r.low[d], r.high[d]))
                .collect(),
        };
        Self::new(dims, bits_per_dim)
    }

    /// Recommended bits per dimension: keeps grid skew at or below the warn
    /// threshold, and gives the reach task fine-grained resolution.
    pub fn default_bits(env: &Env) -> u32 {
        match env {
            Env::Grid(_) => 6,
            Env::Reach(_) => 9,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len() * self.bits_per_dim as usize
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Largest per-dimension max/min occurrence ratio over all dims.
    /// Continuous dimensions decode bijectively and contribute 1.
    pub fn skew_ratio(&self) -> f64 {
        let mut worst = 1.0f64;
        for dim in &self.dims {
            if dim.kind == DimKind::Discrete {
                let codes = 1u64 << self.bits_per_dim;
                let v = dim.value_count();
                let ratio = codes.div_ceil(v) as f64 / (codes / v) as f64;
                worst = worst.max(ratio);
            }
        }
        worst
    }

    /// Decode every dimension; no environment-legality remapping.
    pub fn decode_raw(&self, genome: &Genome) -> Result<Vec<f64>, EncodingError> {
        if genome.len() != self.len() {
            return Err(EncodingError::LengthMismatch {
                got: genome.len(),
                want: self.len(),
            });
        }
        let m = self.bits_per_dim as usize;
        let values = self
            .dims
            .iter()
            .enumerate()
            .map(|(d, dim)| {
                let segment = &genome.bits[d * m..(d + 1) * m];
                match dim.kind {
                    DimKind::Discrete => {
                        decode_discrete_dim(segment, dim.min as i64, dim.max as i64) as f64
                    }
                    DimKind::Continuous => decode_continuous_dim(segment, dim.min, dim.max),
                }
            })
            .collect();
        Ok(values)
    }

    /// Decode a genome to a legal initial state for `env`. Grid decodes
    /// landing on a hole or the goal move to the nearest start cell by
    /// Euclidean distance, ties broken by lowest row-major index.
    pub fn decode_start(&self, genome: &Genome, env: &Env) -> Result<Position, EncodingError> {
        let raw = self.decode_raw(genome)?;
        Ok(match env {
            Env::Grid(g) => {
                let cell = (raw[0] as i64, raw[1] as i64);
                if g.is_valid_start(cell) {
                    Position::new2(cell.0 as f64, cell.1 as f64)
                } else {
                    let mut best = None::<((i64, i64), f64)>;
                    for candidate in g.start_cells() {
                        let dr = (candidate.0 - cell.0) as f64;
                        let dc = (candidate.1 - cell.1) as f64;
                        let dist = (dr * dr + dc * dc).sqrt();
                        if best.is_none_or(|(_, d)| dist < d) {
                            best = Some((candidate, dist));
                        }
                    }
                    let (cell, _) = best.expect("grid has at least one start cell");
                    Position::new2(cell.0 as f64, cell.1 as f64)
                }
            }
            Env::Reach(_) => Position::from_slice(&raw),
        })
    }
}

/// Fixed-length bit vector, most significant bit first within each segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genome {
    bits: Vec<bool>,
}

impl Genome {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn hamming(&self, other: &Genome) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self::from_bits)
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for Genome {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Genome::parse(&s).ok_or_else(|| serde::de::Error::custom("genome must be a 0/1 string"))
    }
}

pub fn bits_to_int(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}

/// Floor-based inverse normalization over `2^m` codes: the result always
/// lies in `[min, max]` and is monotone in the integer value of `bits`.
pub fn decode_discrete_dim(bits: &[bool], min: i64, max: i64) -> i64 {
    let m = bits.len() as u32;
    let normalized = bits_to_int(bits) as f64 / (1u64 << m) as f64;
    let state = (normalized * (max + 1 - min) as f64 + min as f64).floor() as i64;
    state.clamp(min, max)
}

/// Inverse normalization over `2^m - 1` codes; all-zeros decodes to `min`
/// and all-ones to `max` exactly.
pub fn decode_continuous_dim(bits: &[bool], min: f64, max: f64) -> f64 {
    let m = bits.len() as u32;
    let denom = ((1u64 << m) - 1).max(1) as f64;
    let normalized = bits_to_int(bits) as f64 / denom;
    normalized * (max - min) + min
}

/// Smallest representable difference of a continuous dimension.
pub fn continuous_resolution(m: u32, min: f64, max: f64) -> f64 {
    (max - min) / ((1u64 << m) - 1) as f64
}

/// Copy of `genome` with exactly one uniformly chosen bit flipped.
pub fn mutate<R: Rng>(genome: &Genome, rng: &mut R) -> Genome {
    assert!(!genome.is_empty(), "cannot mutate an empty genome");
    let mut bits = genome.bits.clone();
    let idx = rng.gen_range(0..bits.len());
    bits[idx] = !bits[idx];
    Genome::from_bits(bits)
}

/// Single-point crossover with cut point in `[1, len - 1]`.
pub fn crossover_single_point<R: Rng>(
    a: &Genome,
    b: &Genome,
    rng: &mut R,
) -> Result<(Genome, Genome), EncodingError> {
    if a.len() != b.len() {
        return Err(EncodingError::LengthMismatch {
            got: b.len(),
            want: a.len(),
        });
    }
    if a.len() < 2 {
        return Ok((a.clone(), b.clone()));
    }
    let cut = rng.gen_range(1..a.len());
    Ok(crossover_at(a, b, cut))
}

pub(crate) fn crossover_at(a: &Genome, b: &Genome, cut: usize) -> (Genome, Genome) {
    let mut c1 = a.bits[..cut].to_vec();
    c1.extend_from_slice(&b.bits[cut..]);
    let mut c2 = b.bits[..cut].to_vec();
    c2.extend_from_slice(&a.bits[cut..]);
    (Genome::from_bits(c1), Genome::from_bits(c2))
}

/// Uniform random genome of the spec's length.
pub fn random_genome<R: Rng>(spec: &GenomeSpec, rng: &mut R) -> Genome {
    Genome::from_bits((0..spec.len()).map(|_| rng.gen::<bool>()).collect())
}

/// How many of the `2^m` codes decode to each value of a discrete dimension,
/// indexed by `value - min`.
pub fn occupancy_counts_per_dim(m: u32, min: i64, max: i64) -> Vec<u64> {
    let mut counts = vec![0u64; (max - min + 1) as usize];
    for code in 0..(1u64 << m) {
        let bits: Vec<bool> = (0..m).rev().map(|i| (code >> i) & 1 == 1).collect();
        let value = decode_discrete_dim(&bits, min, max);
        counts[(value - min) as usize] += 1;
    }
    counts
}

pub enum OccupancyMode {
    Exhaustive,
    Sampled { n: u64, seed: u64 },
}

/// Per-state decode counts over full genomes. Discrete dimensions key by
/// decoded value, continuous dimensions by their integer code.
pub struct OccupancyHistogram {
    pub counts: BTreeMap<Vec<i64>, u64>,
    pub total: u64,
}

impl OccupancyHistogram {
    pub fn max_min_ratio(&self) -> f64 {
        let max = self.counts.values().copied().max().unwrap_or(0);
        let min = self.counts.values().copied().min().unwrap_or(0);
        if min == 0 {
            f64::INFINITY
        } else {
            max as f64 / min as f64
        }
    }
}

const EXHAUSTIVE_BIT_CAP: usize = 24;

pub fn occupancy_histogram(
    spec: &GenomeSpec,
    mode: OccupancyMode,
) -> Result<OccupancyHistogram, EncodingError> {
    let key_of = |genome: &Genome| -> Vec<i64> {
        let m = spec.bits_per_dim as usize;
        spec.dims
            .iter()
            .enumerate()
            .map(|(d, dim)| {
                let segment = &genome.bits[d * m..(d + 1) * m];
                match dim.kind {
                    DimKind::Discrete => {
                        decode_discrete_dim(segment, dim.min as i64, dim.max as i64)
                    }
                    DimKind::Continuous => bits_to_int(segment) as i64,
                }
            })
            .collect()
    };

    let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    let total = match mode {
        OccupancyMode::Exhaustive => {
            let bits = spec.len();
            if bits > EXHAUSTIVE_BIT_CAP {
                return Err(EncodingError::SpaceTooLarge {
                    bits,
                    limit: EXHAUSTIVE_BIT_CAP,
                });
            }
            for code in 0..(1u64 << bits) {
                let genome =
                    Genome::from_bits((0..bits).rev().map(|i| (code >> i) & 1 == 1).collect());
                *counts.entry(key_of(&genome)).or_insert(0) += 1;
            }
            1u64 << bits
        }
        OccupancyMode::Sampled { n, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n {
                let genome = random_genome(spec, &mut rng);
                *counts.entry(key_of(&genome)).or_insert(0) += 1;
            }
            n
        }
    };
    Ok(OccupancyHistogram { counts, total })
}
