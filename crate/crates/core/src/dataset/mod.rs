//! Random dispense patterns, heuristic-labelled training pairs, and the TIMD
//! dataset file format.

mod timd;

pub use timd::{load_dataset, read_dataset, save_dataset, write_dataset, TIMD_MAGIC, TIMD_VERSION};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridSpec, TimGrid};
use crate::heuristic::{compress, CompressError, CompressionConfig};
use crate::pattern::{DispensePattern, Point};
use crate::raster::{discretize, RasterError};
use crate::surrogate::{derive_run_seed, Sample};

/// Attempts per record before generation is declared stalled (a rejection
/// rate above 99%).
const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error("generation stalled: record {record} rejected {attempts} consecutive patterns")]
    GenerationStalled { record: usize, attempts: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Compress(#[from] CompressError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub count: usize,
    pub resolution: GridSpec,
    /// Inclusive range of segment counts.
    pub segments: (usize, usize),
    /// Cells kept clear of pattern points along every border.
    pub margin: usize,
    /// Feeds are drawn uniformly from `[feed.0, feed.1]`.
    pub feed: (f64, f64),
    /// Patterns whose dispensed mass exceeds this are rejected.
    pub max_total_mass: f64,
}

impl GeneratorConfig {
    pub fn new(seed: u64, count: usize, resolution: GridSpec) -> Self {
        Self {
            seed,
            count,
            resolution,
            segments: (1, 6),
            margin: 8,
            feed: (0.5, 3.0),
            max_total_mass: resolution.cells() as f64 / 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidConfig(m));
        if self.count == 0 {
            return bad("count must be >= 1".into());
        }
        if self.segments.0 == 0 || self.segments.0 > self.segments.1 {
            return bad(format!("invalid segment range {:?}", self.segments));
        }
        if self.segments.1 > u16::MAX as usize {
            return bad("at most 65535 segments per pattern".into());
        }
        let (lo, hi) = self.feed;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return bad(format!("invalid feed range {:?}", self.feed));
        }
        if 2 * self.margin >= self.resolution.height || 2 * self.margin >= self.resolution.width {
            return bad(format!(
                "margin {} leaves no room on a {} grid",
                self.margin, self.resolution
            ));
        }
        if self.max_total_mass.is_nan() || self.max_total_mass <= 0.0 {
            return bad("max_total_mass must be positive".into());
        }
        Ok(())
    }

    pub fn save_sidecar(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| DatasetError::Format(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Format(e.to_string()))
    }
}

/// Draws one random polyline: segment count, points and feeds are uniform
/// within the configured ranges.
pub fn generate_pattern<R: Rng>(rng: &mut R, config: &GeneratorConfig) -> DispensePattern {
    let segments = rng.gen_range(config.segments.0..=config.segments.1);
    let m = config.margin as f64;
    let (w, h) = (config.resolution.width as f64, config.resolution.height as f64);
    let points: Vec<Point> = (0..=segments)
        .map(|_| [rng.gen_range(m..=w - m), rng.gen_range(m..=h - m)])
        .collect();
    let feeds = (0..segments)
        .map(|_| rng.gen_range(config.feed.0..=config.feed.1))
        .collect();
    DispensePattern::new(points, feeds).expect("generated pattern satisfies invariants")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub pattern: DispensePattern,
    pub dispensed: TimGrid,
    pub compressed: TimGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: GridSpec,
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.records
            .iter()
            .map(|r| Sample {
                dispensed: r.dispensed.clone(),
                compressed: r.compressed.clone(),
            })
            .collect()
    }

    /// First `len - validation` records for training, the rest for validation.
    pub fn split(&self, validation: usize) -> (Vec<Sample>, Vec<Sample>) {
        let mut all = self.samples();
        let cut = all.len().saturating_sub(validation);
        let val = all.split_off(cut);
        (all, val)
    }
}

/// Rasterizes and compresses one pattern in double precision. `None` when
/// the pattern must be rejected.
pub fn simulate_pattern(
    pattern: &DispensePattern,
    config: &GeneratorConfig,
) -> Option<(TimGrid, TimGrid)> {
    if pattern.total_mass() > config.max_total_mass {
        return None;
    }
    let dispensed = discretize(pattern, config.resolution).ok()?;
    let result = compress(&dispensed, &CompressionConfig::default()).ok()?;
    Some((dispensed, result.compressed))
}

/// Generates `config.count` accepted records. Record `i` draws from its own
/// random stream derived from `(seed, i)`, so the output does not depend on
/// how the work is scheduled.
pub fn build_dataset(config: &GeneratorConfig) -> Result<(Dataset, BuildStats), DatasetError> {
    config.validate()?;
    let results: Vec<Result<(Record, usize), DatasetError>> = (0..config.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_run_seed(config.seed, i as u64, 0));
            for attempt in 0..MAX_ATTEMPTS {
                let pattern = generate_pattern(&mut rng, config);
                if let Some((dispensed, compressed)) = simulate_pattern(&pattern, config) {
                    return Ok((
                        Record {
                            pattern,
                            dispensed: dispensed.to_f32_precision(),
                            compressed: compressed.to_f32_precision(),
                        },
                        attempt,
                    ));
                }
            }
            Err(DatasetError::GenerationStalled {
                record: i,
                attempts: MAX_ATTEMPTS,
            })
        })
        .collect();
    let mut records = Vec::with_capacity(config.count);
    let mut stats = BuildStats::default();
    for r in results {
        let (record, rejected) = r?;
        stats.accepted += 1;
        stats.rejected += rejected;
        records.push(record);
    }
    Ok((
        Dataset {
            spec: config.resolution,
            records,
        },
        stats,
    ))
}
