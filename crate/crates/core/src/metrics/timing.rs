use std::fmt::Display;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Source of timestamps in seconds. Tests inject scripted clocks.
pub trait Clock: Send {
    fn now(&mut self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for MonotonicClock {
    fn now(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("no patterns to benchmark")]
    EmptyPatterns,
    #[error("at least one run per pattern is required")]
    ZeroRuns,
    #[error("subject failed on pattern {pattern}: {message}")]
    Subject { pattern: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    /// Every individual run time, per pattern.
    pub runs: Vec<Vec<f64>>,
    /// Minimum run time per pattern.
    pub t_min: Vec<f64>,
    /// Mean of `t_min` across patterns.
    pub mean: f64,
    /// Sample standard deviation of `t_min` (N - 1 denominator; 0 for a
    /// single pattern).
    pub std: f64,
    pub n_runs: usize,
}

impl TimingSummary {
    pub fn from_runs(runs: Vec<Vec<f64>>) -> Self {
        let n_runs = runs.first().map_or(0, Vec::len);
        let t_min: Vec<f64> = runs
            .iter()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let (mean, std) = mean_and_std(&t_min);
        Self {
            runs,
            t_min,
            mean,
            std,
            n_runs,
        }
    }
}

/// Mean and sample standard deviation.
pub(crate) fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|t| (t - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Times `subject` on every pattern `n_runs` times and keeps the minimum
/// per pattern.
///
/// Only the call itself is inside the timed region; anything the subject
/// needs (models, rasterized grids) must be prepared by the caller. The
/// loop runs on its own thread and nothing else is timed concurrently.
pub fn benchmark_time<P, R, E, F, C>(
    patterns: &[P],
    n_runs: usize,
    mut clock: C,
    mut subject: F,
) -> Result<TimingSummary, TimingError>
where
    P: Sync,
    E: Display,
    F: FnMut(&P) -> Result<R, E> + Send,
    C: Clock,
{
    if patterns.is_empty() {
        return Err(TimingError::EmptyPatterns);
    }
    if n_runs == 0 {
        return Err(TimingError::ZeroRuns);
    }
    let runs = std::thread::scope(|scope| {
        scope
            .spawn(move || {
                let mut runs = Vec::with_capacity(patterns.len());
                for (index, pattern) in patterns.iter().enumerate() {
                    let mut times = Vec::with_capacity(n_runs);
                    for _ in 0..n_runs {
                        let start = clock.now();
                        let out = subject(black_box(pattern));
                        let end = clock.now();
                        match out {
                            Ok(r) => {
                                black_box(r);
                            }
                            Err(e) => {
                                return Err(TimingError::Subject {
                                    pattern: index,
                                    message: e.to_string(),
                                })
                            }
                        }
                        times.push(end - start);
                    }
                    runs.push(times);
                }
                Ok(runs)
            })
            .join()
            .expect("benchmark thread panicked")
    })?;
    Ok(TimingSummary::from_runs(runs))
}
