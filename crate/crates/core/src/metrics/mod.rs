//! Error metrics between compressed states, coverage and void diagnostics,
//! and the min-of-N timing protocol.

mod report;
mod timing;
mod voids;

pub use report::{
    read_csv_rows, write_csv_rows, BenchRow, MethodSummary, TableReport,
};
pub use timing::{benchmark_time, Clock, MonotonicClock, TimingError, TimingSummary};
pub use voids::{coverage_ratio, detect_voids, CellMask, Void};

use thiserror::Error;

use crate::grid::{GridSpec, TimGrid};

/// Default threshold for coverage and void detection, relative to a
/// termination height of 1.
pub const DEFAULT_COVER_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("grids differ in resolution: {a} vs {b}")]
    ShapeMismatch { a: GridSpec, b: GridSpec },
    #[error("reference grid has zero total amount")]
    ZeroReference,
    #[error("cannot average an empty list of grid pairs")]
    EmptyList,
    #[error("coverage region is empty")]
    EmptyRegion,
}

fn same_shape(a: &TimGrid, b: &TimGrid) -> Result<(), MetricsError> {
    if a.spec() != b.spec() {
        return Err(MetricsError::ShapeMismatch {
            a: a.spec(),
            b: b.spec(),
        });
    }
    Ok(())
}

/// Absolute error: sum over cells of `|a - b|`.
pub fn error_abs(a: &TimGrid, b: &TimGrid) -> Result<f64, MetricsError> {
    same_shape(a, b)?;
    Ok(a.amounts()
        .iter()
        .zip(b.amounts())
        .map(|(x, y)| (x - y).abs())
        .sum())
}

/// Relative error: absolute error divided by the total of the reference `a`.
pub fn error_rel(a: &TimGrid, b: &TimGrid) -> Result<f64, MetricsError> {
    let abs = error_abs(a, b)?;
    let reference = a.total();
    if reference == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok(abs / reference)
}

/// Mean of the relative errors over `(reference, candidate)` pairs.
pub fn error_mean(pairs: &[(&TimGrid, &TimGrid)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let mut sum = 0.0;
    for (a, b) in pairs {
        sum += error_rel(a, b)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Per-pattern and mean errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub absolute: Vec<f64>,
    pub relative: Vec<f64>,
    pub mean_relative: f64,
}

impl ErrorSummary {
    pub fn from_pairs(pairs: &[(&TimGrid, &TimGrid)]) -> Result<Self, MetricsError> {
        if pairs.is_empty() {
            return Err(MetricsError::EmptyList);
        }
        let mut absolute = Vec::with_capacity(pairs.len());
        let mut relative = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            absolute.push(error_abs(a, b)?);
            relative.push(error_rel(a, b)?);
        }
        let mean_relative = relative.iter().sum::<f64>() / relative.len() as f64;
        Ok(Self {
            absolute,
            relative,
            mean_relative,
        })
    }
}
