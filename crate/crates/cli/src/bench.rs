//! Heuristic-versus-surrogate timing and error benchmark.

use timflow_core::dataset::{build_dataset, DatasetError, GeneratorConfig};
use timflow_core::metrics::{
    benchmark_time, error_abs, error_rel, BenchRow, MethodSummary, MonotonicClock, TableReport,
    TimingSummary,
};
use timflow_core::surrogate::{predict_from_grid, SurrogateModel};
use timflow_core::{compress, CompressionConfig, GridSpec, Schedule, TimGrid};

use crate::CliError;

pub const HEURISTIC: &str = "heuristic";
pub const SURROGATE: &str = "surrogate";

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub report: TableReport,
    pub heuristic_timing: TimingSummary,
    pub surrogate_timing: Option<TimingSummary>,
}

/// Dispensed grids of `count` generated patterns that the heuristic accepts.
pub fn bench_grids(count: usize, seed: u64, spec: GridSpec) -> Result<Vec<TimGrid>, DatasetError> {
    let (dataset, _) = build_dataset(&GeneratorConfig::new(seed, count, spec))?;
    Ok(dataset.records.into_iter().map(|r| r.dispensed).collect())
}

/// Times both methods on pre-rasterized grids (rasterization and model
/// loading stay outside the timed region) and scores the surrogate against
/// the heuristic compressed with the same `schedule`.
pub fn run_bench(
    grids: &[TimGrid],
    runs: usize,
    schedule: Schedule,
    model: Option<&SurrogateModel>,
) -> Result<BenchOutcome, CliError> {
    let config = CompressionConfig::with_schedule(schedule);
    let references = grids
        .iter()
        .map(|g| compress(g, &config).map(|r| r.compressed))
        .collect::<Result<Vec<_>, _>>()?;

    tracing::info!(patterns = grids.len(), runs, "timing heuristic");
    let heuristic_timing = benchmark_time(grids, runs, MonotonicClock::default(), |g| {
        compress(g, &config)
    })?;
    let mut rows: Vec<BenchRow> = heuristic_timing
        .t_min
        .iter()
        .enumerate()
        .map(|(pattern_id, &t_min)| BenchRow {
            method: HEURISTIC.into(),
            pattern_id,
            e_comp: 0.0,
            e_rel: 0.0,
            t_min,
        })
        .collect();
    let mut methods = vec![MethodSummary::new(HEURISTIC, 0.0, &heuristic_timing)];

    let surrogate_timing = match model {
        None => None,
        Some(model) => {
            tracing::info!(patterns = grids.len(), runs, "timing surrogate");
            let timing = benchmark_time(grids, runs, MonotonicClock::default(), |g| {
                predict_from_grid(model, g, 1.0)
            })?;
            let mut e_sum = 0.0;
            for (pattern_id, (g, reference)) in grids.iter().zip(&references).enumerate() {
                let predicted = predict_from_grid(model, g, 1.0)?;
                let e_rel = error_rel(reference, &predicted)?;
                e_sum += e_rel;
                rows.push(BenchRow {
                    method: SURROGATE.into(),
                    pattern_id,
                    e_comp: error_abs(reference, &predicted)?,
                    e_rel,
                    t_min: timing.t_min[pattern_id],
                });
            }
            methods.push(MethodSummary::new(SURROGATE, e_sum / grids.len() as f64, &timing));
            Some(timing)
        }
    };

    Ok(BenchOutcome {
        rows,
        report: TableReport {
            reference: HEURISTIC.into(),
            methods,
        },
        heuristic_timing,
        surrogate_timing,
    })
}
