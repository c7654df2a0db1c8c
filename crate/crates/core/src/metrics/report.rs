use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::timing::{mean_and_std, TimingSummary};

/// One CSV row: a pattern evaluated by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub pattern_id: usize,
    pub e_comp: f64,
    pub e_rel: f64,
    pub t_min: f64,
}

pub fn write_csv_rows<W: Write>(out: W, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv_rows<R: Read>(input: R) -> csv::Result<Vec<BenchRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputationTime {
    pub mean: f64,
    pub std: f64,
    pub unit: String,
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_relative_error: f64,
    pub setup_time: String,
    pub computation_time: ComputationTime,
    pub patterns: usize,
    pub runs_per_pattern: usize,
}

impl MethodSummary {
    pub fn new(method: &str, mean_relative_error: f64, timing: &TimingSummary) -> Self {
        Self {
            method: method.to_string(),
            mean_relative_error,
            setup_time: "n/a".to_string(),
            computation_time: ComputationTime {
                mean: timing.mean,
                std: timing.std,
                unit: "s".to_string(),
            },
            patterns: timing.t_min.len(),
            runs_per_pattern: timing.n_runs,
        }
    }

    /// Recomputes the summary statistics from CSV rows of this method.
    pub fn recompute_from_rows(method: &str, rows: &[BenchRow]) -> Option<(f64, f64, f64)> {
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method).collect();
        if mine.is_empty() {
            return None;
        }
        let t: Vec<f64> = mine.iter().map(|r| r.t_min).collect();
        let (mean, std) = mean_and_std(&t);
        let e_mean = mine.iter().map(|r| r.e_rel).sum::<f64>() / mine.len() as f64;
        Some((e_mean, mean, std))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub reference: String,
    pub methods: Vec<MethodSummary>,
}

impl TableReport {
    /// Plain-text rendering, one row per method.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<12} {:>20} {:>10} {:>26}\n",
            "method", "mean relative error", "setup", "computation time [s]"
        );
        for m in &self.methods {
            s.push_str(&format!(
                "{:<12} {:>19.2}% {:>10} {:>14.6} ± {:<9.6}\n",
                m.method,
                100.0 * m.mean_relative_error,
                m.setup_time,
                m.computation_time.mean,
                m.computation_time.std
            ));
        }
        s
    }
}
