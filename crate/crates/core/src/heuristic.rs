//! Height-relaxation compression heuristic.
//!
//! An artificial ceiling starts at the tallest cell and is lowered step by
//! step to the termination height. After each step, every cell above the
//! ceiling sheds its excess in equal quarters to its four von Neumann
//! neighbours. Sweeps are synchronous: shed material is collected in a
//! separate buffer and applied after the whole grid has been visited, so
//! the visiting order cannot influence the result.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{GridSpec, TimGrid};

pub const DEFAULT_MAX_SWEEPS: u64 = 1_000_000;

/// Relaxation under ceiling `h` stops once every cell is at most
/// `h * (1 + SETTLE_TOLERANCE)`. Testing for exact `<= h` can cycle forever:
/// at the last ulp, rounding of the shed quarters keeps re-creating excess.
pub const SETTLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompressError {
    #[error("material would leave the grid at row {row}, column {col} (artificial height {artificial_height})")]
    MassOverflow {
        row: usize,
        col: usize,
        artificial_height: f64,
    },
    #[error("input grid contains non-finite or negative amounts")]
    NonFiniteInput,
    #[error("relaxation did not settle below height {artificial_height} within {sweeps} sweeps")]
    NonConvergence { sweeps: u64, artificial_height: f64 },
    #[error("invalid compression config: {0}")]
    InvalidConfig(String),
}

/// How the artificial height is lowered from the initial maximum down to
/// the termination height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Jump straight to the termination height.
    SingleStep,
    /// `K` equal decrements.
    LinearSteps(u32),
    /// Multiply by `factor` each step, clamped at the termination height.
    Multiplicative(f64),
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Multiplicative(0.95)
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<(), CompressError> {
        match *self {
            Schedule::SingleStep => Ok(()),
            Schedule::LinearSteps(k) if k >= 1 => Ok(()),
            Schedule::LinearSteps(k) => Err(CompressError::InvalidConfig(format!(
                "linear schedule needs at least one step, got {k}"
            ))),
            Schedule::Multiplicative(f) if f > 0.0 && f < 1.0 => Ok(()),
            Schedule::Multiplicative(f) => Err(CompressError::InvalidConfig(format!(
                "multiplicative factor must lie in (0, 1), got {f}"
            ))),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::SingleStep => write!(f, "single"),
            Schedule::LinearSteps(k) => write!(f, "linear:{k}"),
            Schedule::Multiplicative(x) => write!(f, "mult:{x}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = CompressError;

    /// Accepts `single`, `linear[:K]` and `mult[:FACTOR]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CompressError::InvalidConfig(format!("unknown schedule {s:?}"));
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let schedule = match (kind, arg) {
            ("single", None) => Schedule::SingleStep,
            ("linear", None) => Schedule::LinearSteps(50),
            ("linear", Some(a)) => Schedule::LinearSteps(a.parse().map_err(|_| bad())?),
            ("mult", None) => Schedule::Multiplicative(0.95),
            ("mult", Some(a)) => Schedule::Multiplicative(a.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// What happens when relaxation pushes material across the grid border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    ErrorOnOverflow,
    /// Relax on a grid extended by `margin` cells on every side; material
    /// leaving the extended grid, or ending up in the extension, is reported
    /// as off-grid mass and the result is cropped back.
    CropAndReport { margin: usize },
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::ErrorOnOverflow => write!(f, "error"),
            Boundary::CropAndReport { margin } => write!(f, "crop:{margin}"),
        }
    }
}

impl FromStr for Boundary {
    type Err = CompressError;

    /// Accepts `error` and `crop[:MARGIN]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "error" => Ok(Boundary::ErrorOnOverflow),
            None if s == "crop" => Ok(Boundary::CropAndReport { margin: 0 }),
            Some(("crop", m)) => m
                .parse()
                .map(|margin| Boundary::CropAndReport { margin })
                .map_err(|_| CompressError::InvalidConfig(format!("bad crop margin {m:?}"))),
            _ => Err(CompressError::InvalidConfig(format!(
                "unknown boundary policy {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionConfig {
    pub termination_height: f64,
    pub schedule: Schedule,
    pub boundary: Boundary,
    /// Upper bound on relaxation sweeps per artificial-height step.
    pub max_sweeps: u64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            termination_height: 1.0,
            schedule: Schedule::default(),
            boundary: Boundary::default(),
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

impl CompressionConfig {
    pub fn with_schedule(schedule: Schedule) -> Self {
        Self {
            schedule,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CompressError> {
        if !(self.termination_height.is_finite() && self.termination_height > 0.0) {
            return Err(CompressError::InvalidConfig(format!(
                "termination height must be positive, got {}",
                self.termination_height
            )));
        }
        if self.max_sweeps == 0 {
            return Err(CompressError::InvalidConfig("max_sweeps must be >= 1".into()));
        }
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionResult {
    pub compressed: TimGrid,
    /// Mass that left the visible grid (always 0 with `ErrorOnOverflow`).
    pub off_grid_mass: f64,
    /// Total number of relaxation sweeps over all height steps.
    pub iterations: u64,
    pub overflowed: bool,
}

/// Working state for relaxation: a grid plus the shed-material buffer.
struct Relaxer {
    height: usize,
    width: usize,
    cells: Vec<f64>,
    shed: Vec<f64>,
    allow_exit: bool,
    exited: f64,
}

impl Relaxer {
    fn new(height: usize, width: usize, cells: Vec<f64>, allow_exit: bool) -> Self {
        let n = cells.len();
        Self {
            height,
            width,
            cells,
            shed: vec![0.0; n],
            allow_exit,
            exited: 0.0,
        }
    }

    fn max(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }

    /// One synchronous sweep; returns the new maximum.
    fn sweep(&mut self, ceiling: f64) -> Result<f64, CompressError> {
        let (h, w) = (self.height, self.width);
        self.shed.iter_mut().for_each(|s| *s = 0.0);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let excess = self.cells[i] - ceiling;
                if excess <= 0.0 {
                    continue;
                }
                self.cells[i] = ceiling;
                let quarter = excess / 4.0;
                let on_border = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
                if on_border && !self.allow_exit {
                    return Err(CompressError::MassOverflow {
                        row: r,
                        col: c,
                        artificial_height: ceiling,
                    });
                }
                if r > 0 {
                    self.shed[i - w] += quarter;
                } else {
                    self.exited += quarter;
                }
                if r + 1 < h {
                    self.shed[i + w] += quarter;
                } else {
                    self.exited += quarter;
                }
                if c > 0 {
                    self.shed[i - 1] += quarter;
                } else {
                    self.exited += quarter;
                }
                if c + 1 < w {
                    self.shed[i + 1] += quarter;
                } else {
                    self.exited += quarter;
                }
            }
        }
        let mut max = 0.0f64;
        for (cell, s) in self.cells.iter_mut().zip(&self.shed) {
            *cell += s;
            max = max.max(*cell);
        }
        Ok(max)
    }

    /// Sweeps until no cell exceeds `ceiling` (up to [`SETTLE_TOLERANCE`]);
    /// returns the sweep count.
    fn relax(&mut self, ceiling: f64, max_sweeps: u64) -> Result<u64, CompressError> {
        let limit = ceiling * (1.0 + SETTLE_TOLERANCE);
        let mut max = self.max();
        let mut sweeps = 0;
        while max > limit {
            if sweeps == max_sweeps {
                return Err(CompressError::NonConvergence {
                    sweeps,
                    artificial_height: ceiling,
                });
            }
            max = self.sweep(ceiling)?;
            sweeps += 1;
        }
        Ok(sweeps)
    }
}

/// Result of relaxing a grid under a fixed ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOutcome {
    pub grid: TimGrid,
    pub sweeps: u64,
}

/// Repeats synchronous redistribution sweeps until every cell is at most
/// `artificial_height`. Material reaching the border is an overflow error.
pub fn inner_relax(
    grid: &TimGrid,
    artificial_height: f64,
    max_sweeps: u64,
) -> Result<RelaxOutcome, CompressError> {
    if !(artificial_height.is_finite() && artificial_height > 0.0) {
        return Err(CompressError::InvalidConfig(format!(
            "artificial height must be positive, got {artificial_height}"
        )));
    }
    let mut relaxer = Relaxer::new(grid.height(), grid.width(), grid.amounts().to_vec(), false);
    let sweeps = relaxer.relax(artificial_height, max_sweeps)?;
    Ok(RelaxOutcome {
        grid: TimGrid::from_vec_unchecked(grid.spec(), relaxer.cells),
        sweeps,
    })
}

/// Sequence of artificial heights visited by a schedule.
struct HeightSteps {
    schedule: Schedule,
    start: f64,
    target: f64,
    current: f64,
    step: u32,
}

impl Iterator for HeightSteps {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.current <= self.target {
            return None;
        }
        self.step += 1;
        let next = match self.schedule {
            Schedule::SingleStep => self.target,
            Schedule::LinearSteps(k) => {
                if self.step >= k {
                    self.target
                } else {
                    let frac = self.step as f64 / k as f64;
                    self.start - frac * (self.start - self.target)
                }
            }
            Schedule::Multiplicative(f) => self.current * f,
        };
        self.current = next.max(self.target);
        Some(self.current)
    }
}

/// Compresses a dispensed state down to `config.termination_height`.
pub fn compress(
    initial: &TimGrid,
    config: &CompressionConfig,
) -> Result<CompressionResult, CompressError> {
    config.validate()?;
    if initial
        .amounts()
        .iter()
        .any(|a| !(a.is_finite() && *a >= 0.0))
    {
        return Err(CompressError::NonFiniteInput);
    }
    let start = initial.max();
    if start <= config.termination_height {
        return Ok(CompressionResult {
            compressed: initial.clone(),
            off_grid_mass: 0.0,
            iterations: 0,
            overflowed: false,
        });
    }

    let (h, w) = (initial.height(), initial.width());
    let margin = match config.boundary {
        Boundary::ErrorOnOverflow => 0,
        Boundary::CropAndReport { margin } => margin,
    };
    let (ph, pw) = (h + 2 * margin, w + 2 * margin);
    let mut cells = vec![0.0; ph * pw];
    for (r, row) in initial.rows().enumerate() {
        let off = (r + margin) * pw + margin;
        cells[off..off + w].copy_from_slice(row);
    }
    let allow_exit = matches!(config.boundary, Boundary::CropAndReport { .. });
    let mut relaxer = Relaxer::new(ph, pw, cells, allow_exit);

    let steps = HeightSteps {
        schedule: config.schedule,
        start,
        target: config.termination_height,
        current: start,
        step: 0,
    };
    let mut iterations = 0;
    for ceiling in steps {
        iterations += relaxer.relax(ceiling, config.max_sweeps)?;
    }

    let mut inside = Vec::with_capacity(h * w);
    for r in 0..h {
        let off = (r + margin) * pw + margin;
        inside.extend_from_slice(&relaxer.cells[off..off + w]);
    }
    let mut off_grid_mass = relaxer.exited;
    if margin > 0 {
        let in_margin = relaxer.cells.iter().sum::<f64>() - inside.iter().sum::<f64>();
        off_grid_mass += in_margin.max(0.0);
    }
    // residue from the subtraction above is rounding, not material
    if off_grid_mass < 1e-12 * initial.total() && relaxer.exited == 0.0 {
        off_grid_mass = 0.0;
    }
    Ok(CompressionResult {
        compressed: TimGrid::from_vec_unchecked(GridSpec { height: h, width: w }, inside),
        overflowed: off_grid_mass > 0.0,
        off_grid_mass,
        iterations,
    })
}
