//! Cell grids holding the amount of material per unit cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimensions must be at least 1x1, got {height}x{width}")]
    EmptyDimensions { height: usize, width: usize },
    #[error("expected {expected} amounts for the grid, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("amount at row {row}, column {col} is {value}; amounts must be finite and non-negative")]
    InvalidAmount { row: usize, col: usize, value: f64 },
    #[error("invalid resolution string {0:?}, expected HxW")]
    BadResolution(String),
}

/// Grid resolution. Cells are always 1x1 grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
}

impl GridSpec {
    pub fn new(height: usize, width: usize) -> Result<Self, GridError> {
        if height == 0 || width == 0 {
            return Err(GridError::EmptyDimensions { height, width });
        }
        Ok(Self { height, width })
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            height: 50,
            width: 50,
        }
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl std::str::FromStr for GridSpec {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GridError::BadResolution(s.to_string());
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let h = h.trim().parse().map_err(|_| bad())?;
        let w = w.trim().parse().map_err(|_| bad())?;
        GridSpec::new(h, w).map_err(|_| bad())
    }
}

/// H x W field of non-negative amounts, stored row-major.
///
/// Row index is the y coordinate, column index the x coordinate, so cell
/// `(row, col)` covers `[col, col + 1] x [row, row + 1]` in grid units.
#[derive(Debug, Clone, PartialEq)]
pub struct TimGrid {
    height: usize,
    width: usize,
    amounts: Vec<f64>,
}

impl TimGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            height: spec.height,
            width: spec.width,
            amounts: vec![0.0; spec.cells()],
        }
    }

    pub fn from_vec(spec: GridSpec, amounts: Vec<f64>) -> Result<Self, GridError> {
        if spec.height == 0 || spec.width == 0 {
            return Err(GridError::EmptyDimensions {
                height: spec.height,
                width: spec.width,
            });
        }
        if amounts.len() != spec.cells() {
            return Err(GridError::LengthMismatch {
                expected: spec.cells(),
                actual: amounts.len(),
            });
        }
        if let Some(idx) = amounts.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(GridError::InvalidAmount {
                row: idx / spec.width,
                col: idx % spec.width,
                value: amounts[idx],
            });
        }
        Ok(Self {
            height: spec.height,
            width: spec.width,
            amounts,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let spec = GridSpec { height, width };
        let mut amounts = Vec::with_capacity(height * width);
        for row in rows {
            if row.len() != width {
                return Err(GridError::LengthMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            amounts.extend_from_slice(row);
        }
        Self::from_vec(spec, amounts)
    }

    /// Builds a grid without validating amounts. Callers guarantee the
    /// invariants (used by code paths that produce amounts by construction).
    pub(crate) fn from_vec_unchecked(spec: GridSpec, amounts: Vec<f64>) -> Self {
        debug_assert_eq!(amounts.len(), spec.cells());
        Self {
            height: spec.height,
            width: spec.width,
            amounts,
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            height: self.height,
            width: self.width,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn into_amounts(self) -> Vec<f64> {
        self.amounts
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.amounts[row * self.width + col]
    }

    /// Sets a cell. Panics on a negative or non-finite amount.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(value.is_finite() && value >= 0.0, "invalid amount {value}");
        self.amounts[row * self.width + col] = value;
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.amounts.chunks_exact(self.width)
    }

    pub fn total(&self) -> f64 {
        self.amounts.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.amounts.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplies every amount by `factor` (must be finite and >= 0).
    pub fn scaled(&self, factor: f64) -> TimGrid {
        assert!(factor.is_finite() && factor >= 0.0);
        TimGrid {
            height: self.height,
            width: self.width,
            amounts: self.amounts.iter().map(|a| a * factor).collect(),
        }
    }

    /// Mirror about the vertical center line (columns reversed).
    pub fn mirror_horizontal(&self) -> TimGrid {
        let mut amounts = Vec::with_capacity(self.amounts.len());
        for row in self.rows() {
            amounts.extend(row.iter().rev());
        }
        TimGrid::from_vec_unchecked(self.spec(), amounts)
    }

    /// Mirror about the horizontal center line (rows reversed).
    pub fn mirror_vertical(&self) -> TimGrid {
        let mut amounts = Vec::with_capacity(self.amounts.len());
        for row in self.rows().rev() {
            amounts.extend_from_slice(row);
        }
        TimGrid::from_vec_unchecked(self.spec(), amounts)
    }

    /// Transpose followed by a column reversal: a quarter turn clockwise.
    pub fn rotate_quarter(&self) -> TimGrid {
        let (h, w) = (self.height, self.width);
        let mut amounts = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                // new grid is w x h; (r, c) -> (c, h - 1 - r)
                amounts[c * h + (h - 1 - r)] = self.amounts[r * w + c];
            }
        }
        TimGrid::from_vec_unchecked(GridSpec { height: w, width: h }, amounts)
    }

    /// Copy of the grid with every amount rounded to the nearest `f32`.
    pub fn to_f32_precision(&self) -> TimGrid {
        TimGrid {
            height: self.height,
            width: self.width,
            amounts: self.amounts.iter().map(|&a| a as f32 as f64).collect(),
        }
    }

    pub fn to_f32_vec(&self) -> Vec<f32> {
        self.amounts.iter().map(|&a| a as f32).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        let spec = GridSpec::new(1, 2).unwrap();
        assert!(matches!(
            TimGrid::from_vec(spec, vec![0.0, -1.0]),
            Err(GridError::InvalidAmount { row: 0, col: 1, .. })
        ));
        assert!(TimGrid::from_vec(spec, vec![f64::NAN, 0.0]).is_err());
        assert!(TimGrid::from_vec(spec, vec![0.0]).is_err());
        assert!(GridSpec::new(0, 3).is_err());
    }

    #[test]
    fn parses_resolution() {
        assert_eq!("50x50".parse::<GridSpec>().unwrap(), GridSpec::default());
        assert_eq!(
            "32X16".parse::<GridSpec>().unwrap(),
            GridSpec::new(32, 16).unwrap()
        );
        assert!("0x5".parse::<GridSpec>().is_err());
        assert!("50".parse::<GridSpec>().is_err());
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let g = TimGrid::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let r = g.rotate_quarter();
        assert_eq!(r.spec(), GridSpec::new(3, 2).unwrap());
        assert_eq!(r.get(0, 1), 1.0);
        assert_eq!(r.get(0, 0), 4.0);
        assert_eq!(r.rotate_quarter().rotate_quarter().rotate_quarter(), g);
        assert_eq!(g.mirror_horizontal().mirror_horizontal(), g);
        assert_eq!(g.mirror_vertical().get(0, 0), 4.0);
    }
}
