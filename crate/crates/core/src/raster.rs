//! Unweighted area sampling of dispense patterns onto a cell grid.
//!
//! Every segment is inflated to a width-1 rectangle (flat caps) centred on
//! its axis. A cell receives `feed * area(cell ∩ rectangle)` from each
//! segment; overlapping rectangles at joints simply add up.

use thiserror::Error;

use crate::grid::{GridSpec, TimGrid};
use crate::pattern::{DispensePattern, PatternError, Point};

const EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("segment {segment} does not fit inside the {spec} grid")]
    OutOfBounds { segment: usize, spec: GridSpec },
    #[error(transparent)]
    InvalidPattern(#[from] PatternError),
    #[error("gap height must be positive and finite, got {0}")]
    NonPositiveGap(f64),
}

/// Convex polygon with a fixed vertex budget; clipping a quadrilateral by
/// four half-planes adds at most four vertices.
#[derive(Clone, Copy)]
struct Poly {
    v: [[f64; 2]; 8],
    n: usize,
}

impl Poly {
    fn from_quad(q: [[f64; 2]; 4]) -> Self {
        let mut v = [[0.0; 2]; 8];
        v[..4].copy_from_slice(&q);
        Poly { v, n: 4 }
    }

    /// Keeps the part with `sign * coord[axis] <= sign * bound`.
    fn clip(&self, axis: usize, bound: f64, sign: f64) -> Poly {
        let mut out = Poly {
            v: [[0.0; 2]; 8],
            n: 0,
        };
        if self.n == 0 {
            return out;
        }
        let inside = |p: &[f64; 2]| sign * p[axis] <= sign * bound;
        let push = |p: [f64; 2], out: &mut Poly| {
            if out.n < out.v.len() {
                out.v[out.n] = p;
                out.n += 1;
            }
        };
        for k in 0..self.n {
            let cur = self.v[k];
            let prev = self.v[(k + self.n - 1) % self.n];
            let (cin, pin) = (inside(&cur), inside(&prev));
            if cin != pin {
                let denom = cur[axis] - prev[axis];
                if denom.abs() > EPS {
                    let t = (bound - prev[axis]) / denom;
                    let mut p = [
                        prev[0] + t * (cur[0] - prev[0]),
                        prev[1] + t * (cur[1] - prev[1]),
                    ];
                    p[axis] = bound;
                    push(p, &mut out);
                }
            }
            if cin {
                push(cur, &mut out);
            }
        }
        out
    }

    fn area(&self) -> f64 {
        if self.n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for k in 0..self.n {
            let a = self.v[k];
            let b = self.v[(k + 1) % self.n];
            twice += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * twice.abs()
    }
}

/// Corners of the width-1 rectangle around `p0 -> p1`, expressed relative
/// to `origin`. `None` for a degenerate segment.
fn rectangle(p0: Point, p1: Point, origin: [f64; 2]) -> Option<[[f64; 2]; 4]> {
    let dx = p1[0] - p0[0];
    let dy = p1[1] - p0[1];
    let len = dx.hypot(dy);
    if len < EPS {
        return None;
    }
    let nx = -dy / len * 0.5;
    let ny = dx / len * 0.5;
    let a = [p0[0] - origin[0], p0[1] - origin[1]];
    let b = [p1[0] - origin[0], p1[1] - origin[1]];
    Some([
        [a[0] + nx, a[1] + ny],
        [b[0] + nx, b[1] + ny],
        [b[0] - nx, b[1] - ny],
        [a[0] - nx, a[1] - ny],
    ])
}

/// Area of the intersection between the unit cell `[col, col+1] x [row, row+1]`
/// and the width-1 rectangle around `p0 -> p1`. Always within `[0, 1]`.
pub fn segment_cell_overlap(p0: Point, p1: Point, col: i64, row: i64) -> f64 {
    // Work in cell-local coordinates so integer translations are exact.
    match rectangle(p0, p1, [col as f64, row as f64]) {
        Some(quad) => clipped_unit_area(quad),
        None => 0.0,
    }
}

fn clipped_unit_area(quad: [[f64; 2]; 4]) -> f64 {
    let poly = Poly::from_quad(quad)
        .clip(0, 0.0, -1.0)
        .clip(0, 1.0, 1.0)
        .clip(1, 0.0, -1.0)
        .clip(1, 1.0, 1.0);
    poly.area().clamp(0.0, 1.0)
}

/// Rasterizes `pattern` onto a grid of resolution `spec`.
pub fn discretize(pattern: &DispensePattern, spec: GridSpec) -> Result<TimGrid, RasterError> {
    let mut amounts = vec![0.0; spec.cells()];
    let (w, h) = (spec.width as f64, spec.height as f64);
    for (index, (p0, p1, feed)) in pattern.segments().enumerate() {
        let Some(quad) = rectangle(p0, p1, [0.0, 0.0]) else {
            // zero-length carrier segment: only its position must be valid
            let [x, y] = p0;
            if x < -EPS || x > w + EPS || y < -EPS || y > h + EPS {
                return Err(RasterError::OutOfBounds {
                    segment: index,
                    spec,
                });
            }
            continue;
        };
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for [x, y] in quad {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        if min_x < -EPS || max_x > w + EPS || min_y < -EPS || max_y > h + EPS {
            return Err(RasterError::OutOfBounds {
                segment: index,
                spec,
            });
        }
        if feed == 0.0 {
            continue;
        }
        let col0 = (min_x.floor().max(0.0)) as usize;
        let col1 = (max_x.ceil() as usize).min(spec.width);
        let row0 = (min_y.floor().max(0.0)) as usize;
        let row1 = (max_y.ceil() as usize).min(spec.height);
        for row in row0..row1 {
            for col in col0..col1 {
                let area = segment_cell_overlap(p0, p1, col as i64, row as i64);
                if area > 0.0 {
                    amounts[row * spec.width + col] += feed * area;
                }
            }
        }
    }
    Ok(TimGrid::from_vec_unchecked(spec, amounts))
}

/// Divides every amount by `gap`: compressing the scaled grid to height 1
/// is equivalent to compressing the original grid down to height `gap`.
pub fn scale_for_gap(grid: &TimGrid, gap: f64) -> Result<TimGrid, RasterError> {
    if !(gap.is_finite() && gap > 0.0) {
        return Err(RasterError::NonPositiveGap(gap));
    }
    let amounts = grid.amounts().iter().map(|a| a / gap).collect();
    Ok(TimGrid::from_vec_unchecked(grid.spec(), amounts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec50() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn axis_aligned_segment_tiles_four_cells() {
        let p = DispensePattern::line([10.0, 10.5], [14.0, 10.5], 1.0).unwrap();
        let g = discretize(&p, spec50()).unwrap();
        for row in 0..50 {
            for col in 0..50 {
                let expected = if row == 10 && (10..14).contains(&col) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(g.get(row, col), expected, "cell ({row}, {col})");
            }
        }
        let p = DispensePattern::line([10.0, 10.5], [14.0, 10.5], 2.5).unwrap();
        let g = discretize(&p, spec50()).unwrap();
        assert_eq!(g.get(10, 12), 2.5);
        assert_eq!(g.total(), 10.0);
    }

    #[test]
    fn overlap_trivial_cases() {
        assert_eq!(segment_cell_overlap([0.0, 3.5], [9.0, 3.5], 4, 3), 1.0);
        assert_eq!(segment_cell_overlap([0.0, 3.5], [9.0, 3.5], 4, 7), 0.0);
        assert_eq!(segment_cell_overlap([2.0, 2.0], [2.0, 2.0], 1, 1), 0.0);
        // rectangle edge only touches the cell boundary
        assert_eq!(segment_cell_overlap([0.0, 3.5], [9.0, 3.5], 4, 4), 0.0);
    }

    #[test]
    fn half_cell_overlap() {
        // segment axis on a cell border: each side gets half a cell
        assert!((segment_cell_overlap([0.0, 4.0], [9.0, 4.0], 2, 3) - 0.5).abs() < 1e-15);
        assert!((segment_cell_overlap([0.0, 4.0], [9.0, 4.0], 2, 4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_length_zero_feed_segment_adds_nothing() {
        let p = DispensePattern::new(
            vec![[10.0, 10.5], [14.0, 10.5], [14.0, 10.5]],
            vec![1.0, 0.0],
        )
        .unwrap();
        let q = DispensePattern::line([10.0, 10.5], [14.0, 10.5], 1.0).unwrap();
        assert_eq!(
            discretize(&p, spec50()).unwrap(),
            discretize(&q, spec50()).unwrap()
        );
    }

    #[test]
    fn out_of_bounds() {
        let p = DispensePattern::line([0.0, 0.2], [5.0, 0.2], 1.0).unwrap();
        assert!(matches!(
            discretize(&p, spec50()),
            Err(RasterError::OutOfBounds { segment: 0, .. })
        ));
        let p = DispensePattern::new(vec![[1.0, 1.5], [4.0, 1.5], [51.0, 1.5]], vec![1.0, 1.0])
            .unwrap();
        assert!(matches!(
            discretize(&p, spec50()),
            Err(RasterError::OutOfBounds { segment: 1, .. })
        ));
        // touching the border is allowed
        let p = DispensePattern::line([0.0, 0.5], [50.0, 0.5], 1.0).unwrap();
        assert_eq!(discretize(&p, spec50()).unwrap().total(), 50.0);
    }

    #[test]
    fn gap_scaling() {
        let p = DispensePattern::line([10.0, 10.5], [14.0, 10.5], 1.0).unwrap();
        let g = discretize(&p, spec50()).unwrap();
        assert_eq!(scale_for_gap(&g, 1.0).unwrap(), g);
        assert_eq!(scale_for_gap(&g, 0.5).unwrap(), g.scaled(2.0));
        assert_eq!(
            scale_for_gap(&g, 0.0),
            Err(RasterError::NonPositiveGap(0.0))
        );
        assert!(scale_for_gap(&g, -1.0).is_err());
    }
}
