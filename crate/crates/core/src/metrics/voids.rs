use std::collections::VecDeque;

use super::MetricsError;
use crate::grid::{GridSpec, TimGrid};

/// Boolean cell mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    spec: GridSpec,
    cells: Vec<bool>,
}

impl CellMask {
    pub fn full(spec: GridSpec) -> Self {
        Self {
            spec,
            cells: vec![true; spec.cells()],
        }
    }

    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            cells: vec![false; spec.cells()],
        }
    }

    /// Cells with `row0 <= row < row1` and `col0 <= col < col1`.
    pub fn rect(spec: GridSpec, row0: usize, col0: usize, row1: usize, col1: usize) -> Self {
        let mut m = Self::empty(spec);
        for r in row0..row1.min(spec.height) {
            for c in col0..col1.min(spec.width) {
                m.cells[r * spec.width + c] = true;
            }
        }
        m
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.spec.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.spec.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Fraction of the region's cells whose amount is at least `threshold`.
pub fn coverage_ratio(grid: &TimGrid, region: &CellMask, threshold: f64) -> Result<f64, MetricsError> {
    if region.spec != grid.spec() {
        return Err(MetricsError::ShapeMismatch {
            a: grid.spec(),
            b: region.spec,
        });
    }
    let total = region.count();
    if total == 0 {
        return Err(MetricsError::EmptyRegion);
    }
    let covered = grid
        .amounts()
        .iter()
        .zip(&region.cells)
        .filter(|(&a, &inside)| inside && a >= threshold)
        .count();
    Ok(covered as f64 / total as f64)
}

/// An enclosed uncovered region: its cells as `(row, col)`, in scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Void {
    pub cells: Vec<(usize, usize)>,
}

impl Void {
    pub fn area(&self) -> usize {
        self.cells.len()
    }
}

/// Connected (4-neighbour) components of below-threshold cells that cannot
/// be reached from the grid border through other below-threshold cells.
pub fn detect_voids(grid: &TimGrid, threshold: f64) -> Vec<Void> {
    let (h, w) = (grid.height(), grid.width());
    let empty: Vec<bool> = grid.amounts().iter().map(|&a| a < threshold).collect();
    // 0 = unvisited, 1 = border-connected background, 2 = assigned to a void
    let mut state = vec![0u8; h * w];
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if (r == 0 || c == 0 || r + 1 == h || c + 1 == w) && empty[i] && state[i] == 0 {
                state[i] = 1;
                queue.push_back(i);
            }
        }
    }
    flood(&mut queue, &empty, &mut state, h, w, 1, |_| {});

    let mut voids = Vec::new();
    for start in 0..h * w {
        if !empty[start] || state[start] != 0 {
            continue;
        }
        state[start] = 2;
        queue.push_back(start);
        let mut cells = vec![start];
        flood(&mut queue, &empty, &mut state, h, w, 2, |i| cells.push(i));
        cells.sort_unstable();
        voids.push(Void {
            cells: cells.into_iter().map(|i| (i / w, i % w)).collect(),
        });
    }
    voids
}

fn flood(
    queue: &mut VecDeque<usize>,
    empty: &[bool],
    state: &mut [u8],
    h: usize,
    w: usize,
    mark: u8,
    mut visit: impl FnMut(usize),
) {
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / w, i % w);
        let mut push = |j: usize| {
            if empty[j] && state[j] == 0 {
                state[j] = mark;
                queue.push_back(j);
                visit(j);
            }
        };
        if r > 0 {
            push(i - w);
        }
        if r + 1 < h {
            push(i + w);
        }
        if c > 0 {
            push(i - 1);
        }
        if c + 1 < w {
            push(i + 1);
        }
    }
}
