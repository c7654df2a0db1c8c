use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timflow_core::pattern::Point;
use timflow_core::{compress, discretize, Boundary, CompressionConfig, DispensePattern, GridSpec, Schedule, TimGrid};

use crate::{ensure, Check};

const N: usize = 50;

/// Random blobs and noise. `interior` keeps everything 15 cells from the
/// border so the default error-on-overflow policy never triggers.
fn random_grid(rng: &mut ChaCha8Rng, interior: bool) -> TimGrid {
    let spec = GridSpec::new(N, N).unwrap();
    let mut g = TimGrid::zeros(spec);
    let (lo, hi) = if interior { (15, N - 15) } else { (0, N) };
    for _ in 0..rng.gen_range(1..8) {
        let (r, c) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        let v = g.get(r, c) + rng.gen_range(0.5..5.0);
        g.set(r, c, v);
    }
    for r in lo..hi {
        for c in lo..hi {
            if rng.gen_bool(0.1) {
                let v = g.get(r, c) + rng.gen_range(0.0..1.2);
                g.set(r, c, v);
            }
        }
    }
    g
}

fn max_cell_diff(a: &TimGrid, b: &TimGrid) -> f64 {
    assert_eq!(a.spec(), b.spec());
    a.amounts()
        .iter()
        .zip(b.amounts())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sum(g: &TimGrid) -> f64 {
    let mut s = 0.0;
    for row in g.rows() {
        for &a in row {
            s += a;
        }
    }
    s
}

pub fn conservation() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0_5e7e);
    let mut worst_mass = 0.0f64;
    let mut worst_cell = 0.0f64;
    let mut cropped = 0;
    for i in 0..1000 {
        let interior = i % 2 == 0;
        let g = random_grid(&mut rng, interior);
        let config = CompressionConfig {
            boundary: if interior {
                Boundary::ErrorOnOverflow
            } else {
                Boundary::CropAndReport { margin: rng.gen_range(0..4) }
            },
            ..CompressionConfig::default()
        };
        let res = compress(&g, &config).map_err(|e| format!("grid {i}: {e}"))?;
        if res.off_grid_mass > 0.0 {
            cropped += 1;
        }
        let before = sum(&g);
        let after = sum(&res.compressed) + res.off_grid_mass;
        worst_mass = worst_mass.max((after - before).abs() / before);
        worst_cell = worst_cell.max(res.compressed.max());
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(worst_mass <= 1e-9, || format!("relative mass drift {worst_mass:e}"))?;
    ensure(worst_cell <= 1.0 + 1e-9, || format!("cell above the gap: {worst_cell}"))?;
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "1000 grids, worst relative drift {worst_mass:.2e}, max cell {worst_cell:.12}, {cropped} with off-grid mass, {secs:.1}s"
    ))
}

pub fn hand_trace_and_symmetry() -> Check {
    let mut blob = TimGrid::zeros(GridSpec::new(5, 5).unwrap());
    blob.set(2, 2, 2.0);
    let res = compress(&blob, &CompressionConfig::with_schedule(Schedule::SingleStep))
        .map_err(|e| e.to_string())?;
    let mut expected = TimGrid::zeros(blob.spec());
    expected.set(2, 2, 1.0);
    for (r, c) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
        expected.set(r, c, 0.25);
    }
    ensure(res.compressed == expected, || {
        format!("hand trace mismatch: {:?}", res.compressed.amounts())
    })?;

    let config = CompressionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5_7e7);
    let (mut worst_idem, mut worst_sym) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let g = random_grid(&mut rng, true);
        let once = compress(&g, &config).map_err(|e| format!("grid {i}: {e}"))?.compressed;
        let twice = compress(&once, &config).map_err(|e| format!("grid {i}: {e}"))?.compressed;
        worst_idem = worst_idem.max(max_cell_diff(&once, &twice));
        let transforms: [fn(&TimGrid) -> TimGrid; 3] =
            [TimGrid::mirror_horizontal, TimGrid::mirror_vertical, TimGrid::rotate_quarter];
        for t in transforms {
            let moved = compress(&t(&g), &config).map_err(|e| format!("grid {i}: {e}"))?.compressed;
            worst_sym = worst_sym.max(max_cell_diff(&moved, &t(&once)));
        }
    }
    ensure(worst_idem <= 1e-12, || format!("idempotence deviation {worst_idem:e}"))?;
    ensure(worst_sym <= 1e-9, || format!("symmetry deviation {worst_sym:e}"))?;
    Ok(format!(
        "5x5 blob exact; 200 grids, idempotence {worst_idem:.1e}, symmetry {worst_sym:.1e}"
    ))
}

pub fn gap_scaling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a9);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let g = random_grid(&mut rng, true);
        for h in [0.25, 0.5, 2.0] {
            let unit = compress(&g.scaled(1.0 / h), &CompressionConfig::default())
                .map_err(|e| format!("grid {i}, gap {h}: {e}"))?
                .compressed
                .scaled(h);
            let direct = compress(
                &g,
                &CompressionConfig {
                    termination_height: h,
                    ..CompressionConfig::default()
                },
            )
            .map_err(|e| format!("grid {i}, gap {h}: {e}"))?
            .compressed;
            worst = worst.max(max_cell_diff(&unit, &direct));
        }
    }
    ensure(worst <= 1e-9, || format!("largest per-cell deviation {worst:e}"))?;
    Ok(format!("100 grids x 3 gaps, largest per-cell deviation {worst:.1e}"))
}

/// Fraction of jittered samples of cell `(col, row)` inside the width-1
/// rectangle around `p0 -> p1`.
fn sampled_overlap(p0: Point, p1: Point, col: i64, row: i64, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
    let len = dx.hypot(dy);
    let (ux, uy) = (dx / len, dy / len);
    let step = 1.0 / n as f64;
    let mut inside = 0usize;
    for i in 0..n {
        for j in 0..n {
            let x = col as f64 + (i as f64 + rng.gen::<f64>()) * step - p0[0];
            let y = row as f64 + (j as f64 + rng.gen::<f64>()) * step - p0[1];
            let along = x * ux + y * uy;
            let across = -x * uy + y * ux;
            if (0.0..=len).contains(&along) && across.abs() <= 0.5 {
                inside += 1;
            }
        }
    }
    inside as f64 / (n * n) as f64
}

pub fn rasterizer() -> Check {
    let spec = GridSpec::new(40, 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a5);
    let (mut worst_cell, mut worst_mass) = (0.0f64, 0.0f64);
    let mut segments = 0;
    while segments < 50 {
        let p0 = [rng.gen_range(4.0..36.0), rng.gen_range(4.0..36.0)];
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = rng.gen_range(0.3..9.0);
        let p1 = [p0[0] + len * angle.cos(), p0[1] + len * angle.sin()];
        if !(3.0..37.0).contains(&p1[0]) || !(3.0..37.0).contains(&p1[1]) {
            continue;
        }
        segments += 1;
        let feed = rng.gen_range(0.5..3.0);
        let g = discretize(&DispensePattern::line(p0, p1, feed).unwrap(), spec).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((sum(&g) - feed * len).abs() / (feed * len));
        let cols = (p0[0].min(p1[0]).floor() as i64 - 1)..(p0[0].max(p1[0]).ceil() as i64 + 1);
        let rows = (p0[1].min(p1[1]).floor() as i64 - 1)..(p0[1].max(p1[1]).ceil() as i64 + 1);
        for row in rows {
            for col in cols.clone() {
                let oracle = feed * sampled_overlap(p0, p1, col, row, 400, &mut rng);
                let cell = g.get(row as usize, col as usize);
                worst_cell = worst_cell.max((cell - oracle).abs() / feed);
            }
        }
    }
    ensure(worst_cell <= 1e-3, || format!("cell deviation from sampled overlap {worst_cell:e}"))?;
    ensure(worst_mass <= 1e-9, || format!("segment mass deviation {worst_mass:e}"))?;

    // axis-aligned rectangles tile cells exactly
    let cases: &[(Point, Point, f64, &[(usize, usize, f64)])] = &[
        ([10.0, 10.5], [14.0, 10.5], 1.0, &[(10, 10, 1.0), (10, 11, 1.0), (10, 12, 1.0), (10, 13, 1.0)]),
        ([3.5, 2.0], [3.5, 4.0], 2.0, &[(2, 3, 2.0), (3, 3, 2.0)]),
        ([6.0, 7.25], [8.0, 7.25], 4.0, &[(6, 6, 1.0), (6, 7, 1.0), (7, 6, 3.0), (7, 7, 3.0)]),
    ];
    for (p0, p1, feed, cells) in cases {
        let g = discretize(&DispensePattern::line(*p0, *p1, *feed).unwrap(), GridSpec::new(50, 50).unwrap())
            .map_err(|e| e.to_string())?;
        let mut expected = TimGrid::zeros(g.spec());
        for &(r, c, v) in *cells {
            expected.set(r, c, v);
        }
        ensure(g == expected, || format!("axis-aligned {p0:?}->{p1:?} not exact"))?;
    }
    Ok(format!(
        "50 segments, cell deviation {worst_cell:.1e}, mass deviation {worst_mass:.1e}; {} axis-aligned cases exact",
        cases.len()
    ))
}
