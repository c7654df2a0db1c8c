use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timflow_cli::bench::{bench_grids, run_bench, HEURISTIC, SURROGATE};
use timflow_core::dataset::{build_dataset, GeneratorConfig};
use timflow_core::metrics::{read_csv_rows, write_csv_rows, BenchRow};
use timflow_core::surrogate::{
    bce, predict_from_grid, train_with, Architecture, Hyperparams, Network, SurrogateModel,
};
use timflow_core::{GridSpec, Schedule, TimGrid};

use crate::{ensure, Check};

pub fn gradient_check() -> Check {
    let spec = GridSpec::new(6, 6).unwrap();
    let arch = Architecture {
        conv_layers: 2,
        filters: 2,
        kernel: 3,
        dense_layers: 0,
        dense_width: spec.cells(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = Network::<f64>::init(&arch, spec, &mut rng).map_err(|e| e.to_string())?;
    for p in net.params_mut() {
        if p.shape.len() == 1 {
            p.data.iter_mut().for_each(|b| *b = rng.gen_range(-0.2..0.2));
        }
    }
    let x: Vec<f64> = (0..spec.cells()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let t: Vec<f64> = (0..spec.cells()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let (_, grads) = net.loss_and_grad(&x, &t).map_err(|e| e.to_string())?;
    let loss = |net: &Network<f64>| bce(&net.forward(&x).unwrap(), &t);

    let step = 1e-3;
    let mut worst = 0.0f64;
    let mut count = 0;
    for ti in 0..grads.len() {
        for i in 0..grads[ti].data.len() {
            let orig = net.params()[ti].data[i];
            net.params_mut()[ti].data[i] = orig + step;
            let up = loss(&net);
            net.params_mut()[ti].data[i] = orig - step;
            let down = loss(&net);
            net.params_mut()[ti].data[i] = orig;
            let fd = (up - down) / (2.0 * step);
            let g = grads[ti].data[i];
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
            count += 1;
        }
    }
    ensure(worst <= 1e-4, || format!("worst relative deviation {worst:e}"))?;
    Ok(format!("{count} parameters, worst relative deviation {worst:.1e}"))
}

/// Mean and sample standard deviation, computed directly.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn speed_ordering() -> Check {
    let spec = GridSpec::new(50, 50).unwrap();
    let grids = bench_grids(50, 4242, spec).map_err(|e| e.to_string())?;
    // timing does not depend on the weight values, so an untrained network
    // of the desk-scale architecture stands in for a trained one
    let hp = Hyperparams::desk_scale(spec);
    let net = Network::<f32>::init(&hp.architecture(), spec, &mut ChaCha8Rng::seed_from_u64(1))
        .map_err(|e| e.to_string())?;
    let model = SurrogateModel::new(hp, net, 3.0).map_err(|e| e.to_string())?;
    let outcome = run_bench(&grids, 10, Schedule::Multiplicative(0.99), Some(&model))
        .map_err(|e| e.to_string())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("bench.csv");
    write_csv_rows(std::fs::File::create(&path).map_err(|e| e.to_string())?, &outcome.rows)
        .map_err(|e| e.to_string())?;
    let rows = read_csv_rows(std::fs::File::open(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(rows.len() == 100, || format!("{} CSV rows", rows.len()))?;

    let mut summary = Vec::new();
    for method in [HEURISTIC, SURROGATE] {
        let t: Vec<f64> = rows.iter().filter(|r: &&BenchRow| r.method == method).map(|r| r.t_min).collect();
        ensure(t.len() == 50, || format!("{method}: {} rows", t.len()))?;
        let (mean, std) = mean_std(&t);
        let reported = outcome
            .report
            .methods
            .iter()
            .find(|m| m.method == method)
            .ok_or_else(|| format!("{method} missing from the report"))?;
        let ct = &reported.computation_time;
        ensure((mean - ct.mean).abs() <= 1e-9 && (std - ct.std).abs() <= 1e-9, || {
            format!("{method}: CSV gives {mean} ± {std}, report {} ± {}", ct.mean, ct.std)
        })?;
        summary.push((method, mean, std));
    }
    let (h, s) = (summary[0].1, summary[1].1);
    ensure(s < h, || format!("surrogate {s:.6}s not faster than heuristic {h:.6}s"))?;
    Ok(summary
        .iter()
        .map(|(m, mean, std)| format!("{m} {mean:.6} ± {std:.6} s"))
        .collect::<Vec<_>>()
        .join(", "))
}

fn relative_error(reference: &TimGrid, candidate: &TimGrid) -> f64 {
    let mut diff = 0.0;
    let mut total = 0.0;
    for (a, b) in reference.amounts().iter().zip(candidate.amounts()) {
        diff += (a - b).abs();
        total += a;
    }
    diff / total
}

pub fn desk_quality() -> Check {
    let spec = GridSpec::new(32, 32).unwrap();
    let (dataset, _) = build_dataset(&GeneratorConfig::new(2024, 2000, spec)).map_err(|e| e.to_string())?;
    let (training, validation) = dataset.split(200);
    let hp = Hyperparams::desk_scale(spec);
    ensure(hp.epochs >= 20 && hp.conv_layers == 3 && hp.filters == 32 && hp.kernel == 5, || {
        format!("unexpected configuration {hp:?}")
    })?;
    let (model, report) = train_with(&training, &validation, &hp, 7, |e| {
        let validation = e.validation_loss.unwrap_or(f64::NAN);
        eprintln!("  epoch {:>2}: train {:.5}, validation {validation:.5}", e.epoch, e.train_loss);
    })
    .map_err(|e| e.to_string())?;
    let mut sum = 0.0;
    for s in &validation {
        let predicted = predict_from_grid(&model, &s.dispensed, 1.0).map_err(|e| e.to_string())?;
        sum += relative_error(&s.compressed, &predicted);
    }
    let mre = sum / validation.len() as f64;
    ensure(mre <= 0.15, || format!("mean relative error {:.2}%", 100.0 * mre))?;
    Ok(format!(
        "1800 train / 200 held out, {} epochs in {:.0}s, mean relative error {:.2}%",
        report.epochs.len(),
        report.wall_seconds,
        100.0 * mre
    ))
}
