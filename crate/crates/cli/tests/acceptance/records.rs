use timflow_core::dataset::{build_dataset, load_dataset, save_dataset, write_dataset, GeneratorConfig};
use timflow_core::metrics::{error_abs, error_mean, error_rel};
use timflow_core::{GridSpec, TimGrid};

use crate::{ensure, Check};

fn grid(rows: &[&[f64]]) -> TimGrid {
    TimGrid::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn metric_fixtures() -> Check {
    let spec = GridSpec::new(50, 50).unwrap();
    let ones = TimGrid::from_vec(spec, vec![1.0; 2500]).unwrap();
    let zeros = TimGrid::zeros(spec);
    let a = grid(&[&[1.0, 0.0], &[0.0, 1.0]]);
    let b = grid(&[&[0.5, 0.5], &[0.0, 1.0]]);
    let e = |r: Result<f64, _>| r.map_err(|e: timflow_core::metrics::MetricsError| e.to_string());

    ensure(e(error_abs(&ones, &zeros))? == 2500.0, || "all-ones vs zeros".into())?;
    ensure(e(error_abs(&a, &a))? == 0.0, || "identical abs".into())?;
    ensure(e(error_abs(&a, &b))? == 1.0, || "abs fixture".into())?;
    ensure(e(error_rel(&a, &a))? == 0.0, || "identical rel".into())?;
    ensure(e(error_rel(&a, &b))? == 0.5, || "rel fixture".into())?;
    ensure(e(error_mean(&[(&a, &b)]))? == 0.5, || "single pair mean".into())?;
    ensure(e(error_mean(&[(&a, &a), (&a, &b)]))? == 0.25, || "two pair mean".into())?;
    ensure(error_mean(&[]).is_err(), || "empty list accepted".into())?;
    ensure(error_rel(&zeros, &ones).is_err(), || "zero reference accepted".into())?;
    Ok("abs 2500 and 1.0, rel 0.5, means 0.5 and 0.25, all exact".into())
}

pub fn dataset_determinism() -> Check {
    let config = GeneratorConfig::new(20_261_019, 60, GridSpec::new(32, 32).unwrap());
    let bytes = || -> Result<Vec<u8>, String> {
        let (ds, _) = build_dataset(&config).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let first = bytes()?;
    ensure(first == bytes()?, || "two builds differ".into())?;

    let (ds, _) = build_dataset(&config).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("d.timd");
    save_dataset(&path, &ds).map_err(|e| e.to_string())?;
    ensure(std::fs::read(&path).map_err(|e| e.to_string())? == first, || "file bytes differ".into())?;
    let back = load_dataset(&path).map_err(|e| e.to_string())?;
    ensure(back == ds, || "round trip changed the dataset".into())?;
    Ok(format!("60 records, {} identical bytes, round trip equal", first.len()))
}
