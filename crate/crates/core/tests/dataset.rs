use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timflow_core::dataset::{
    build_dataset, generate_pattern, load_dataset, read_dataset, save_dataset, simulate_pattern,
    write_dataset, DatasetError, GeneratorConfig,
};
use timflow_core::GridSpec;

fn config(seed: u64, count: usize) -> GeneratorConfig {
    GeneratorConfig {
        margin: 6,
        ..GeneratorConfig::new(seed, count, GridSpec::new(24, 24).unwrap())
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let bytes = |cfg: &GeneratorConfig| {
        let (ds, _) = build_dataset(cfg).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        buf
    };
    let a = bytes(&config(5, 12));
    assert_eq!(a, bytes(&config(5, 12)));
    assert_ne!(a, bytes(&config(6, 12)));
    assert_eq!(bytes(&config(5, 1)), bytes(&config(5, 1)));
    // records depend only on (seed, index), not on the total count
    let (short, _) = build_dataset(&config(5, 4)).unwrap();
    let (long, _) = build_dataset(&config(5, 12)).unwrap();
    assert_eq!(short.records[..], long.records[..4]);
}

#[test]
fn file_round_trip_and_sidecar() {
    let cfg = config(9, 10);
    let (ds, _) = build_dataset(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.timd");
    save_dataset(&path, &ds).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), ds);
    let sidecar = dir.path().join("train.json");
    cfg.save_sidecar(&sidecar).unwrap();
    assert_eq!(GeneratorConfig::load_sidecar(&sidecar).unwrap(), cfg);

    let bytes = std::fs::read(&path).unwrap();
    for cut in [2, 17, 100, bytes.len() / 2, bytes.len() - 4] {
        assert!(matches!(read_dataset(&bytes[..cut]), Err(DatasetError::Format(_))));
    }
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    let err = read_dataset(&wrong[..]).unwrap_err();
    assert!(err.to_string().contains("TIMD"));
}

#[test]
fn records_are_valid_training_pairs() {
    let cfg = config(21, 30);
    let (ds, stats) = build_dataset(&cfg).unwrap();
    assert_eq!(stats.accepted, 30);
    for r in &ds.records {
        assert!(r.compressed.amounts().iter().all(|&a| (0.0..=1.0 + 1e-9).contains(&a)));
        assert!(r.pattern.total_mass() <= cfg.max_total_mass);
        // double-precision stage conserves mass tightly
        let (d, c) = simulate_pattern(&r.pattern, &cfg).unwrap();
        assert!(((d.total() - c.total()) / d.total()).abs() <= 1e-9);
        assert_eq!(d.to_f32_precision(), r.dispensed);
        assert_eq!(c.to_f32_precision(), r.compressed);
    }
}

#[test]
fn segment_counts_cover_range_uniformly() {
    let cfg = GeneratorConfig::new(0, 1, GridSpec::default());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts = [0usize; 6];
    let n = 10_000;
    for _ in 0..n {
        counts[generate_pattern(&mut rng, &cfg).segment_count() - 1] += 1;
    }
    let expected = n as f64 / 6.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 5 degrees of freedom: P(chi2 > 20.52) = 0.001
    assert!(chi2 < 20.52, "chi-square {chi2} for {counts:?}");
    assert!(counts.iter().all(|&c| c > 0));
}
