use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use timflow_core::dataset::{build_dataset, load_dataset, save_dataset, Dataset, GeneratorConfig, Record};
use timflow_core::metrics::{write_csv_rows, ErrorSummary};
use timflow_core::raster::scale_for_gap;
use timflow_core::surrogate::{
    evaluate_loss, hyperparameter_search, load_weights, predict_from_grid, save_weights, train_with,
    Hyperparams, SearchBudget, SearchSpace, SurrogateModel,
};
use timflow_core::{compress as compress_grid, discretize as rasterize, CompressionConfig, DispensePattern, TimGrid};
use timflow_service::ServiceConfig;

use crate::bench::{bench_grids, run_bench};
use crate::{
    BenchArgs, CliError, CompressArgs, DiscretizeArgs, EvalArgs, GenDatasetArgs, ModelArg, SearchArgs,
    ServeArgs, TrainArgs,
};

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn discretize(a: DiscretizeArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.pattern)?;
    let pattern: DispensePattern = serde_json::from_str(&text)?;
    let grid = rasterize(&pattern, a.res)?;
    let total = grid.total();
    save_dataset(
        &a.out,
        &Dataset {
            spec: a.res,
            records: vec![Record {
                pattern,
                dispensed: grid.clone(),
                compressed: grid,
            }],
        },
    )?;
    print_json(&json!({"resolution": a.res.to_string(), "total_mass": total, "out": a.out}));
    Ok(())
}

struct Compressed {
    grid: TimGrid,
    off_grid_mass: f64,
    iterations: Option<u64>,
}

pub fn compress(a: CompressArgs) -> Result<(), CliError> {
    if !(a.gap.is_finite() && a.gap > 0.0) {
        return Err(CliError::Usage(format!("--gap must be positive, got {}", a.gap)));
    }
    let model = match a.model {
        ModelArg::Surrogate => {
            if a.schedule.is_some() || a.boundary.is_some() {
                return Err(CliError::Usage(
                    "--schedule and --boundary apply to the heuristic only".into(),
                ));
            }
            let path = a
                .weights
                .as_ref()
                .ok_or_else(|| CliError::Usage("--model surrogate needs --weights".into()))?;
            Some(load_weights(path)?)
        }
        ModelArg::Heuristic => None,
    };
    let mut config = CompressionConfig::default();
    if let Some(s) = a.schedule {
        config.schedule = s;
    }
    if let Some(b) = a.boundary {
        config.boundary = b;
    }

    let mut dataset = load_dataset(&a.input)?;
    for (index, record) in dataset.records.iter_mut().enumerate() {
        let out = match &model {
            Some(m) => Compressed {
                grid: predict_from_grid(m, &record.dispensed, a.gap)?,
                off_grid_mass: 0.0,
                iterations: None,
            },
            None => {
                let scaled = scale_for_gap(&record.dispensed, a.gap)?;
                let r = compress_grid(&scaled, &config)?;
                Compressed {
                    grid: r.compressed.scaled(a.gap),
                    off_grid_mass: r.off_grid_mass * a.gap,
                    iterations: Some(r.iterations),
                }
            }
        };
        if a.out.is_none() {
            print_json(&json!({
                "record": index,
                "dispensed_mass": record.dispensed.total(),
                "compressed_mass": out.grid.total(),
                "off_grid_mass": out.off_grid_mass,
                "max": out.grid.max(),
                "iterations": out.iterations,
            }));
        }
        record.compressed = out.grid;
    }
    if let Some(path) = &a.out {
        save_dataset(path, &dataset)?;
        tracing::info!(records = dataset.len(), out = %path.display(), "wrote compressed dataset");
    }
    Ok(())
}

pub fn gen_dataset(a: GenDatasetArgs) -> Result<(), CliError> {
    let config = GeneratorConfig {
        segments: (a.min_segments, a.max_segments),
        margin: a.margin,
        feed: (a.feed_min, a.feed_max),
        ..GeneratorConfig::new(a.seed, a.count, a.res)
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (dataset, stats) = build_dataset(&config)?;
    save_dataset(&a.out, &dataset)?;
    let sidecar = with_suffix(&a.out, ".json");
    config.save_sidecar(&sidecar)?;
    print_json(&json!({
        "accepted": stats.accepted,
        "rejected": stats.rejected,
        "out": a.out,
        "config": sidecar,
    }));
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&a.dataset)?;
    if a.validation >= dataset.len() {
        return Err(CliError::Usage(format!(
            "--validation {} leaves no training records out of {}",
            a.validation,
            dataset.len()
        )));
    }
    let hp = Hyperparams {
        conv_layers: a.arch.conv_layers,
        filters: a.arch.filters,
        kernel: a.arch.kernel,
        dense_layers: a.arch.dense_layers,
        dense_width: dataset.spec.cells(),
        batch_size: a.batch,
        learning_rate: a.lr,
        epochs: a.epochs,
    };
    hp.validate(dataset.spec)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (training, validation) = dataset.split(a.validation);

    let history_path = a.history.clone().unwrap_or_else(|| with_suffix(&a.out, ".jsonl"));
    let mut history = BufWriter::new(File::create(&history_path)?);
    let mut write_error = None;
    let (model, report) = train_with(&training, &validation, &hp, a.seed, |e| {
        tracing::info!(
            epoch = e.epoch,
            train_loss = e.train_loss,
            validation_loss = e.validation_loss,
            "epoch done"
        );
        let line = serde_json::to_string(e).expect("epoch stats serialize");
        if let Err(err) = writeln!(history, "{line}") {
            write_error.get_or_insert(err);
        }
    })?;
    if let Some(err) = write_error {
        return Err(err.into());
    }
    history.flush()?;
    save_weights(&a.out, &model)?;
    print_json(&json!({
        "hyperparams": hp,
        "report": report,
        "out": a.out,
        "history": history_path,
    }));
    Ok(())
}

pub fn search(a: SearchArgs) -> Result<(), CliError> {
    if a.trials == 0 || a.repeats == 0 {
        return Err(CliError::Usage("--trials and --repeats must be at least 1".into()));
    }
    let dataset = load_dataset(&a.dataset)?;
    if a.validation == 0 || a.validation >= dataset.len() {
        return Err(CliError::Usage(format!(
            "--validation must lie in 1..{}",
            dataset.len()
        )));
    }
    let (training, validation) = dataset.split(a.validation);
    let budget = SearchBudget {
        epochs: a.epochs,
        train_size: training.len(),
        validation_size: validation.len(),
    };
    let outcome = hyperparameter_search(
        &SearchSpace::default(),
        a.trials,
        a.repeats,
        &budget,
        &training,
        &validation,
        a.seed,
    )?;
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&outcome)? + "\n")?;
    }
    print_json(&json!({"best": outcome.best, "best_score": outcome.best_score}));
    Ok(())
}

/// Mean relative error and loss of `model` against the dataset's targets.
pub fn evaluate(model: &SurrogateModel, dataset: &Dataset) -> Result<(ErrorSummary, f64), CliError> {
    let predictions = dataset
        .records
        .iter()
        .map(|r| predict_from_grid(model, &r.dispensed, 1.0))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(&TimGrid, &TimGrid)> = dataset
        .records
        .iter()
        .map(|r| &r.compressed)
        .zip(&predictions)
        .collect();
    let summary = ErrorSummary::from_pairs(&pairs)?;
    let loss = evaluate_loss(model, &dataset.samples())?;
    Ok((summary, loss))
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let model = load_weights(&a.weights)?;
    let dataset = load_dataset(&a.dataset)?;
    let (summary, loss) = evaluate(&model, &dataset)?;
    print_json(&json!({
        "records": dataset.len(),
        "mean_relative_error": summary.mean_relative,
        "loss": loss,
    }));
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    if a.patterns == 0 || a.runs == 0 {
        return Err(CliError::Usage("--patterns and --runs must be at least 1".into()));
    }
    let model = a.weights.as_ref().map(load_weights).transpose()?;
    let spec = model.as_ref().map_or(a.res, |m| m.spec());
    let grids = bench_grids(a.patterns, a.seed, spec)?;
    let outcome = run_bench(&grids, a.runs, a.schedule, model.as_ref())?;
    if let Some(path) = &a.csv {
        write_csv_rows(File::create(path)?, &outcome.rows)?;
    }
    if let Some(path) = &a.summary {
        std::fs::write(path, serde_json::to_string_pretty(&outcome.report)? + "\n")?;
    }
    print!("{}", outcome.report.to_table());
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    let mut config = ServiceConfig::from_env().map_err(CliError::Usage)?;
    if let Some(port) = a.port {
        config.port = port;
    }
    if a.weights.is_some() {
        config.weights = a.weights;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(timflow_service::serve(config))
        .map_err(|e| CliError::Service(e.to_string()))
}
