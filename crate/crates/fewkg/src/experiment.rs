//! Multi-seed experiment orchestration. Layout under the output root:
//!
//!   <root>/<name>/<seed>/log.jsonl    one JSON object per training event
//!   <root>/<name>/<seed>/best.ckpt    parameters of the best validation epoch
//!   <root>/<name>/<seed>/report.json  that seed's test metrics
//!   <root>/<name>/report.json         aggregate RunReport
//!   <root>/<name>/sweep.json          sweep-k output (sweep runs only)
//!
//! A run directory has a single writer. On failure a FAILED marker file with
//! the error text is left next to whatever partial results were flushed.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fewkg_core::data::{generate_synthetic_dataset, KnowledgeGraphDataset, SplitName};
use fewkg_core::diff::ParameterSet;
use fewkg_core::eval::{meta_evaluate, MetricsReport};
use fewkg_core::meta::{meta_train, MetaError, TrainOutcome};
use fewkg_core::rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{save_checkpoint, CheckpointError};
use crate::config::{ConfigError, ExperimentConfig};
use crate::io::{load_dataset, IoError};

const TAG_TEST: u64 = 0x5445_5354; // test-split evaluation stream

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("failed to write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to serialize {what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },
    #[error("checkpoint does not fit the config: {0}")]
    Incompatible(String),
}

/// Everything one seed produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_mrr: f64,
    pub test: MetricsReport,
}

/// Mean and standard deviation of each metric across seeds. The standard
/// deviation is the population form (divide by n, not n-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mrr_mean: f64,
    pub mrr_std: f64,
    pub hits_mean: BTreeMap<usize, f64>,
    pub hits_std: BTreeMap<usize, f64>,
}

/// The run's full record: config echo, per-seed results, aggregate, timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub per_seed: Vec<SeedOutcome>,
    pub aggregate: Aggregate,
    pub wall_clock_secs: f64,
}

/// One point of a K sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_generated: usize,
    pub mrr_mean: f64,
    pub mrr_std: f64,
    pub per_seed_mrr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
    pub wall_clock_secs: f64,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(per_seed: &[SeedOutcome]) -> Aggregate {
    let mrrs: Vec<f64> = per_seed.iter().map(|s| s.test.mrr).collect();
    let (mrr_mean, mrr_std) = mean_and_std(&mrrs);
    let mut hits_mean = BTreeMap::new();
    let mut hits_std = BTreeMap::new();
    for &p in per_seed[0].test.hits.keys() {
        let vals: Vec<f64> = per_seed.iter().map(|s| s.test.hits[&p]).collect();
        let (m, s) = mean_and_std(&vals);
        hits_mean.insert(p, m);
        hits_std.insert(p, s);
    }
    Aggregate { mrr_mean, mrr_std, hits_mean, hits_std }
}

fn write_json<T: Serialize>(path: &Path, what: &'static str, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| RunError::Json { what, source })?;
    fs::write(path, text).map_err(|source| RunError::Output { path: path.to_path_buf(), source })
}

/// Materializes the configured dataset.
pub fn load_or_generate(config: &ExperimentConfig) -> Result<KnowledgeGraphDataset, RunError> {
    match (&config.dataset.path, &config.dataset.synthetic) {
        (Some(dir), None) => Ok(load_dataset(dir, config.model.max_desc_len)?),
        (None, Some(spec)) => {
            let (dataset, _) = generate_synthetic_dataset(spec).map_err(IoError::Data)?;
            Ok(dataset)
        }
        _ => Err(ConfigError::Invalid("dataset source must be exactly one of path or synthetic".into()).into()),
    }
}

/// Trains one seed, streaming log events to `<seed_dir>/log.jsonl` and saving
/// the best-validation parameters to `<seed_dir>/best.ckpt`.
fn train_seed(
    dataset: &KnowledgeGraphDataset,
    config: &ExperimentConfig,
    seed: u64,
    seed_dir: &Path,
) -> Result<TrainOutcome, RunError> {
    fs::create_dir_all(seed_dir)
        .map_err(|source| RunError::Output { path: seed_dir.to_path_buf(), source })?;
    let log_path = seed_dir.join("log.jsonl");
    let mut log = fs::File::create(&log_path)
        .map_err(|source| RunError::Output { path: log_path.clone(), source })?;
    let mut log_error: Option<std::io::Error> = None;
    let outcome = meta_train(dataset, &config.settings(), seed, &mut |event| {
        if log_error.is_none() {
            let line = serde_json::to_string(event).expect("log events are plain data");
            if let Err(e) = writeln!(log, "{line}") {
                log_error = Some(e);
            }
        }
    })?;
    if let Some(source) = log_error {
        return Err(RunError::Output { path: log_path, source });
    }
    save_checkpoint(&seed_dir.join("best.ckpt"), &outcome.params)?;
    Ok(outcome)
}

fn evaluate_test(
    params: &ParameterSet,
    dataset: &KnowledgeGraphDataset,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<MetricsReport, RunError> {
    let mut report = meta_evaluate(
        params,
        dataset,
        SplitName::Test,
        &config.settings(),
        rng::subseed(seed, TAG_TEST),
    )?;
    report.seeds = vec![seed];
    Ok(report)
}

fn with_failure_marker<T>(
    run_dir: &Path,
    body: impl FnOnce() -> Result<T, RunError>,
) -> Result<T, RunError> {
    let result = body();
    if let Err(e) = &result {
        let _ = fs::write(run_dir.join("FAILED"), format!("{e}\n"));
    }
    result
}

/// Runs the full protocol: per seed, meta-train with validation
/// checkpointing, then evaluate the best parameters on the test split.
/// Artifacts land under `<out_root>/<config.name>/`.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path) -> Result<RunReport, RunError> {
    config.validate()?;
    let started = Instant::now();
    let dataset = load_or_generate(config)?;
    let run_dir = out_root.join(&config.name);
    fs::create_dir_all(&run_dir)
        .map_err(|source| RunError::Output { path: run_dir.clone(), source })?;

    with_failure_marker(&run_dir, || {
        let mut per_seed = Vec::with_capacity(config.seeds.len());
        for &seed in &config.seeds {
            let seed_dir = run_dir.join(seed.to_string());
            let outcome = train_seed(&dataset, config, seed, &seed_dir)?;
            let test = evaluate_test(&outcome.params, &dataset, config, seed)?;
            let seed_report = SeedOutcome {
                seed,
                best_epoch: outcome.best_epoch,
                best_val_mrr: outcome.best_val_mrr,
                test,
            };
            write_json(&seed_dir.join("report.json"), "seed report", &seed_report)?;
            per_seed.push(seed_report);
        }
        let report = RunReport {
            config: config.clone(),
            aggregate: aggregate(&per_seed),
            per_seed,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        };
        write_json(&run_dir.join("report.json"), "run report", &report)?;
        Ok(report)
    })
}

/// The model implied by config and dataset must have exactly the parameter
/// inventory the checkpoint carries; a mismatch would otherwise surface as a
/// panic deep inside evaluation.
fn check_compatible(
    params: &ParameterSet,
    config: &ExperimentConfig,
    dataset: &KnowledgeGraphDataset,
) -> Result<(), RunError> {
    let reference = fewkg_core::meta::init_parameters(
        &config.model,
        dataset.vocab().size(),
        &mut rng::stream(0),
    );
    for (name, want) in reference.iter() {
        match params.iter().find(|(n, _)| *n == name) {
            None => return Err(RunError::Incompatible(format!("missing parameter {name}"))),
            Some((_, got)) if got.dims() != want.dims() => {
                return Err(RunError::Incompatible(format!(
                    "parameter {name} has dims {:?}, expected {:?}",
                    got.dims(),
                    want.dims()
                )))
            }
            _ => {}
        }
    }
    if params.len() != reference.len() {
        return Err(RunError::Incompatible(format!(
            "checkpoint has {} parameters, expected {}",
            params.len(),
            reference.len()
        )));
    }
    Ok(())
}

/// Evaluates an existing parameter set on the test split for every seed in
/// the config, without training. Used by the `eval` subcommand.
pub fn evaluate_checkpoint(
    params: &ParameterSet,
    config: &ExperimentConfig,
) -> Result<Vec<SeedOutcome>, RunError> {
    config.validate()?;
    let dataset = load_or_generate(config)?;
    check_compatible(params, config, &dataset)?;
    let mut out = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let test = evaluate_test(params, &dataset, config, seed)?;
        out.push(SeedOutcome { seed, best_epoch: 0, best_val_mrr: f64::NAN, test });
    }
    Ok(out)
}

/// K sweep: trains once per seed at the configured K, then re-evaluates the
/// same trained parameters at each swept K. Augmentation only affects
/// meta-test adaptation, so one training run per seed covers every K; note
/// that validation checkpoint selection still uses the configured K.
pub fn sweep_k(
    config: &ExperimentConfig,
    ks: &[usize],
    out_root: &Path,
) -> Result<SweepReport, RunError> {
    config.validate()?;
    if ks.is_empty() {
        return Err(ConfigError::Invalid("sweep needs at least one K value".into()).into());
    }
    let started = Instant::now();
    let dataset = load_or_generate(config)?;
    let run_dir = out_root.join(&config.name);
    fs::create_dir_all(&run_dir)
        .map_err(|source| RunError::Output { path: run_dir.clone(), source })?;

    with_failure_marker(&run_dir, || {
        let mut trained = Vec::with_capacity(config.seeds.len());
        for &seed in &config.seeds {
            let seed_dir = run_dir.join(seed.to_string());
            trained.push((seed, train_seed(&dataset, config, seed, &seed_dir)?.params));
        }
        let mut points = Vec::with_capacity(ks.len());
        for &k in ks {
            let mut swept = config.clone();
            swept.train.n_generated = k;
            let mut per_seed_mrr = Vec::with_capacity(trained.len());
            for (seed, params) in &trained {
                per_seed_mrr.push(evaluate_test(params, &dataset, &swept, *seed)?.mrr);
            }
            let (mrr_mean, mrr_std) = mean_and_std(&per_seed_mrr);
            points.push(SweepPoint { n_generated: k, mrr_mean, mrr_std, per_seed_mrr });
        }
        let report = SweepReport {
            config: config.clone(),
            points,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        };
        write_json(&run_dir.join("sweep.json"), "sweep report", &report)?;
        Ok(report)
    })
}
