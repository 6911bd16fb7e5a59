//! One experiment end to end: dataset preparation, streaming training log,
//! checkpoints, and the summary document.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cct::checkpoint;
use cct::data::{gen_gaussian_clusters, inject_noise, oversample_balance, split};
use cct::exec::Parallelism;
use cct::metrics::{self, MetricReport};
use cct::train::{predict_dataset_with, EpochRecord, TrainSession};
use cct::{Dataset, Ensemble, Error, TrainConfig};

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::CliError;

pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Builds the train/val/test datasets: source, stratified split, label noise
/// on the training split only, optional oversampling.
pub fn prepare_data(exp: &ExperimentConfig) -> Result<PreparedData, CliError> {
    let full = match &exp.dataset {
        DatasetSpec::Generate { classes, dim, n_per_class, spread, seed } => {
            gen_gaussian_clusters(*classes, *dim, *n_per_class, *spread, *seed)?
        }
        DatasetSpec::Csv { path, classes } => Dataset::load_csv(path, *classes)?,
    };
    let s = exp.split;
    let (train, val, test) = split(&full, (s.train, s.val, s.test), s.seed)?;
    let train = inject_noise(&train, &exp.train.noise)?;
    let train = if exp.train.oversample {
        oversample_balance(&train, exp.train.seed)?
    } else {
        train
    };
    Ok(PreparedData { train, val, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub classes: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Realized corruption fraction of the training split.
    pub train_noise_rate: f64,
}

/// Everything a sweep (or a reader) needs from one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub arch: Vec<usize>,
    pub dataset: DatasetInfo,
    pub epochs_run: u32,
    pub best_epoch: Option<u32>,
    /// Validation metrics of the best-overall checkpoint.
    pub best_val: Option<MetricReport>,
    /// Validation metrics of the final-epoch ensemble.
    pub final_val: Option<MetricReport>,
    /// Clean-test metrics of the final-epoch ensemble.
    pub final_test: Option<MetricReport>,
    pub final_memorization: Option<f64>,
    pub final_val_net_accuracy: Vec<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn metrics_header(networks: usize) -> String {
    let mut cols = vec!["epoch", "lambda", "lr", "l_sup", "l_cons", "l_total"]
        .into_iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    cols.extend((0..networks).map(|j| format!("ce_net{j}")));
    cols.extend(["val_acc", "val_f1", "val_overall", "mem_rate"].map(str::to_string));
    cols.join(",")
}

fn metrics_row(rec: &EpochRecord) -> String {
    let mut cols = vec![
        format!("{}", rec.epoch),
        format!("{}", rec.lambda),
        format!("{}", rec.lr),
        format!("{}", rec.l_sup),
        format!("{}", rec.l_cons),
        format!("{}", rec.l_total),
    ];
    cols.extend(rec.train_ce.iter().map(|v| format!("{v}")));
    cols.push(format!("{}", rec.val_accuracy));
    cols.push(format!("{}", rec.val_f1));
    cols.push(format!("{}", rec.val_overall));
    cols.push(fmt_opt(rec.memorization));
    cols.join(",")
}

fn report_on(
    ens: &Ensemble,
    ds: &Dataset,
    par: Parallelism,
) -> Result<Option<MetricReport>, Error> {
    if ds.is_empty() {
        return Ok(None);
    }
    let preds = predict_dataset_with(ens, ds, par)?;
    let truths: Vec<usize> = ds.samples().iter().map(|s| s.observed_label).collect();
    Ok(Some(metrics::evaluate(&preds, &truths, ds.classes())?))
}

/// Runs one experiment into `out_dir`.
///
/// Artifacts: `config_resolved.json`, `metrics.csv` (streamed, one row per
/// epoch), `checkpoint_final.json`, `checkpoint_best.json`, `summary.json`,
/// plus the split CSVs when `emit_data` is set. The metrics CSV is flushed
/// per epoch, so a mid-run numeric failure leaves the partial log behind.
pub fn run_experiment(exp: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| {
        CliError::io(format!("cannot create {}: {e}", out_dir.display()))
    })?;

    let data = prepare_data(exp)?;
    let par = Parallelism::auto();

    // Resolve every derived field before echoing the config.
    let mut resolved = exp.clone();
    resolved.out_dir = Some(out_dir.to_path_buf());
    resolved.train.arch = exp.train.resolved_arch(&data.train)?;
    let train_cfg: TrainConfig = resolved.train.clone();
    let config_hash = train_cfg.digest();
    fs::write(
        out_dir.join("config_resolved.json"),
        serde_json::to_string_pretty(&resolved).map_err(Error::from)?,
    )
    .map_err(Error::from)?;

    if exp.emit_data {
        data.train.write_csv(&out_dir.join("train.csv"), true)?;
        if !data.val.is_empty() {
            data.val.write_csv(&out_dir.join("val.csv"), false)?;
        }
        if !data.test.is_empty() {
            data.test.write_csv(&out_dir.join("test.csv"), false)?;
        }
    }

    let warm = match &resolved.warm_start {
        Some(path) => Some(checkpoint::load(path)?.0),
        None => None,
    };

    let mut csv = fs::File::create(out_dir.join("metrics.csv")).map_err(Error::from)?;
    writeln!(csv, "{}", metrics_header(train_cfg.networks)).map_err(Error::from)?;

    let mut session = TrainSession::new(&train_cfg, &data.train, &data.val, warm, par)?;
    loop {
        match session.step_epoch() {
            Ok(Some(rec)) => {
                writeln!(csv, "{}", metrics_row(rec)).map_err(Error::from)?;
                csv.flush().map_err(Error::from)?;
            }
            Ok(None) => break,
            Err(e) => {
                csv.flush().ok();
                return Err(e.into());
            }
        }
    }
    let outcome = session.finish();

    checkpoint::save(
        &out_dir.join("checkpoint_final.json"),
        &outcome.ensemble,
        train_cfg.epochs,
        &config_hash,
    )?;
    checkpoint::save(
        &out_dir.join("checkpoint_best.json"),
        &outcome.best_ensemble,
        outcome.best_epoch.unwrap_or(train_cfg.epochs),
        &config_hash,
    )?;

    let summary = RunSummary {
        config_hash,
        arch: outcome.ensemble.arch(),
        dataset: DatasetInfo {
            classes: data.train.classes(),
            dim: data.train.dim(),
            n_train: data.train.len(),
            n_val: data.val.len(),
            n_test: data.test.len(),
            train_noise_rate: data.train.noise_rate_actual(),
        },
        epochs_run: outcome.history.records.len() as u32,
        best_epoch: outcome.best_epoch,
        best_val: report_on(&outcome.best_ensemble, &data.val, par)?,
        final_val: report_on(&outcome.ensemble, &data.val, par)?,
        final_test: report_on(&outcome.ensemble, &data.test, par)?,
        final_memorization: outcome
            .history
            .records
            .last()
            .and_then(|r| r.memorization),
        final_val_net_accuracy: outcome
            .history
            .records
            .last()
            .map(|r| r.val_net_accuracy.clone())
            .unwrap_or_default(),
    };
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(Error::from)?,
    )
    .map_err(Error::from)?;

    Ok(summary)
}
