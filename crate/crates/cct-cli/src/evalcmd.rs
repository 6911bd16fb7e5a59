//! `eval`: score a saved ensemble checkpoint against a CSV dataset.

use std::path::Path;

use cct::exec::Parallelism;
use cct::train::predict_dataset_with;
use cct::{checkpoint, metrics, Dataset, MetricReport};

use crate::CliError;

/// Loads the checkpoint, runs ensemble inference (or a single network with
/// `net = Some(j)`) over the dataset, and returns the metric report.
pub fn evaluate_checkpoint(
    checkpoint_path: &Path,
    data_path: &Path,
    net: Option<usize>,
) -> Result<MetricReport, CliError> {
    let (ensemble, _meta) = checkpoint::load(checkpoint_path)?;
    let classes = ensemble.classes();
    let ds = Dataset::load_csv(data_path, classes)?;
    if ds.dim() != ensemble.input_dim() {
        return Err(CliError::io(format!(
            "shape mismatch: dataset has {} features, checkpoint expects {}",
            ds.dim(),
            ensemble.input_dim()
        )));
    }

    let preds: Vec<usize> = match net {
        None => predict_dataset_with(&ensemble, &ds, Parallelism::auto())?,
        Some(j) => {
            if j >= ensemble.size() {
                return Err(CliError::config(format!(
                    "--net {j} out of range for an ensemble of {}",
                    ensemble.size()
                )));
            }
            ds.samples()
                .iter()
                .map(|s| ensemble.infer_single(j, &s.features).map(|(label, _)| label))
                .collect::<Result<_, _>>()?
        }
    };

    let truths: Vec<usize> = ds.samples().iter().map(|s| s.observed_label).collect();
    Ok(metrics::evaluate(&preds, &truths, classes)?)
}
