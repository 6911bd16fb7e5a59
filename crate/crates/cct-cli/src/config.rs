//! Experiment configuration: a single JSON document describing the dataset,
//! the split, the training hyperparameters, and (optionally) sweep axes.
//!
//! Every field has a default; the fully resolved config is echoed into the
//! output directory for provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cct::TrainConfig;

use crate::CliError;

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSpec {
    /// Synthetic isotropic Gaussian clusters.
    Generate {
        classes: usize,
        dim: usize,
        n_per_class: usize,
        spread: f64,
        seed: u64,
    },
    /// An on-disk CSV (`f0,..,f{d-1},label[,clean_label]`).
    Csv { path: PathBuf, classes: usize },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Generate { classes: 4, dim: 2, n_per_class: 500, spread: 1.0, seed: 9 }
    }
}

/// Stratified train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.8, val: 0.1, test: 0.1, seed: 7 }
    }
}

/// One sweep axis: a `TrainConfig` field name and the values to grid over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub field: String,
    pub values: Vec<serde_json::Value>,
}

fn default_sweep_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

/// Grid description: the cell set is the cartesian product of the axes,
/// each cell repeated once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    #[serde(default = "default_sweep_seeds")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub split: SplitSpec,
    pub train: TrainConfig,
    /// Output directory; overridable with `--out`. Defaults to
    /// `runs/<config file stem>`.
    pub out_dir: Option<PathBuf>,
    /// Also write the train/val/test splits as CSV artifacts.
    pub emit_data: bool,
    /// Load this checkpoint as the initial ensemble instead of fresh
    /// initialization.
    pub warm_start: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            out_dir: None,
            emit_data: false,
            warm_start: None,
            sweep: None,
        }
    }
}

/// Fields a sweep axis may name.
pub const SWEEP_FIELDS: &[&str] = &[
    "networks",
    "lambda_max",
    "beta",
    "ramp_epochs",
    "epochs",
    "learning_rate",
    "lr_decay",
    "batch_size",
    "detach_targets",
    "consistency",
    "oversample",
    "noise_rate",
];

/// Applies one axis value to a training config.
pub fn apply_axis(cfg: &mut TrainConfig, field: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let bad = |want: &str| {
        CliError::config(format!("sweep field {field:?} expects {want}, got {value}"))
    };
    let as_f64 = || value.as_f64().ok_or_else(|| bad("a number"));
    let as_usize = || {
        value
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| bad("a nonnegative integer"))
    };
    let as_bool = || value.as_bool().ok_or_else(|| bad("a boolean"));

    match field {
        "networks" => cfg.networks = as_usize()?,
        "lambda_max" => cfg.lambda_max = as_f64()?,
        "beta" => cfg.beta = as_f64()?,
        "ramp_epochs" => cfg.ramp_epochs = as_usize()? as u32,
        "epochs" => cfg.epochs = as_usize()? as u32,
        "learning_rate" => cfg.learning_rate = as_f64()?,
        "lr_decay" => cfg.lr_decay = as_f64()?,
        "batch_size" => cfg.batch_size = as_usize()?,
        "detach_targets" => cfg.detach_targets = as_bool()?,
        "consistency" => cfg.consistency = as_bool()?,
        "oversample" => cfg.oversample = as_bool()?,
        "noise_rate" => cfg.noise.rate = as_f64()?,
        _ => {
            return Err(CliError::config(format!(
                "unknown sweep field {field:?}; valid fields: {}",
                SWEEP_FIELDS.join(", ")
            )))
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&raw)
            .map_err(|e| CliError::config(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match &self.dataset {
            DatasetSpec::Generate { classes, dim, n_per_class, spread, .. } => {
                if *classes < 2 {
                    return Err(CliError::config("dataset.classes must be >= 2"));
                }
                if *dim < 2 {
                    return Err(CliError::config("dataset.dim must be >= 2"));
                }
                if *n_per_class == 0 {
                    return Err(CliError::config("dataset.n_per_class must be >= 1"));
                }
                if !(*spread > 0.0) {
                    return Err(CliError::config("dataset.spread must be > 0"));
                }
            }
            DatasetSpec::Csv { classes, .. } => {
                if *classes < 2 {
                    return Err(CliError::config("dataset.classes must be >= 2"));
                }
            }
        }

        let s = &self.split;
        for (name, v) in [("train", s.train), ("val", s.val), ("test", s.test)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::config(format!("split.{name} must be in [0, 1], got {v}")));
            }
        }
        if (s.train + s.val + s.test - 1.0).abs() > 1e-9 {
            return Err(CliError::config(format!(
                "split fractions must sum to 1, got {}",
                s.train + s.val + s.test
            )));
        }
        if self.train.epochs > 0 && s.val <= 0.0 {
            return Err(CliError::config("split.val must be > 0 when training runs epochs"));
        }

        self.train
            .validate()
            .map_err(|e| CliError::config(format!("train: {e}")))?;
        self.train
            .noise
            .validate(self.classes())
            .map_err(|e| CliError::config(format!("train: {e}")))?;

        if let Some(sweep) = &self.sweep {
            if sweep.axes.is_empty() {
                return Err(CliError::config("sweep.axes must not be empty"));
            }
            if sweep.seeds.is_empty() {
                return Err(CliError::config("sweep.seeds must not be empty"));
            }
            for axis in &sweep.axes {
                if !SWEEP_FIELDS.contains(&axis.field.as_str()) {
                    return Err(CliError::config(format!(
                        "sweep axis names unknown field {:?}; valid fields: {}",
                        axis.field,
                        SWEEP_FIELDS.join(", ")
                    )));
                }
                if axis.values.is_empty() {
                    return Err(CliError::config(format!(
                        "sweep axis {:?} has no values",
                        axis.field
                    )));
                }
                // Type-check every value now so a sweep cannot die mid-grid.
                let mut probe = self.train.clone();
                for value in &axis.values {
                    apply_axis(&mut probe, &axis.field, value)?;
                }
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        match &self.dataset {
            DatasetSpec::Generate { classes, .. } => *classes,
            DatasetSpec::Csv { classes, .. } => *classes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn lambda_max_violation_names_the_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.lambda_max = 1.5;
        let err = cfg.validate().unwrap_err();
        assert!(err.message().contains("lambda_max"), "{}", err.message());
    }

    #[test]
    fn sweep_axis_values_are_type_checked() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep = Some(SweepSpec {
            axes: vec![SweepAxis {
                field: "networks".into(),
                values: vec![serde_json::json!(true)],
            }],
            seeds: vec![1],
        });
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.sweep = Some(SweepSpec {
            axes: vec![SweepAxis { field: "nonsense".into(), values: vec![serde_json::json!(1)] }],
            seeds: vec![1],
        });
        assert!(cfg.validate().unwrap_err().message().contains("nonsense"));
    }

    #[test]
    fn apply_axis_round_trips_through_json_types() {
        let mut cfg = TrainConfig::default();
        apply_axis(&mut cfg, "beta", &serde_json::json!(0.65)).unwrap();
        assert_eq!(cfg.beta, 0.65);
        apply_axis(&mut cfg, "networks", &serde_json::json!(4)).unwrap();
        assert_eq!(cfg.networks, 4);
        apply_axis(&mut cfg, "consistency", &serde_json::json!(false)).unwrap();
        assert!(!cfg.consistency);
        apply_axis(&mut cfg, "noise_rate", &serde_json::json!(0.3)).unwrap();
        assert_eq!(cfg.noise.rate, 0.3);
    }
}
