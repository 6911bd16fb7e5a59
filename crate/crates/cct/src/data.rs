//! Synthetic datasets, label-noise injection, splits, and CSV ingestion.
//!
//! Samples keep both the clean label and the observed (possibly corrupted)
//! label so the harness can measure how much a model memorizes corrupted
//! annotations. Training code must only ever read `observed_label`.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One feature vector with its clean and observed labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub clean_label: usize,
    pub observed_label: usize,
    pub corrupted: bool,
}

/// A labeled dataset with a fixed feature dimension and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    classes: usize,
    dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, classes: usize, dim: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::Shape(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.clean_label >= classes || s.observed_label >= classes {
                return Err(Error::Label {
                    label: s.clean_label.max(s.observed_label),
                    classes,
                });
            }
            if s.corrupted != (s.clean_label != s.observed_label) {
                return Err(Error::Data(format!(
                    "sample {i}: corrupted flag inconsistent with labels"
                )));
            }
        }
        Ok(Dataset { samples, classes, dim })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn sample(&self, index: usize) -> &LabeledSample {
        &self.samples[index]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn corrupted_count(&self) -> usize {
        self.samples.iter().filter(|s| s.corrupted).count()
    }

    /// Exact fraction of samples whose observed label differs from the clean one.
    pub fn noise_rate_actual(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.corrupted_count() as f64 / self.samples.len() as f64
        }
    }

    /// Histogram of observed labels, length `classes`.
    pub fn class_counts_observed(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes];
        for s in &self.samples {
            counts[s.observed_label] += 1;
        }
        counts
    }

    /// Writes the dataset as CSV: header `f0,..,f{d-1},label[,clean_label]`,
    /// shortest round-trip float formatting, LF line endings.
    pub fn write_csv(&self, path: &Path, include_clean: bool) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        if include_clean {
            header.push("clean_label".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut fields: Vec<String> = s.features.iter().map(|v| format!("{v}")).collect();
            fields.push(format!("{}", s.observed_label));
            if include_clean {
                fields.push(format!("{}", s.clean_label));
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Loads a dataset written by [`Dataset::write_csv`]. Without a
    /// `clean_label` column the observed label doubles as the clean one.
    pub fn load_csv(path: &Path, classes: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;

        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        let has_clean = names.last() == Some(&"clean_label");
        let label_cols = if has_clean { 2 } else { 1 };
        if names.len() <= label_cols {
            return Err(Error::Parse { line: 1, msg: "header has no feature columns".into() });
        }
        let dim = names.len() - label_cols;
        for (i, name) in names.iter().take(dim).enumerate() {
            if *name != format!("f{i}") {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected feature column f{i}, found {name}"),
                });
            }
        }
        if names[dim] != "label" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected label column, found {}", names[dim]),
            });
        }

        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != dim + label_cols {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", dim + label_cols, record.len()),
                });
            }
            let mut features = Vec::with_capacity(dim);
            for (i, field) in record.iter().take(dim).enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad float in column f{i}: {field:?}"),
                })?;
                features.push(v);
            }
            let parse_label = |field: &str, what: &str| -> Result<usize> {
                let l: usize = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad {what}: {field:?}"),
                })?;
                if l >= classes {
                    return Err(Error::Parse {
                        line,
                        msg: format!("{what} {l} out of range for {classes} classes"),
                    });
                }
                Ok(l)
            };
            let observed = parse_label(&record[dim], "label")?;
            let clean = if has_clean {
                parse_label(&record[dim + 1], "clean_label")?
            } else {
                observed
            };
            samples.push(LabeledSample {
                features,
                clean_label: clean,
                observed_label: observed,
                corrupted: clean != observed,
            });
        }
        Dataset::new(samples, classes, dim)
    }
}

/// Flavor of synthetic label corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    /// Corrupted labels are resampled uniformly over the other C-1 classes.
    Symmetric,
    /// Corrupted labels flip to a fixed per-class target.
    Asymmetric,
}

/// Label-noise parameters. `pair_map` applies to asymmetric noise only;
/// when absent a cyclic map `c -> (c+1) mod C` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub pair_map: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { kind: NoiseKind::None, rate: 0.0, pair_map: None, seed: 0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Config(format!(
                "noise.rate must be in [0, 1], got {}",
                self.rate
            )));
        }
        if let Some(map) = &self.pair_map {
            if map.len() != classes {
                return Err(Error::Config(format!(
                    "noise.pair_map must have {classes} entries, got {}",
                    map.len()
                )));
            }
            for (c, &t) in map.iter().enumerate() {
                if t >= classes || t == c {
                    return Err(Error::Config(format!(
                        "noise.pair_map[{c}] = {t} must name a different class in range"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Radius of the circle the cluster means sit on.
const MEAN_RADIUS: f64 = 2.5;

/// Generates `classes` isotropic Gaussian clusters in `dim` dimensions.
///
/// Means are evenly spaced on a circle of radius 2.5 in the first two
/// feature dimensions, with a seed-dependent rotation; remaining dimensions
/// carry only noise. `spread` is the per-dimension standard deviation and
/// controls class overlap. All labels start clean.
pub fn gen_gaussian_clusters(
    classes: usize,
    dim: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::Config(format!("classes must be >= 2, got {classes}")));
    }
    if dim < 2 {
        return Err(Error::Config(format!("dim must be >= 2, got {dim}")));
    }
    if n_per_class == 0 {
        return Err(Error::Config("n_per_class must be >= 1".into()));
    }
    if !(spread > 0.0) {
        return Err(Error::Config(format!("spread must be > 0, got {spread}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = rng.gen_range(0.0..std::f64::consts::TAU);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let angle = rotation + std::f64::consts::TAU * c as f64 / classes as f64;
            let mut mean = vec![0.0; dim];
            mean[0] = MEAN_RADIUS * angle.cos();
            mean[1] = MEAN_RADIUS * angle.sin();
            mean
        })
        .collect();

    let mut samples = Vec::with_capacity(classes * n_per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            let features: Vec<f64> = mean
                .iter()
                .map(|&m| m + spread * rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(LabeledSample {
                features,
                clean_label: c,
                observed_label: c,
                corrupted: false,
            });
        }
    }
    Dataset::new(samples, classes, dim)
}

/// Corrupts observed labels according to `spec`, leaving features and clean
/// labels untouched. The input must not already carry corruption.
pub fn inject_noise(ds: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    spec.validate(ds.classes())?;
    if ds.corrupted_count() > 0 {
        return Err(Error::State("dataset already contains corrupted labels".into()));
    }
    if spec.kind == NoiseKind::None {
        return Ok(ds.clone());
    }

    let classes = ds.classes();
    let cyclic: Vec<usize>;
    let pair_map: &[usize] = match (&spec.kind, &spec.pair_map) {
        (NoiseKind::Asymmetric, Some(map)) => map,
        (NoiseKind::Asymmetric, None) => {
            cyclic = (0..classes).map(|c| (c + 1) % classes).collect();
            &cyclic
        }
        _ => &[],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = ds.samples().to_vec();
    for s in &mut samples {
        if !rng.gen_bool(spec.rate) {
            continue;
        }
        let new = match spec.kind {
            NoiseKind::Symmetric => {
                let draw = rng.gen_range(0..classes - 1);
                if draw >= s.clean_label {
                    draw + 1
                } else {
                    draw
                }
            }
            NoiseKind::Asymmetric => pair_map[s.clean_label],
            NoiseKind::None => unreachable!(),
        };
        s.observed_label = new;
        s.corrupted = true;
    }
    Dataset::new(samples, classes, ds.dim())
}

/// Splits into (train, validation, test), stratified by clean label.
///
/// Within each class the assignment is a seeded shuffle; each output keeps
/// samples in their original dataset order, so fractions `(1, 0, 0)` return
/// the input unchanged.
pub fn split(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (ftr, fva, fte) = fractions;
    for f in [ftr, fva, fte] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Config(format!("split fractions must be in [0, 1], got {f}")));
        }
    }
    if (ftr + fva + fte - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {}",
            ftr + fva + fte
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, s) in ds.samples().iter().enumerate() {
        by_class[s.clean_label].push(i);
    }

    let mut idx_train = Vec::new();
    let mut idx_val = Vec::new();
    let mut idx_test = Vec::new();
    for indices in &mut by_class {
        indices.shuffle(&mut rng);
        let n = indices.len();
        let c1 = ((ftr * n as f64).round() as usize).min(n);
        let c2 = (((ftr + fva) * n as f64).round() as usize).clamp(c1, n);
        idx_train.extend_from_slice(&indices[..c1]);
        idx_val.extend_from_slice(&indices[c1..c2]);
        idx_test.extend_from_slice(&indices[c2..]);
    }

    let build = |mut idx: Vec<usize>| -> Result<Dataset> {
        idx.sort_unstable();
        let samples = idx.iter().map(|&i| ds.sample(i).clone()).collect();
        Dataset::new(samples, ds.classes(), ds.dim())
    };
    Ok((build(idx_train)?, build(idx_val)?, build(idx_test)?))
}

/// Duplicates samples (with replacement, seed-deterministic) until every
/// observed-label class count equals the maximum count. Originals are all
/// retained, in their original order, with duplicates appended.
pub fn oversample_balance(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let counts = ds.class_counts_observed();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Data(format!(
            "cannot oversample: class {empty} has no samples"
        )));
    }
    let max = *counts.iter().max().expect("classes >= 2");

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, s) in ds.samples().iter().enumerate() {
        by_class[s.observed_label].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = ds.samples().to_vec();
    for (c, indices) in by_class.iter().enumerate() {
        for _ in counts[c]..max {
            let pick = indices[rng.gen_range(0..indices.len())];
            samples.push(ds.sample(pick).clone());
        }
    }
    Dataset::new(samples, ds.classes(), ds.dim())
}
