//! Classification metrics: accuracy, per-class precision/recall/F1, macro
//! F1, and the combined challenge score `0.67 * F1 + 0.33 * accuracy`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major C x C count matrix; rows index the true class, columns the
/// predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    classes: usize,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { counts: vec![0; classes * classes], classes }
    }

    pub fn from_labels(preds: &[usize], truths: &[usize], classes: usize) -> Result<Self> {
        if preds.len() != truths.len() {
            return Err(Error::Shape(format!(
                "{} predictions vs {} truths",
                preds.len(),
                truths.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (&p, &t) in preds.iter().zip(truths) {
            if p >= classes {
                return Err(Error::Label { label: p, classes });
            }
            if t >= classes {
                return Err(Error::Label { label: t, classes });
            }
            cm.add(t, p);
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.classes + pred] += 1;
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count of true class `c` (row sum), i.e. its support.
    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.count(c, p)).sum()
    }

    /// Count of predictions of class `c` (column sum).
    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|t| self.count(t, c)).sum()
    }
}

/// Fraction of correct predictions: `trace / total`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::UndefinedMetric("accuracy of an empty confusion matrix".into()));
    }
    let correct: u64 = (0..cm.classes()).map(|c| cm.count(c, c)).sum();
    Ok(correct as f64 / total as f64)
}

/// Precision, recall and F1 for one class. `0/0` cases are defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class scores plus the unweighted (macro) mean F1 over all classes.
pub fn f1_macro(cm: &ConfusionMatrix) -> Result<(f64, Vec<ClassScore>)> {
    if cm.total() == 0 {
        return Err(Error::UndefinedMetric("F1 of an empty confusion matrix".into()));
    }
    let mut per_class = Vec::with_capacity(cm.classes());
    for c in 0..cm.classes() {
        let tp = cm.count(c, c) as f64;
        let predicted = cm.col_sum(c) as f64;
        let actual = cm.row_sum(c) as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassScore { precision, recall, f1 });
    }
    let macro_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / cm.classes() as f64;
    Ok((macro_f1, per_class))
}

/// Support-weighted mean of the per-class F1 scores.
fn f1_weighted(cm: &ConfusionMatrix, per_class: &[ClassScore]) -> f64 {
    let total = cm.total() as f64;
    per_class
        .iter()
        .enumerate()
        .map(|(c, s)| s.f1 * cm.row_sum(c) as f64)
        .sum::<f64>()
        / total
}

/// The challenge score: `0.67 * f1 + 0.33 * accuracy`.
pub fn overall_score(f1: f64, acc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f1) || !(0.0..=1.0).contains(&acc) {
        return Err(Error::Config(format!(
            "scores must be in [0, 1], got f1={f1}, acc={acc}"
        )));
    }
    Ok(0.67 * f1 + 0.33 * acc)
}

/// Full evaluation report. `overall` always equals
/// `0.67 * f1_macro + 0.33 * accuracy`. Classes that never occur as truth
/// are listed in `zero_support` (their F1 is 0 by convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub overall: f64,
    pub per_class: Vec<ClassScore>,
    pub support: Vec<u64>,
    pub zero_support: Vec<usize>,
}

/// Builds the confusion matrix for `preds` vs `truths` and computes every
/// metric in one pass.
pub fn evaluate(preds: &[usize], truths: &[usize], classes: usize) -> Result<MetricReport> {
    if preds.is_empty() {
        return Err(Error::UndefinedMetric("cannot evaluate zero samples".into()));
    }
    let cm = ConfusionMatrix::from_labels(preds, truths, classes)?;
    report_from_confusion(&cm)
}

pub fn report_from_confusion(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let acc = accuracy(cm)?;
    let (macro_f1, per_class) = f1_macro(cm)?;
    let weighted = f1_weighted(cm, &per_class);
    let support: Vec<u64> = (0..cm.classes()).map(|c| cm.row_sum(c)).collect();
    let zero_support: Vec<usize> = support
        .iter()
        .enumerate()
        .filter_map(|(c, &n)| (n == 0).then_some(c))
        .collect();
    Ok(MetricReport {
        accuracy: acc,
        f1_macro: macro_f1,
        f1_weighted: weighted,
        overall: overall_score(macro_f1, acc)?,
        per_class,
        support,
        zero_support,
    })
}
