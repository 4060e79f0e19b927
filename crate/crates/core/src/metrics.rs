//! Confusion matrices, precision/recall/F1, macro summaries and ΔF1.
//!
//! Any ratio with a zero denominator is defined as 0, so a class that is
//! never predicted (or never present) pulls the macro averages down.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Raw counts: rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.n_classes..(truth + 1) * self.n_classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    /// Per-class support (row sums).
    pub fn support(&self) -> Vec<u64> {
        (0..self.n_classes).map(|c| self.row(c).iter().sum()).collect()
    }

    /// Row-normalized copy; rows with no samples stay all-zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        (0..self.n_classes)
            .map(|t| {
                let row = self.row(t);
                let sum: u64 = row.iter().sum();
                row.iter()
                    .map(|&v| if sum == 0 { 0.0 } else { v as f64 / sum as f64 })
                    .collect()
            })
            .collect()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Shape(format!(
                "label pair ({t}, {p}) outside {n_classes} classes"
            )));
        }
        cm.counts[t * n_classes + p] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn per_class_prf(cm: &ConfusionMatrix) -> ClassMetrics {
    let k = cm.n_classes();
    let support = cm.support();
    let predicted: Vec<u64> = (0..k).map(|p| (0..k).map(|t| cm.get(t, p)).sum()).collect();
    let mut out = ClassMetrics {
        precision: Vec::with_capacity(k),
        recall: Vec::with_capacity(k),
        f1: Vec::with_capacity(k),
        support: support.clone(),
    };
    for c in 0..k {
        let tp = cm.get(c, c);
        let p = ratio(tp, predicted[c]);
        let r = ratio(tp, support[c]);
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        out.precision.push(p);
        out.recall.push(r);
        out.f1.push(f1);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroSummary {
    pub macro_f1: f64,
    pub macro_precision: f64,
    /// Mean per-class recall, i.e. balanced accuracy.
    pub macro_recall: f64,
    /// Top-1 accuracy: trace / total.
    pub overall_accuracy: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn summarize(metrics: &ClassMetrics, cm: &ConfusionMatrix) -> Result<MacroSummary> {
    if metrics.f1.len() != cm.n_classes() {
        return Err(Error::Shape(format!(
            "metrics cover {} classes, confusion matrix {}",
            metrics.f1.len(),
            cm.n_classes()
        )));
    }
    let total = cm.total();
    if total == 0 {
        return Err(Error::Degenerate("no predictions to summarize".into()));
    }
    Ok(MacroSummary {
        macro_f1: mean(&metrics.f1),
        macro_precision: mean(&metrics.precision),
        macro_recall: mean(&metrics.recall),
        overall_accuracy: cm.trace() as f64 / total as f64,
    })
}

/// Published per-class F1 of a reference model, keyed by class name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReference {
    pub name: String,
    pub per_class_f1: BTreeMap<String, f64>,
    pub macro_f1: f64,
}

impl BaselineReference {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Baseline F1 values in catalog order; every name must match exactly.
    pub fn aligned_f1(&self, classes: &[String]) -> Result<Vec<f64>> {
        let missing: Vec<&str> = classes
            .iter()
            .filter(|c| !self.per_class_f1.contains_key(*c))
            .map(String::as_str)
            .collect();
        let extra: Vec<&str> = self
            .per_class_f1
            .keys()
            .filter(|k| !classes.contains(k))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::Consistency(format!(
                "baseline {:?} does not match the class catalog (missing: {missing:?}, unexpected: {extra:?})",
                self.name
            )));
        }
        Ok(classes.iter().map(|c| self.per_class_f1[c]).collect())
    }
}

/// `F1_ours − F1_baseline` per class, in catalog order.
pub fn delta_f1(ours_f1: &[f64], classes: &[String], baseline: &BaselineReference) -> Result<Vec<f64>> {
    if ours_f1.len() != classes.len() {
        return Err(Error::Shape(format!(
            "{} F1 values for {} classes",
            ours_f1.len(),
            classes.len()
        )));
    }
    let reference = baseline.aligned_f1(classes)?;
    Ok(ours_f1.iter().zip(reference).map(|(a, b)| a - b).collect())
}

/// All three stages in one call.
pub fn evaluate(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
) -> Result<(ConfusionMatrix, ClassMetrics, MacroSummary)> {
    let cm = confusion(y_true, y_pred, n_classes)?;
    let metrics = per_class_prf(&cm);
    let summary = summarize(&metrics, &cm)?;
    Ok((cm, metrics, summary))
}
