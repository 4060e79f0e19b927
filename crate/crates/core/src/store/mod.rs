//! Embedding datasets and their on-disk formats.

mod csv_io;
mod emb1;
mod manifest;

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use csv_io::{export_csv, load_csv, read_csv, write_csv};
pub use emb1::{decode, encode, load_binary, read_header, save_binary, Emb1Header, MAGIC, VERSION};
pub use manifest::{file_checksum, Manifest};

/// Tolerance on `|‖row‖ − 1|` for a row to count as unit-norm.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
    Unsplit,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::Unsplit => "unsplit",
        })
    }
}

/// Row-major embedding matrix with integer labels and a frozen class catalog.
///
/// Label `i` refers to `classes()[i]`. The catalog order is fixed at ingest
/// and every downstream index (confusion matrices, weights, reports) uses it.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDataset<T> {
    data: Array2<T>,
    labels: Vec<usize>,
    classes: Vec<String>,
    split: SplitTag,
}

impl<T: Scalar> EmbeddingDataset<T> {
    /// Builds a dataset, checking that labels match the rows and the catalog.
    pub fn new(data: Array2<T>, labels: Vec<usize>, classes: Vec<String>, split: SplitTag) -> Result<Self> {
        if labels.len() != data.nrows() {
            return Err(Error::Consistency(format!(
                "{} labels for {} rows",
                labels.len(),
                data.nrows()
            )));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes.len()) {
            return Err(Error::Consistency(format!(
                "row {row} has label {label} but the catalog holds {} classes",
                classes.len()
            )));
        }
        Ok(Self {
            data,
            labels,
            classes,
            split,
        })
    }

    pub fn data(&self) -> ArrayView2<'_, T> {
        self.data.view()
    }

    pub fn row(&self, index: usize) -> ArrayView1<'_, T> {
        self.data.row(index)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Number of rows per class, in catalog order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &label in &self.labels {
            counts[label] += 1;
        }
        counts
    }

    /// Row indices grouped by class, ascending within each class.
    pub fn rows_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.classes.len()];
        for (row, &label) in self.labels.iter().enumerate() {
            groups[label].push(row);
        }
        groups
    }

    /// Copies the given rows (in the given order) and their labels.
    pub fn gather(&self, rows: &[usize]) -> Result<(Array2<T>, Vec<usize>)> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(Error::Shape(format!(
                "row index {bad} out of range for {} rows",
                self.n_rows()
            )));
        }
        let data = self.data.select(Axis(0), rows);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Ok((data, labels))
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<T> {
        self.data
            .rows()
            .into_iter()
            .map(|row| row.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt())
            .collect()
    }

    /// Row whose norm deviates most from 1, with that norm.
    pub fn worst_norm_row(&self) -> Option<(usize, T)> {
        self.row_norms().into_iter().enumerate().max_by(|a, b| {
            let da = (a.1 - T::one()).abs();
            let db = (b.1 - T::one()).abs();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Greater)
        })
    }

    /// Returns a copy with every row scaled to unit Euclidean norm.
    ///
    /// Zero-norm (or non-finite) rows are rejected rather than skipped so that
    /// labels stay aligned with rows.
    pub fn normalize_rows(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for (index, mut row) in data.rows_mut().into_iter().enumerate() {
            let norm = row.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
            if norm == T::zero() || !norm.is_finite() {
                return Err(Error::Degenerate(format!(
                    "row {index} has norm {norm} and cannot be normalized"
                )));
            }
            row.mapv_inplace(|v| v / norm);
        }
        Ok(Self {
            data,
            labels: self.labels.clone(),
            classes: self.classes.clone(),
            split: self.split,
        })
    }

    /// Converts the feature matrix to another scalar type.
    pub fn cast<U: Scalar>(&self) -> EmbeddingDataset<U> {
        EmbeddingDataset {
            data: self.data.mapv(|v| U::of(v.to_f64_lossy())),
            labels: self.labels.clone(),
            classes: self.classes.clone(),
            split: self.split,
        }
    }
}
