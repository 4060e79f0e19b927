//! CSV interchange: header `label,f0,...,f{d-1}`, class names in the first column.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{EmbeddingDataset, SplitTag};
use crate::{Error, Result, Scalar};

/// Parses CSV from a reader. Classes are indexed in order of first appearance.
pub fn read_csv<T: Scalar, R: Read>(reader: R) -> Result<EmbeddingDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if header.get(0).map(str::trim) != Some("label") {
        return Err(Error::Parse {
            row: 0,
            message: "header must start with a `label` column".into(),
        });
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(Error::Parse {
            row: 0,
            message: "header declares no feature columns".into(),
        });
    }

    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut classes = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != dim + 1 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} features, found {}", dim, record.len().saturating_sub(1)),
            });
        }
        let name = &record[0];
        let label = *class_index.entry(name.to_owned()).or_insert_with(|| {
            classes.push(name.to_owned());
            classes.len() - 1
        });
        labels.push(label);
        for (col, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("feature f{col} is not a number: {field:?}"),
            })?;
            values.push(T::of(v));
        }
    }
    let data = Array2::from_shape_vec((labels.len(), dim), values).map_err(|e| Error::Shape(e.to_string()))?;
    EmbeddingDataset::new(data, labels, classes, SplitTag::Unsplit)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingDataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// Writes one row per sample: class name followed by the `d` features.
pub fn write_csv<T: Scalar, W: Write>(ds: &EmbeddingDataset<T>, writer: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Format(format!("csv write failed: {e}"));
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(ds.dim() + 1);
    header.push("label".to_owned());
    header.extend((0..ds.dim()).map(|j| format!("f{j}")));
    wtr.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(ds.dim() + 1);
    for (row, &label) in ds.data().rows().into_iter().zip(ds.labels()) {
        record.clear();
        record.push(ds.classes()[label].clone());
        record.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&record).map_err(csv_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::Format(format!("csv flush failed: {e}")))?;
    Ok(())
}

pub fn export_csv<T: Scalar>(ds: &EmbeddingDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}
