//! `EMB1` container, little-endian throughout:
//!
//! ```text
//! magic "EMB1" | u32 version (=1) | u32 n_rows | u32 n_cols | u32 n_classes
//! class table: n_classes × (u16 byte length, UTF-8 bytes)
//! labels:      n_rows × u32
//! data:        n_rows × n_cols × f32, row-major
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{EmbeddingDataset, SplitTag};
use crate::{Error, Result, Scalar};

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Emb1Header {
    pub n_rows: u32,
    pub n_cols: u32,
    pub n_classes: u32,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| {
                Error::Length(format!(
                    "truncated {what}: need {len} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn parse_header(cursor: &mut Cursor<'_>) -> Result<Emb1Header> {
    if cursor.bytes.len() < 4 || cursor.bytes[..4] != MAGIC {
        return Err(Error::Format("missing EMB1 magic".into()));
    }
    if cursor.bytes.len() < HEADER_LEN {
        return Err(Error::Length(format!(
            "header needs {HEADER_LEN} bytes, file has {}",
            cursor.bytes.len()
        )));
    }
    cursor.pos = 4;
    let version = cursor.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported EMB1 version {version}")));
    }
    Ok(Emb1Header {
        n_rows: cursor.u32("n_rows")?,
        n_cols: cursor.u32("n_cols")?,
        n_classes: cursor.u32("n_classes")?,
    })
}

/// Decodes an in-memory `EMB1` image. The split tag is `Unsplit`.
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<EmbeddingDataset<T>> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let header = parse_header(&mut cursor)?;
    let n = header.n_rows as usize;
    let d = header.n_cols as usize;

    let mut classes = Vec::with_capacity((header.n_classes as usize).min(cursor.remaining() / 2));
    for index in 0..header.n_classes {
        let len = cursor.u16("class name length")? as usize;
        let raw = cursor.take(len, "class name")?;
        let name =
            std::str::from_utf8(raw).map_err(|e| Error::Format(format!("class {index} name is not UTF-8: {e}")))?;
        classes.push(name.to_owned());
    }

    let payload = n
        .checked_mul(4)
        .and_then(|labels| n.checked_mul(d)?.checked_mul(4)?.checked_add(labels))
        .ok_or_else(|| Error::Length(format!("declared shape {n}×{d} overflows")))?;
    if cursor.remaining() != payload {
        return Err(Error::Length(format!(
            "header declares {n} rows × {d} columns ({payload} payload bytes) but {} bytes follow the class table",
            cursor.remaining()
        )));
    }

    let labels = cursor
        .take(n * 4, "labels")?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect::<Vec<_>>();
    if let Some((row, label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes.len()) {
        return Err(Error::Consistency(format!(
            "row {row} has label {label} but the catalog holds {} classes",
            classes.len()
        )));
    }

    let values = cursor
        .take(n * d * 4, "data")?
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect::<Vec<_>>();
    let data = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Shape(e.to_string()))?;
    EmbeddingDataset::new(data, labels, classes, SplitTag::Unsplit)
}

/// Encodes a dataset into `EMB1` bytes. Features are narrowed to `f32`.
pub fn encode<T: Scalar>(ds: &EmbeddingDataset<T>) -> Result<Vec<u8>> {
    let too_big = |what: &str, v: usize| Error::Format(format!("{what} {v} does not fit in u32"));
    let n = u32::try_from(ds.n_rows()).map_err(|_| too_big("row count", ds.n_rows()))?;
    let d = u32::try_from(ds.dim()).map_err(|_| too_big("column count", ds.dim()))?;
    let k = u32::try_from(ds.n_classes()).map_err(|_| too_big("class count", ds.n_classes()))?;
    if let Some((row, &label)) = ds.labels().iter().enumerate().find(|(_, &l)| l >= ds.n_classes()) {
        return Err(Error::Consistency(format!(
            "row {row} has label {label} but the catalog holds {k} classes"
        )));
    }

    let mut out = Vec::with_capacity(HEADER_LEN + ds.n_rows() * (4 + 4 * ds.dim()));
    out.extend_from_slice(&MAGIC);
    for field in [VERSION, n, d, k] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for name in ds.classes() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("class name of {} bytes exceeds u16", name.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for &label in ds.labels() {
        out.extend_from_slice(&(label as u32).to_le_bytes());
    }
    for &value in ds.data().iter() {
        out.extend_from_slice(&(value.to_f64_lossy() as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn load_binary<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingDataset<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes `ds` to `path`. Invalid datasets are rejected before the file is touched.
pub fn save_binary<T: Scalar>(ds: &EmbeddingDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(ds)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads only the fixed header of an `EMB1` file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Emb1Header> {
    use std::io::Read;
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER_LEN);
    fs::File::open(path)
        .and_then(|f| f.take(HEADER_LEN as u64).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    parse_header(&mut Cursor { bytes: &buf, pos: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn minimal_bytes(declared_rows: u32, rows: &[[f32; 2]]) -> Vec<u8> {
        let mut b = b"EMB1".to_vec();
        for v in [1u32, declared_rows, 2, 1] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&1u16.to_le_bytes());
        b.push(b'x');
        for _ in rows {
            b.extend_from_slice(&0u32.to_le_bytes());
        }
        for row in rows {
            for v in row {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b
    }

    #[test]
    fn minimal_file_loads() {
        let ds: EmbeddingDataset<f64> = decode(&minimal_bytes(1, &[[0.6, 0.8]])).unwrap();
        assert_eq!((ds.n_rows(), ds.dim(), ds.n_classes()), (1, 2, 1));
        assert_eq!(ds.labels(), &[0]);
        let norm = ds.row_norms()[0];
        assert!((norm - 1.0).abs() < 1e-7);
    }

    #[test]
    fn declared_rows_exceed_payload() {
        let rows = [[1.0f32, 0.0]; 4];
        let mut bytes = b"EMB1".to_vec();
        for v in [1u32, 5, 2, 1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&0u16.to_le_bytes());
        // labels for the declared 5 rows but only 4 rows of features
        for _ in 0..5 {
            bytes.extend_from_slice(&0u32.to_le_bytes());
        }
        for row in rows {
            for v in row {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Length(_))));

        let short = minimal_bytes(5, &rows);
        assert!(matches!(decode::<f64>(&short), Err(Error::Length(_))));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = minimal_bytes(1, &[[0.6, 0.8]]);
        bytes.push(0);
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Length(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = minimal_bytes(1, &[[0.6, 0.8]]);
        bytes[0] = b'X';
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Format(_))));

        let mut bytes = minimal_bytes(1, &[[0.6, 0.8]]);
        bytes[4] = 2;
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn label_beyond_catalog_is_consistency_error() {
        let mut bytes = minimal_bytes(1, &[[0.6, 0.8]]);
        // single label sits right after the 1-byte class name
        let label_at = HEADER_LEN + 2 + 1;
        bytes[label_at] = 1;
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Consistency(_))));
    }

    #[test]
    fn empty_class_name_round_trips() {
        let ds = EmbeddingDataset::new(
            array![[1.0f64, 0.0], [0.0, 1.0]],
            vec![0, 1],
            vec![String::new(), "ünïcode".into()],
            SplitTag::Unsplit,
        )
        .unwrap();
        let bytes = encode(&ds).unwrap();
        assert_eq!(encode(&ds).unwrap(), bytes);
        assert_eq!(decode::<f64>(&bytes).unwrap(), ds);
    }

    #[test]
    fn header_only_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.emb1");
        std::fs::write(&path, minimal_bytes(1, &[[0.6, 0.8]])).unwrap();
        let h = read_header(&path).unwrap();
        assert_eq!(
            h,
            Emb1Header {
                n_rows: 1,
                n_cols: 2,
                n_classes: 1
            }
        );
    }
}
