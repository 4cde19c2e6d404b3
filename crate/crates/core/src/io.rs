//! Run artifacts: binary matrices, CSV tables and JSON documents.
//!
//! Matrices use a small self-describing format: the 8-byte magic `ADEIMMAT`,
//! the row and column counts as little-endian `u64`, then the entries as
//! little-endian `f64` in column-major order.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::Real;

const MAGIC: &[u8; 8] = b"ADEIMMAT";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: not a matrix file")]
    BadMagic { path: PathBuf },
    #[error("{path}: header announces {rows}x{cols} but the payload has {bytes} bytes")]
    Truncated {
        path: PathBuf,
        rows: u64,
        cols: u64,
        bytes: usize,
    },
    #[error("{path}: CSV columns have different lengths")]
    Ragged { path: PathBuf },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn file_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_matrix<T: Real>(path: &Path, m: &DMatrix<T>) -> Result<(), IoError> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(m.nrows() as u64).to_le_bytes())?;
        out.write_all(&(m.ncols() as u64).to_le_bytes())?;
        for v in m.iter() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        out.flush()
    };
    write().map_err(file_err(path))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(file_err(path))?;
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(IoError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8-byte slice"));
    let (rows, cols) = (word(8), word(16));
    let payload = &bytes[24..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .filter(|&b| b == payload.len() as u64);
    if expected.is_none() {
        return Err(IoError::Truncated {
            path: path.to_path_buf(),
            rows,
            cols,
            bytes: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    Ok(DMatrix::from_iterator(rows as usize, cols as usize, values))
}

/// Writes named columns as CSV; floats carry 17 significant digits.
pub fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), IoError> {
    let len = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != len) || header.len() != columns.len() {
        return Err(IoError::Ragged {
            path: path.to_path_buf(),
        });
    }
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut out = csv::Writer::from_path(path).map_err(csv_err)?;
    out.write_record(header).map_err(csv_err)?;
    for i in 0..len {
        out.write_record(columns.iter().map(|c| format!("{:.16e}", c[i])))
            .map_err(csv_err)?;
    }
    out.flush().map_err(file_err(path))
}

/// Reads a CSV written by [`write_csv`]: the header and the numeric columns.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        for (c, f) in columns.iter_mut().zip(record.iter()) {
            let v = f.trim().parse::<f64>().map_err(|e| IoError::File {
                path: path.to_path_buf(),
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            })?;
            c.push(v);
        }
    }
    Ok((header, columns))
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<(), IoError> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(file_err(path))
}
