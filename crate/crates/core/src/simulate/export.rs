//! Ensemble export.
//!
//! CSV: a header row with the recorded times, then one row per path.
//!
//! Binary (little-endian):
//!
//! ```text
//! magic     8 bytes  "MVBRIDG1"
//! n_paths   u64
//! n_cols    u64
//! grid      n_cols x f64
//! values    n_paths x n_cols x f64, row-major
//! ```

use std::io::{Read, Write};

use super::PathEnsemble;
use crate::error::{BridgeError, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"MVBRIDG1";

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(ensemble: &PathEnsemble, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let map = |e: csv::Error| BridgeError::Io(std::io::Error::other(e));
    w.write_record(ensemble.grid.iter().map(|&t| format_f64(t)))
        .map_err(map)?;
    for row in ensemble.paths() {
        w.write_record(row.iter().map(|&v| format_f64(v))).map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDump {
    pub grid: Vec<f64>,
    pub n_paths: usize,
    pub values: Vec<f64>,
}

pub fn write_binary<W: Write>(ensemble: &PathEnsemble, mut writer: W) -> Result<()> {
    writer.write_all(BINARY_MAGIC)?;
    writer.write_all(&(ensemble.n_paths as u64).to_le_bytes())?;
    writer.write_all(&(ensemble.n_cols() as u64).to_le_bytes())?;
    for v in ensemble.grid.iter().chain(&ensemble.values) {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<EnsembleDump> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(BridgeError::Parse {
            line: 0,
            message: "bad magic header".into(),
        });
    }
    let mut word = [0u8; 8];
    reader.read_exact(&mut word)?;
    let n_paths = u64::from_le_bytes(word) as usize;
    reader.read_exact(&mut word)?;
    let n_cols = u64::from_le_bytes(word) as usize;
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            reader.read_exact(&mut word)?;
            out.push(f64::from_le_bytes(word));
        }
        Ok(out)
    };
    let grid = read_f64s(n_cols)?;
    let values = read_f64s(n_paths * n_cols)?;
    Ok(EnsembleDump {
        grid,
        n_paths,
        values,
    })
}

/// Reads the CSV layout written by [`write_csv`].
pub fn read_csv<R: Read>(reader: R) -> Result<EnsembleDump> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut n_paths = 0;
    for (i, record) in r.records().enumerate() {
        let line = i as u64 + 1;
        let record = record.map_err(|e| BridgeError::Parse {
            line,
            message: e.to_string(),
        })?;
        let row = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| BridgeError::Parse {
                    line,
                    message: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if i == 0 {
            grid = row;
        } else {
            values.extend(row);
            n_paths += 1;
        }
    }
    if grid.len() < 2 {
        return Err(BridgeError::Parse {
            line: 1,
            message: "header must list at least two recorded times".into(),
        });
    }
    Ok(EnsembleDump {
        grid,
        n_paths,
        values,
    })
}
