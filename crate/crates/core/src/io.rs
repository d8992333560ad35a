//! File helpers shared by the persistence formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Write through a temporary sibling and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("`{}` is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One CSV row per matrix column (snapshot-major), no header.
pub fn matrix_to_csv_by_column(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 20);
    for col in m.column_iter() {
        for (i, v) in col.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_to_csv_by_column`]; `rows` is the matrix row count.
pub fn matrix_from_csv_by_column(text: &str, rows: usize) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut cols = 0;
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let before = data.len();
        for cell in line.split(',') {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("line {}: `{cell}`: {e}", line_no + 1)))?;
            data.push(v);
        }
        if data.len() - before != rows {
            return Err(Error::Dimension(format!(
                "line {} has {} values, expected {rows}",
                line_no + 1,
                data.len() - before
            )));
        }
        cols += 1;
    }
    Ok(DMatrix::from_column_slice(rows, cols, &data))
}
