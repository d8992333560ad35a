//! Dataset directories.
//!
//! Each CSV stores one snapshot per row, so the file is the transpose of the
//! in-memory column-per-snapshot matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExcitationSpec, SnapshotDataset};
use crate::error::{Error, Result};
use crate::io::{matrix_from_csv_by_column, matrix_to_csv_by_column, write_atomic};
use crate::lifting::{make_dictionary, DictionarySpec};

pub const LAYOUT_NOTE: &str = "each CSV row is one snapshot (column of the stored matrix); transpose to recover X, Xlift, Ylift, U";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub state_dim: usize,
    pub input_dim: usize,
    pub lifted_dim: usize,
    pub snapshots: usize,
    pub sampling_period: f64,
    pub dictionary: DictionarySpec,
    pub excitation: Option<ExcitationSpec>,
    pub seed: Option<u64>,
    pub layout: String,
}

pub fn save_dataset(dir: &Path, ds: &SnapshotDataset, excitation: Option<&ExcitationSpec>) -> Result<()> {
    let meta = DatasetMeta {
        state_dim: ds.state_dim(),
        input_dim: ds.input_dim(),
        lifted_dim: ds.lifted_dim(),
        snapshots: ds.len(),
        sampling_period: ds.dt,
        dictionary: ds.map.spec().clone(),
        excitation: excitation.cloned(),
        seed: excitation.map(|e| e.seed),
        layout: LAYOUT_NOTE.to_string(),
    };
    write_atomic(&dir.join("meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    for (name, m) in [
        ("X.csv", &ds.x),
        ("Xnext.csv", &ds.x_next),
        ("Xlift.csv", &ds.x_lift),
        ("Ylift.csv", &ds.y_lift),
        ("U.csv", &ds.u),
    ] {
        write_atomic(&dir.join(name), matrix_to_csv_by_column(m).as_bytes())?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<(SnapshotDataset, DatasetMeta)> {
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    let map = make_dictionary(&meta.dictionary)?;
    let read = |name: &str, rows: usize| -> Result<_> {
        let m = matrix_from_csv_by_column(&fs::read_to_string(dir.join(name))?, rows)?;
        if m.ncols() != meta.snapshots {
            return Err(Error::Dimension(format!(
                "{name} has {} snapshots, meta.json says {}",
                m.ncols(),
                meta.snapshots
            )));
        }
        Ok(m)
    };
    let ds = SnapshotDataset {
        x: read("X.csv", meta.state_dim)?,
        x_next: read("Xnext.csv", meta.state_dim)?,
        x_lift: read("Xlift.csv", meta.lifted_dim)?,
        y_lift: read("Ylift.csv", meta.lifted_dim)?,
        u: read("U.csv", meta.input_dim)?,
        map,
        dt: meta.sampling_period,
    };
    if ds.map.lifted_dim() != meta.lifted_dim {
        return Err(Error::Dimension("dictionary does not reproduce the stored lifted dimension".into()));
    }
    Ok((ds, meta))
}
