use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::io::write_atomic;

/// `sha256("blob <len>\0" || contents)`, hex encoded.
pub fn content_hash(contents: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", contents.len()).as_bytes());
    h.update(contents);
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// File name to content hash.
    pub files: BTreeMap<String, String>,
}

/// Collects output files; writes each atomically when a directory is set.
#[derive(Debug, Default)]
pub struct OutputSink {
    dir: Option<PathBuf>,
    files: BTreeMap<String, String>,
}

impl OutputSink {
    pub fn new(dir: Option<&Path>) -> Self {
        Self {
            dir: dir.map(Path::to_path_buf),
            files: BTreeMap::new(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        self.files.insert(name.to_string(), content_hash(contents.as_bytes()));
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join(name), contents.as_bytes())?;
        }
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Write `manifest.json` over everything written so far.
    pub fn finish<C: Serialize>(self, experiment: &str, seed: u64, config: &C) -> Result<Manifest> {
        let manifest = Manifest {
            experiment: experiment.to_string(),
            seed,
            config: serde_json::to_value(config)?,
            files: self.files,
        };
        if let Some(dir) = &self.dir {
            let mut text = serde_json::to_string_pretty(&manifest)?;
            text.push('\n');
            write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
        }
        Ok(manifest)
    }
}

/// All trajectories in one CSV with a leading trajectory index.
pub fn trajectories_csv(trajs: &[Trajectory]) -> String {
    let (n, p) = trajs.first().map_or((0, 0), |t| (t.state_dim(), t.input_dim()));
    let mut out = format!("traj,{}\n", Trajectory::csv_header(n, p));
    for (i, t) in trajs.iter().enumerate() {
        for line in t.to_csv().lines().skip(1) {
            let _ = writeln!(out, "{i},{line}");
        }
    }
    out
}
