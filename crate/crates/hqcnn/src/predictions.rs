//! Per-sample prediction records, one JSON object per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    /// Ground-truth class index when known.
    pub truth: Option<usize>,
    pub p0: f64,
    pub p1: f64,
    pub pred: usize,
}

impl PredictionRecord {
    pub fn probs(&self) -> [f64; 2] {
        [self.p0, self.p1]
    }
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(Error::io(path))?;
    file.write_all(&out).map_err(Error::io(path))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| {
                Error::Data(format!(
                    "{}:{}: invalid prediction record: {e}",
                    path.display(),
                    n + 1
                ))
            })
        })
        .collect()
}
