//! Ensembles over prediction files written by independently evaluated
//! models.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hqcnn_core::ensemble::{
    average_probability, compute_weights, majority_vote, unique_misclassifications,
    weighted_average, PredictionSet, WeightVector,
};
use hqcnn_core::metrics::{evaluate_labels, MetricsReport};

use crate::error::{Error, Result};
use crate::predictions::{read_predictions, PredictionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Majority,
    Average,
    Weighted,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Majority => "majority",
            Method::Average => "average",
            Method::Weighted => "weighted",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "majority" => Ok(Method::Majority),
            "average" => Ok(Method::Average),
            "weighted" => Ok(Method::Weighted),
            _ => Err(Error::Usage(format!(
                "unknown method `{s}`, expected majority, average or weighted"
            ))),
        }
    }
}

/// One model's predictions and where they came from.
#[derive(Debug, Clone)]
pub struct PredictionFile {
    pub path: PathBuf,
    pub records: Vec<PredictionRecord>,
}

impl PredictionFile {
    pub fn read(path: &Path) -> Result<PredictionFile> {
        Ok(PredictionFile {
            path: path.to_path_buf(),
            records: read_predictions(path)?,
        })
    }
}

/// Checks that every file lists the same samples, in the same order, with
/// the same ground truth. Reports the first divergence.
pub fn check_alignment(files: &[PredictionFile]) -> Result<()> {
    let Some(first) = files.first() else {
        return Ok(());
    };
    for other in &files[1..] {
        let (a, b) = (&first.records, &other.records);
        let diverge = |what: String| {
            Error::Alignment(format!(
                "{} vs {}: {what}",
                first.path.display(),
                other.path.display()
            ))
        };
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            if x.id != y.id {
                return Err(diverge(format!(
                    "record {} has id `{}` vs `{}`",
                    i + 1,
                    x.id,
                    y.id
                )));
            }
            if x.truth != y.truth {
                return Err(diverge(format!(
                    "record {} (`{}`) has truth {:?} vs {:?}",
                    i + 1,
                    x.id,
                    x.truth,
                    y.truth
                )));
            }
        }
        if a.len() != b.len() {
            return Err(diverge(format!("{} records vs {}", a.len(), b.len())));
        }
    }
    Ok(())
}

fn prediction_set(files: &[PredictionFile]) -> Result<PredictionSet> {
    check_alignment(files)?;
    let ids = files.iter().map(|f| f.path.display().to_string()).collect();
    let probs = files
        .iter()
        .map(|f| f.records.iter().map(PredictionRecord::probs).collect())
        .collect();
    let truth = files.first().and_then(|f| {
        f.records
            .iter()
            .map(|r| r.truth)
            .collect::<Option<Vec<_>>>()
    });
    Ok(PredictionSet::new(ids, probs, truth)?)
}

/// Weights from each model's held-out predictions, in model order.
pub fn weights_from(files: &[PredictionFile]) -> Result<WeightVector> {
    let set = prediction_set(files)?;
    let truth = set
        .truth
        .as_ref()
        .ok_or_else(|| Error::Data("weight files need ground truth on every record".into()))?;
    Ok(compute_weights(&unique_misclassifications(
        &set.labels(),
        truth,
    )?))
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub method: Method,
    pub records: Vec<PredictionRecord>,
    pub weights: Option<WeightVector>,
    /// Present when every record carries ground truth.
    pub metrics: Option<MetricsReport>,
}

/// Combines aligned prediction files. Majority records carry the vote share
/// as `p0`/`p1`; the averaging methods carry the fused distribution.
pub fn combine(
    files: &[PredictionFile],
    method: Method,
    weight_files: &[PredictionFile],
) -> Result<EnsembleOutcome> {
    if files.len() < 2 {
        return Err(Error::Usage(format!(
            "an ensemble needs at least 2 prediction files, got {}",
            files.len()
        )));
    }
    let set = prediction_set(files)?;
    let mut weights = None;
    let (probs, labels): (Vec<[f64; 2]>, Vec<usize>) = match method {
        Method::Majority => {
            let model_labels = set.labels();
            let voted = majority_vote(&model_labels, &set.probs)?;
            let k = model_labels.len() as f64;
            let shares = (0..set.samples())
                .map(|s| {
                    let ones = model_labels.iter().filter(|m| m[s] == 1).count() as f64 / k;
                    [1.0 - ones, ones]
                })
                .collect();
            (shares, voted)
        }
        Method::Average => {
            let fused = average_probability(&set.probs)?;
            (fused.probs, fused.labels)
        }
        Method::Weighted => {
            if weight_files.len() != files.len() {
                return Err(Error::Usage(format!(
                    "weighted ensemble needs one --weight-from file per model: {} models, {} weight files",
                    files.len(),
                    weight_files.len()
                )));
            }
            let w = weights_from(weight_files)?;
            let fused = weighted_average(&set.probs, &w)?;
            weights = Some(w);
            (fused.probs, fused.labels)
        }
    };
    let records: Vec<PredictionRecord> = files[0]
        .records
        .iter()
        .zip(probs.iter().zip(&labels))
        .map(|(r, (p, &pred))| PredictionRecord {
            id: r.id.clone(),
            truth: r.truth,
            p0: p[0],
            p1: p[1],
            pred,
        })
        .collect();
    let metrics = match &set.truth {
        Some(truth) => Some(evaluate_labels(&labels, truth)?),
        None => None,
    };
    Ok(EnsembleOutcome {
        method,
        records,
        weights,
        metrics,
    })
}
