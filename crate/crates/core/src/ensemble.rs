//! Fusion rules over per-model two-class predictions: majority voting,
//! probability averaging, and probability averaging weighted by how often a
//! model is the only one to get a sample wrong.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-6;

/// Label of a two-class distribution. An exact tie goes to class 1.
pub fn argmax_label(p: [f64; 2]) -> usize {
    usize::from(p[1] >= p[0])
}

/// Per-model, per-sample distributions over the same ordered sample list.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub model_ids: Vec<String>,
    pub probs: Vec<Vec<[f64; 2]>>,
    pub truth: Option<Vec<usize>>,
}

impl PredictionSet {
    pub fn new(
        model_ids: Vec<String>,
        probs: Vec<Vec<[f64; 2]>>,
        truth: Option<Vec<usize>>,
    ) -> Result<PredictionSet> {
        if model_ids.len() != probs.len() {
            return Err(Error::Arity {
                what: "model ids",
                expected: probs.len(),
                actual: model_ids.len(),
            });
        }
        let samples = check_probs(&probs, 1)?;
        if let Some(t) = &truth {
            if t.len() != samples {
                return Err(Error::Arity {
                    what: "truth labels",
                    expected: samples,
                    actual: t.len(),
                });
            }
        }
        Ok(PredictionSet {
            model_ids,
            probs,
            truth,
        })
    }

    pub fn samples(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    /// Per-model argmax labels.
    pub fn labels(&self) -> Vec<Vec<usize>> {
        self.probs
            .iter()
            .map(|m| m.iter().copied().map(argmax_label).collect())
            .collect()
    }
}

/// Validates a `[model][sample]` matrix and returns the sample count.
fn check_probs(probs: &[Vec<[f64; 2]>], min_models: usize) -> Result<usize> {
    if probs.len() < min_models || probs.is_empty() {
        return Err(Error::Arity {
            what: "models",
            expected: min_models.max(1),
            actual: probs.len(),
        });
    }
    let samples = probs[0].len();
    for (m, row) in probs.iter().enumerate() {
        if row.len() != samples {
            return Err(Error::Arity {
                what: "samples per model",
                expected: samples,
                actual: row.len(),
            });
        }
        if let Some((s, p)) = row
            .iter()
            .enumerate()
            .find(|(_, p)| p[0] < 0.0 || p[1] < 0.0 || (p[0] + p[1] - 1.0).abs() > SUM_TOLERANCE)
        {
            return Err(Error::Contract(format!(
                "model {m} sample {s}: {p:?} is not a distribution"
            )));
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub probs: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
}

/// Normalized model weights and the error counts they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub misclassifications: Vec<usize>,
}

/// Convex combination per sample. A sample on which every model agrees
/// exactly is passed through unchanged.
fn fuse(probs: &[Vec<[f64; 2]>], weights: &[f64]) -> Fused {
    let samples = probs[0].len();
    let mut fused = Vec::with_capacity(samples);
    for s in 0..samples {
        let first = probs[0][s];
        let p = if probs.iter().all(|m| m[s] == first) {
            first
        } else {
            let mut acc = [0.0; 2];
            for (m, w) in probs.iter().zip(weights) {
                acc[0] += w * m[s][0];
                acc[1] += w * m[s][1];
            }
            acc
        };
        fused.push(p);
    }
    let labels = fused.iter().copied().map(argmax_label).collect();
    Fused {
        probs: fused,
        labels,
    }
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Elementwise mean across models, then argmax.
pub fn average_probability(probs: &[Vec<[f64; 2]>]) -> Result<Fused> {
    check_probs(probs, 2)?;
    Ok(fuse(probs, &uniform(probs.len())))
}

/// `weights` must be in the same model order as `probs`.
pub fn weighted_average(probs: &[Vec<[f64; 2]>], weights: &WeightVector) -> Result<Fused> {
    check_probs(probs, 2)?;
    if weights.weights.len() != probs.len() {
        return Err(Error::Arity {
            what: "ensemble weights",
            expected: probs.len(),
            actual: weights.weights.len(),
        });
    }
    Ok(fuse(probs, &weights.weights))
}

/// Per sample, the label most models chose. Ties, which need an even model
/// count, are settled by the averaged probabilities of that sample.
pub fn majority_vote(labels: &[Vec<usize>], probs: &[Vec<[f64; 2]>]) -> Result<Vec<usize>> {
    if labels.len() < 2 {
        return Err(Error::Arity {
            what: "models",
            expected: 2,
            actual: labels.len(),
        });
    }
    if labels.len() != probs.len() {
        return Err(Error::Arity {
            what: "probability sets for tie-break",
            expected: labels.len(),
            actual: probs.len(),
        });
    }
    let samples = check_probs(probs, 2)?;
    if let Some(bad) = labels.iter().find(|l| l.len() != samples) {
        return Err(Error::Arity {
            what: "labels per model",
            expected: samples,
            actual: bad.len(),
        });
    }
    let w = uniform(labels.len());
    let mut out = Vec::with_capacity(samples);
    for s in 0..samples {
        let ones = labels.iter().filter(|m| m[s] == 1).count();
        let zeros = labels.len() - ones;
        out.push(match ones.cmp(&zeros) {
            core::cmp::Ordering::Greater => 1,
            core::cmp::Ordering::Less => 0,
            core::cmp::Ordering::Equal => {
                let column: Vec<Vec<[f64; 2]>> = probs.iter().map(|m| vec![m[s]]).collect();
                fuse(&column, &w).labels[0]
            }
        });
    }
    Ok(out)
}

/// For each model, the number of samples it gets wrong while every other
/// participating model gets them right.
pub fn unique_misclassifications(labels: &[Vec<usize>], truth: &[usize]) -> Result<Vec<usize>> {
    if labels.len() < 2 {
        return Err(Error::Arity {
            what: "models",
            expected: 2,
            actual: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|l| l.len() != truth.len()) {
        return Err(Error::Contract(format!(
            "{} truth labels for {} predictions",
            truth.len(),
            bad.len()
        )));
    }
    let mut counts = vec![0; labels.len()];
    for (s, &t) in truth.iter().enumerate() {
        let mut wrong = labels.iter().enumerate().filter(|(_, m)| m[s] != t);
        if let (Some((i, _)), None) = (wrong.next(), wrong.next()) {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Weights proportional to `1 / (e_i + 1)`, normalized to sum to one.
pub fn compute_weights(misclassifications: &[usize]) -> WeightVector {
    let raw: Vec<f64> = misclassifications
        .iter()
        .map(|&e| 1.0 / (e as f64 + 1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    WeightVector {
        weights: raw.iter().map(|r| r / total).collect(),
        misclassifications: misclassifications.to_vec(),
    }
}
