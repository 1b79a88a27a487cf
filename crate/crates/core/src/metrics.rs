//! Confusion matrices and accuracy / precision / recall / F1.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub positive: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts seen with the other class as positive.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
            positive: 1 - self.positive,
        }
    }
}

pub fn confusion(pred: &[usize], truth: &[usize], positive: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Arity {
            what: "predicted labels",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if positive > 1 {
        return Err(Error::Contract(alloc::format!(
            "positive class {positive} is not 0 or 1"
        )));
    }
    let mut cm = ConfusionMatrix {
        positive,
        ..Default::default()
    };
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Precision, recall and F1 for one class taken as positive. A ratio with a
/// zero denominator is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl ClassMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        let (f1, f1_undefined) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub samples: usize,
    pub accuracy: f64,
    /// Indexed by class: `per_class[1]` treats class 1 as positive.
    pub per_class: [ClassMetrics; 2],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

pub fn report(cm: &ConfusionMatrix) -> MetricsReport {
    let pos = ClassMetrics::from_counts(cm.tp, cm.fp, cm.fn_);
    let neg = ClassMetrics::from_counts(cm.tn, cm.fn_, cm.fp);
    let mut per_class = [neg; 2];
    per_class[cm.positive] = pos;
    let total = cm.total();
    MetricsReport {
        samples: total,
        accuracy: ratio(cm.tp + cm.tn, total).0,
        per_class,
        macro_precision: (pos.precision + neg.precision) / 2.0,
        macro_recall: (pos.recall + neg.recall) / 2.0,
        macro_f1: (pos.f1 + neg.f1) / 2.0,
        confusion: *cm,
    }
}

/// `report(confusion(pred, truth, 1))`.
pub fn evaluate_labels(pred: &[usize], truth: &[usize]) -> Result<MetricsReport> {
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(report(&confusion(pred, truth, 1)?))
}
