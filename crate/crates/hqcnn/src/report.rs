//! Metrics rendering: aligned text for stdout and a JSON report file.

use std::fmt::Write as _;
use std::path::Path;

use hqcnn_core::metrics::{ClassMetrics, MetricsReport};
use hqcnn_core::Class;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub fn render_text(title: &str, r: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[{title}]");
    let _ = writeln!(s, "samples    {}", r.samples);
    let _ = writeln!(s, "accuracy   {:.4}", r.accuracy);
    let _ = writeln!(
        s,
        "{:<10} {:>9} {:>9} {:>9}",
        "class", "precision", "recall", "f1"
    );
    for class in Class::ALL {
        let m = &r.per_class[class.index()];
        let _ = writeln!(
            s,
            "{:<10} {:>9.4} {:>9.4} {:>9.4}",
            class.name(),
            m.precision,
            m.recall,
            m.f1
        );
    }
    let _ = writeln!(
        s,
        "{:<10} {:>9.4} {:>9.4} {:>9.4}",
        "macro", r.macro_precision, r.macro_recall, r.macro_f1
    );
    let c = &r.confusion;
    let _ = writeln!(
        s,
        "confusion  positive={} tp={} fp={} fn={} tn={}",
        Class::from_index(c.positive).map_or("?", Class::name),
        c.tp,
        c.fp,
        c.fn_,
        c.tn
    );
    s
}

fn class_json(m: &ClassMetrics) -> Value {
    json!({
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "precision_undefined": m.precision_undefined,
        "recall_undefined": m.recall_undefined,
        "f1_undefined": m.f1_undefined,
    })
}

pub fn to_json(r: &MetricsReport) -> Value {
    let c = &r.confusion;
    json!({
        "samples": r.samples,
        "accuracy": r.accuracy,
        "per_class": {
            "benign": class_json(&r.per_class[0]),
            "malignant": class_json(&r.per_class[1]),
        },
        "macro": {
            "precision": r.macro_precision,
            "recall": r.macro_recall,
            "f1": r.macro_f1,
        },
        "confusion": {"positive": c.positive, "tp": c.tp, "fp": c.fp, "fn": c.fn_, "tn": c.tn},
    })
}

/// Writes `extra` merged with the metrics under `"metrics"`.
pub fn write_json(
    path: &Path,
    r: &MetricsReport,
    mut extra: serde_json::Map<String, Value>,
) -> Result<()> {
    extra.insert("metrics".into(), to_json(r));
    let text = serde_json::to_string_pretty(&Value::Object(extra)).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(Error::io(path))
}
