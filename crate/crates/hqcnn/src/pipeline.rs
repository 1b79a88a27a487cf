//! End-to-end operations behind the command-line subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hqcnn_core::hybrid::{HybridModel, ModelId};
use hqcnn_core::metrics::MetricsReport;
use hqcnn_core::split::SplitName;
use serde_json::{json, Map};

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::data::{read_manifest, scan_dataset, split_records, write_manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::predictions::{write_predictions, PredictionRecord};
use crate::report;
use crate::train::{evaluate, DiskSource, EpochStats, Sample, SampleSource, Trainer};

/// Largest input side length whose images are decoded once and kept in
/// memory.
const PRELOAD_MAX_SIZE: usize = 64;

pub const CHECKPOINT_FILE: &str = "best.ckpt";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const HISTORY_FILE: &str = "history.tsv";

/// Reads `manifest`, or scans `data_root` and splits it with `seed`.
/// Non-conforming files are reported to `log`.
pub fn resolve_manifest(
    data_root: &Path,
    manifest: Option<&Path>,
    seed: u64,
    magnification: u32,
    log: &mut dyn Write,
) -> Result<Vec<ManifestEntry>> {
    if let Some(path) = manifest {
        return read_manifest(path);
    }
    let scan = scan_dataset(data_root, magnification)?;
    if !scan.rejected.is_empty() {
        let shown: Vec<String> = scan
            .rejected
            .iter()
            .take(5)
            .map(|p| p.display().to_string())
            .collect();
        let _ =
            writeln!(
            log,
            "warning: {} files under {} do not follow the naming convention and were skipped: {}{}",
            scan.rejected.len(),
            data_root.display(),
            shown.join(", "),
            if scan.rejected.len() > shown.len() { ", ..." } else { "" }
        );
    }
    let _ = writeln!(
        log,
        "scanned {}: {} benign, {} malignant at {}X ({} at other magnifications)",
        data_root.display(),
        scan.count(hqcnn_core::Class::Benign),
        scan.count(hqcnn_core::Class::Malignant),
        magnification,
        scan.other_magnification
    );
    split_records(&scan.records, seed)
}

pub fn split_source(
    entries: &[ManifestEntry],
    split: SplitName,
    root: &Path,
    size: usize,
) -> DiskSource {
    DiskSource {
        root: root.to_path_buf(),
        size: size as u32,
        entries: entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| (e.path.clone(), e.label))
            .collect(),
    }
}

/// Small inputs are decoded once; large ones on every access.
enum Loaded {
    Memory(Vec<Sample>),
    Disk(DiskSource),
}

impl Loaded {
    fn new(source: DiskSource) -> Result<Loaded> {
        if source.size as usize <= PRELOAD_MAX_SIZE {
            Ok(Loaded::Memory(source.preload()?))
        } else {
            Ok(Loaded::Disk(source))
        }
    }

    fn source(&self) -> &dyn SampleSource {
        match self {
            Loaded::Memory(s) => s,
            Loaded::Disk(d) => d,
        }
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub val_metrics: MetricsReport,
}

pub fn render_history(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch\ttrain_loss\tval_loss\tval_accuracy\timproved\n");
    for h in history {
        s.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.4}\t{}\n",
            h.epoch, h.train_loss, h.val_loss, h.val_accuracy, h.improved
        ));
    }
    s
}

/// Trains one model and writes the best checkpoint, the manifest used, the
/// epoch history and a validation report under `out/<model>/`.
pub fn train(config: &TrainConfig, log: &mut dyn Write) -> Result<TrainOutcome> {
    config.validate()?;
    let entries = resolve_manifest(
        &config.data_root,
        config.manifest.as_deref(),
        config.seed,
        config.magnification,
        log,
    )?;
    let run_dir = config.run_dir();
    fs::create_dir_all(&run_dir).map_err(Error::io(&run_dir))?;
    write_manifest(&run_dir.join(MANIFEST_FILE), &entries)?;

    let size = config.model.image_size();
    let train = Loaded::new(split_source(
        &entries,
        SplitName::Train,
        &config.data_root,
        size,
    ))?;
    let val = Loaded::new(split_source(
        &entries,
        SplitName::Val,
        &config.data_root,
        size,
    ))?;
    let mut trainer = Trainer::from_config(config);
    let _ = writeln!(
        log,
        "training {} on {} samples, validating on {}",
        trainer.model().summary(),
        train.source().len(),
        val.source().len()
    );
    trainer.fit(train.source(), val.source(), |s| {
        let _ = writeln!(
            log,
            "epoch {:>4}  train_loss {:.6}  val_loss {:.6}  val_acc {:.4}{}",
            s.epoch,
            s.train_loss,
            s.val_loss,
            s.val_accuracy,
            if s.improved { "  *" } else { "" }
        );
    })?;
    let ckpt = trainer.best_checkpoint().expect("at least one epoch ran");
    let checkpoint = run_dir.join(CHECKPOINT_FILE);
    ckpt.save(&checkpoint)?;
    let history_path = run_dir.join(HISTORY_FILE);
    fs::write(&history_path, render_history(trainer.history()))
        .map_err(Error::io(&history_path))?;

    let best = trainer.best_model().expect("at least one epoch ran");
    let (val_metrics, records) = evaluate(&best, val.source())?;
    write_predictions(&run_dir.join("predictions_val.jsonl"), &records)?;
    let best_epoch: usize = ckpt.meta_value("epoch").unwrap_or(0);
    let mut extra = Map::new();
    extra.insert("model".into(), json!(config.model.name()));
    extra.insert("split".into(), json!("val"));
    extra.insert("best_epoch".into(), json!(best_epoch));
    extra.insert(
        "config".into(),
        json!(config
            .to_meta()
            .into_iter()
            .map(|(k, v)| (k.trim_start_matches("config.").to_string(), v))
            .collect::<std::collections::BTreeMap<_, _>>()),
    );
    report::write_json(&run_dir.join("metrics_val.json"), &val_metrics, extra)?;
    Ok(TrainOutcome {
        run_dir,
        checkpoint,
        history: trainer.history().to_vec(),
        best_epoch,
        val_metrics,
    })
}

#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub checkpoint: PathBuf,
    /// When set, a checkpoint of any other model is refused.
    pub expected_model: Option<ModelId>,
    /// Defaults to the data root recorded in the checkpoint.
    pub data_root: Option<PathBuf>,
    /// Defaults to the manifest next to the checkpoint, then to a fresh
    /// split with the checkpoint's seed.
    pub manifest: Option<PathBuf>,
    pub split: SplitName,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub model: HybridModel,
    pub metrics: MetricsReport,
    pub records: Vec<PredictionRecord>,
    pub predictions: PathBuf,
    pub report: PathBuf,
}

/// Evaluates a checkpoint on one split, writing `predictions_<split>.jsonl`
/// and `metrics_<split>.json` into `out_dir`.
pub fn eval(req: &EvalRequest, log: &mut dyn Write) -> Result<EvalOutcome> {
    let (ckpt, model) = Checkpoint::load_model(&req.checkpoint)?;
    if let Some(expected) = req.expected_model {
        if model.name() != expected.name() {
            return Err(Error::Checkpoint {
                path: req.checkpoint.clone(),
                reason: format!("holds model `{}`, expected `{expected}`", model.name()),
            });
        }
    }
    let data_root = req
        .data_root
        .clone()
        .or_else(|| ckpt.meta.get("config.data-root").map(PathBuf::from))
        .ok_or_else(|| {
            Error::Usage("no data root given and none recorded in the checkpoint".into())
        })?;
    let sibling = req.checkpoint.with_file_name(MANIFEST_FILE);
    let manifest = req
        .manifest
        .clone()
        .or_else(|| sibling.is_file().then_some(sibling));
    let seed = ckpt.meta_value("config.seed").unwrap_or(0);
    let magnification = ckpt.meta_value("config.magnification").unwrap_or(400);
    let entries = resolve_manifest(&data_root, manifest.as_deref(), seed, magnification, log)?;
    let size = model.input_shape()[1];
    let samples = Loaded::new(split_source(&entries, req.split, &data_root, size))?;
    let (metrics, records) = evaluate(&model, samples.source())?;
    fs::create_dir_all(&req.out_dir).map_err(Error::io(&req.out_dir))?;
    let predictions = req.out_dir.join(format!("predictions_{}.jsonl", req.split));
    write_predictions(&predictions, &records)?;
    let report_path = req.out_dir.join(format!("metrics_{}.json", req.split));
    let mut extra = Map::new();
    extra.insert("model".into(), json!(model.name()));
    extra.insert("split".into(), json!(req.split.name()));
    extra.insert(
        "checkpoint".into(),
        json!(req.checkpoint.display().to_string()),
    );
    report::write_json(&report_path, &metrics, extra)?;
    Ok(EvalOutcome {
        model,
        metrics,
        records,
        predictions,
        report: report_path,
    })
}
