use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hqcnn::checkpoint::Checkpoint;
use hqcnn::config::{Settings, TrainConfig};
use hqcnn::data::{
    load_image, scan_dataset, split_records, write_manifest, write_synthetic, SampleRecord,
};
use hqcnn::ensemble_eval::{combine, Method, PredictionFile};
use hqcnn::pipeline::{self, EvalRequest, CHECKPOINT_FILE};
use hqcnn::predictions::{write_predictions, PredictionRecord};
use hqcnn::{report, Error, Result};
use hqcnn_core::ensemble::argmax_label;
use hqcnn_core::hybrid::ModelId;
use hqcnn_core::split::SplitName;
use hqcnn_core::synth::synthesize_dataset;
use hqcnn_core::Class;
use serde_json::{json, Map};

/// Hybrid quantum-classical CNNs for binary histopathology classification.
#[derive(Parser, Debug)]
#[command(name = "hqcnn", version)]
struct Cli {
    /// Flat `key = value` file whose keys mirror the long flags; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and keep the checkpoint with the lowest validation loss.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Combine per-model prediction files.
    Ensemble(EnsembleArgs),
    /// Classify individual images with a checkpoint.
    Predict(PredictArgs),
    /// Write a synthetic dataset that follows the file naming convention.
    SynthData(SynthArgs),
    /// Scan a dataset and write a stratified split manifest.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    batch: Option<usize>,
    /// `analytic` or `shots:N`.
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use this split manifest instead of splitting the data root.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    magnification: Option<u32>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: Option<String>,
    /// Defaults to `<out>/<model>/best.ckpt`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `train`, `val` or `test`.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    /// Prediction files, one per model, over the same samples.
    files: Vec<PathBuf>,
    /// `majority`, `average` or `weighted`.
    #[arg(long)]
    method: Option<String>,
    /// Held-out prediction files, one per model in the same order, for the
    /// weighted method.
    #[arg(long, num_args = 1..)]
    weight_from: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Images to classify.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Also write the records to this directory as `predictions.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 30)]
    per_class: usize,
    /// Side length of the written images.
    #[arg(long, default_value_t = 64)]
    size: usize,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Manifest path; defaults to `<out>/manifest.tsv`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    magnification: Option<u32>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let mut stderr = io::stderr();
    match cli.command {
        Command::Train(a) => {
            settings.override_with("model", a.model);
            settings.override_with("data-root", a.data_root.map(|p| p.display().to_string()));
            settings.override_with("seed", a.seed);
            settings.override_with("epochs", a.epochs);
            settings.override_with("lr", a.lr);
            settings.override_with("batch", a.batch);
            settings.override_with("head", a.head);
            settings.override_with("out", a.out.map(|p| p.display().to_string()));
            settings.override_with("manifest", a.manifest.map(|p| p.display().to_string()));
            settings.override_with("magnification", a.magnification);
            let config = TrainConfig::from_settings(&settings)?;
            let outcome = pipeline::train(&config, &mut stderr)?;
            print!(
                "{}",
                report::render_text(
                    &format!("{} val (best epoch {})", config.model, outcome.best_epoch),
                    &outcome.val_metrics
                )
            );
            println!("checkpoint {}", outcome.checkpoint.display());
            Ok(())
        }
        Command::Eval(a) => {
            settings.override_with("model", a.model);
            settings.override_with("checkpoint", a.checkpoint.map(|p| p.display().to_string()));
            settings.override_with("data-root", a.data_root.map(|p| p.display().to_string()));
            settings.override_with("manifest", a.manifest.map(|p| p.display().to_string()));
            settings.override_with("split", a.split);
            settings.override_with("out", a.out.map(|p| p.display().to_string()));
            let expected_model: Option<ModelId> = settings.get("model")?;
            let model = expected_model.unwrap_or(ModelId::M1);
            let out: PathBuf = settings
                .get("out")?
                .unwrap_or_else(|| PathBuf::from("runs"));
            let checkpoint = settings
                .get("checkpoint")?
                .unwrap_or_else(|| out.join(model.name()).join(CHECKPOINT_FILE));
            let split = match settings.raw("split") {
                Some(s) => SplitName::from_name(s)
                    .ok_or_else(|| Error::Usage(format!("unknown split `{s}`")))?,
                None => SplitName::Test,
            };
            let out_dir = checkpoint
                .parent()
                .map_or_else(|| out.clone(), Path::to_path_buf);
            let req = EvalRequest {
                checkpoint,
                expected_model,
                data_root: settings.get("data-root")?,
                manifest: settings.get("manifest")?,
                split,
                out_dir,
            };
            let outcome = pipeline::eval(&req, &mut stderr)?;
            print!(
                "{}",
                report::render_text(
                    &format!("{} {}", outcome.model.name(), split),
                    &outcome.metrics
                )
            );
            println!("predictions {}", outcome.predictions.display());
            println!("report {}", outcome.report.display());
            Ok(())
        }
        Command::Ensemble(a) => {
            settings.override_with("method", a.method);
            if !a.weight_from.is_empty() {
                settings.set("weight-from", join_paths(&a.weight_from));
            }
            settings.override_with("out", a.out.map(|p| p.display().to_string()));
            let method: Method = settings.get("method")?.unwrap_or(Method::Average);
            let out: PathBuf = settings
                .get("out")?
                .unwrap_or_else(|| PathBuf::from("runs"));
            let files = a
                .files
                .iter()
                .map(|p| PredictionFile::read(p))
                .collect::<Result<Vec<_>>>()?;
            let weight_files = settings
                .list("weight-from")
                .iter()
                .map(|p| PredictionFile::read(Path::new(p)))
                .collect::<Result<Vec<_>>>()?;
            let outcome = combine(&files, method, &weight_files)?;
            let dir = out.join("ensemble");
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let predictions = dir.join(format!("predictions_{method}.jsonl"));
            write_predictions(&predictions, &outcome.records)?;
            if let Some(w) = &outcome.weights {
                for (f, (weight, e)) in files
                    .iter()
                    .zip(w.weights.iter().zip(&w.misclassifications))
                {
                    println!(
                        "weight {:.6} unique_errors {} {}",
                        weight,
                        e,
                        f.path.display()
                    );
                }
            }
            if let Some(m) = &outcome.metrics {
                print!("{}", report::render_text(&format!("ensemble {method}"), m));
                let mut extra = Map::new();
                extra.insert("method".into(), json!(method.name()));
                extra.insert(
                    "inputs".into(),
                    json!(files
                        .iter()
                        .map(|f| f.path.display().to_string())
                        .collect::<Vec<_>>()),
                );
                if let Some(w) = &outcome.weights {
                    extra.insert("weights".into(), json!(w.weights));
                    extra.insert(
                        "unique_misclassifications".into(),
                        json!(w.misclassifications),
                    );
                }
                let path = dir.join(format!("metrics_{method}.json"));
                report::write_json(&path, m, extra)?;
                println!("report {}", path.display());
            }
            println!("predictions {}", predictions.display());
            Ok(())
        }
        Command::Predict(a) => {
            settings.override_with("checkpoint", a.checkpoint.map(|p| p.display().to_string()));
            let checkpoint: PathBuf = settings
                .get("checkpoint")?
                .ok_or_else(|| Error::Usage("predict needs --checkpoint".into()))?;
            let (_, model) = Checkpoint::load_model(&checkpoint)?;
            let size = model.input_shape()[1] as u32;
            let mut records = Vec::new();
            for path in &a.images {
                let [p0, p1] = model.predict(&load_image(path, size)?)?;
                let truth = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(SampleRecord::parse_file_name)
                    .map(|r| r.label.index());
                let record = PredictionRecord {
                    id: path.display().to_string(),
                    truth,
                    p0,
                    p1,
                    pred: argmax_label([p0, p1]),
                };
                println!(
                    "{}",
                    serde_json::to_string(&record).expect("records serialize")
                );
                records.push(record);
            }
            if let Some(dir) = a.out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                write_predictions(&dir.join("predictions.jsonl"), &records)?;
            }
            Ok(())
        }
        Command::SynthData(a) => {
            settings.override_with("out", a.out.map(|p| p.display().to_string()));
            settings.override_with("seed", a.seed);
            let out: PathBuf = settings
                .get("out")?
                .ok_or_else(|| Error::Usage("synth-data needs --out".into()))?;
            let seed = settings.get("seed")?.unwrap_or(0);
            if a.per_class == 0 || a.size < 8 {
                return Err(Error::Usage(
                    "synth-data needs --per-class >= 1 and --size >= 8".into(),
                ));
            }
            let samples = synthesize_dataset(a.per_class, seed, a.size);
            let written = write_synthetic(&out, &samples, seed)?;
            println!("wrote {} images to {}", written.len(), out.display());
            Ok(())
        }
        Command::Split(a) => {
            settings.override_with("data-root", a.data_root.map(|p| p.display().to_string()));
            settings.override_with("seed", a.seed);
            settings.override_with("manifest", a.manifest.map(|p| p.display().to_string()));
            settings.override_with("out", a.out.map(|p| p.display().to_string()));
            settings.override_with("magnification", a.magnification);
            let root: PathBuf = settings
                .get("data-root")?
                .ok_or_else(|| Error::Usage("split needs --data-root".into()))?;
            let seed = settings.get("seed")?.unwrap_or(0);
            let magnification = settings.get("magnification")?.unwrap_or(400);
            let manifest: PathBuf = match settings.get("manifest")? {
                Some(p) => p,
                None => settings
                    .get::<PathBuf>("out")?
                    .unwrap_or_else(|| PathBuf::from("runs"))
                    .join(pipeline::MANIFEST_FILE),
            };
            let scan = scan_dataset(&root, magnification)?;
            if !scan.rejected.is_empty() {
                writeln!(
                    stderr,
                    "warning: {} non-conforming files skipped",
                    scan.rejected.len()
                )
                .ok();
                for p in &scan.rejected {
                    writeln!(stderr, "  {}", p.display()).ok();
                }
            }
            let entries = split_records(&scan.records, seed)?;
            if let Some(dir) = manifest.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            write_manifest(&manifest, &entries)?;
            println!("{:<10} {:>6} {:>6} {:>6}", "class", "train", "val", "test");
            for class in Class::ALL {
                let count = |s| {
                    entries
                        .iter()
                        .filter(|e| e.label == class && e.split == s)
                        .count()
                };
                println!(
                    "{:<10} {:>6} {:>6} {:>6}",
                    class.name(),
                    count(SplitName::Train),
                    count(SplitName::Val),
                    count(SplitName::Test)
                );
            }
            println!("manifest {}", manifest.display());
            Ok(())
        }
    }
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
