//! Mini-batch training with Adam, validation-selected checkpoints and
//! evaluation.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::thread;

use hqcnn_core::ensemble::argmax_label;
use hqcnn_core::hybrid::HybridModel;
use hqcnn_core::metrics::{evaluate_labels, MetricsReport};
use hqcnn_core::nn::{nll_backward, nll_loss, Adam, AdamConfig, Mode};
use hqcnn_core::{rng, Class, Tensor};
use rand::seq::SliceRandom;

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::data::load_image;
use crate::error::{Error, Result};
use crate::predictions::PredictionRecord;

/// Indexed labelled images.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn id(&self, index: usize) -> &str;
    fn label(&self, index: usize) -> Class;
    fn image(&self, index: usize) -> Result<Tensor>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Tensor,
    pub label: Class,
}

impl SampleSource for [Sample] {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }

    fn id(&self, index: usize) -> &str {
        &self[index].id
    }

    fn label(&self, index: usize) -> Class {
        self[index].label
    }

    fn image(&self, index: usize) -> Result<Tensor> {
        Ok(self[index].image.clone())
    }
}

impl SampleSource for Vec<Sample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn id(&self, index: usize) -> &str {
        self.as_slice().id(index)
    }

    fn label(&self, index: usize) -> Class {
        self.as_slice().label(index)
    }

    fn image(&self, index: usize) -> Result<Tensor> {
        self.as_slice().image(index)
    }
}

/// Images decoded from disk on every access.
#[derive(Debug, Clone)]
pub struct DiskSource {
    pub root: PathBuf,
    pub size: u32,
    pub entries: Vec<(String, Class)>,
}

impl DiskSource {
    /// Decodes every entry up front.
    pub fn preload(&self) -> Result<Vec<Sample>> {
        parallel_map(self.entries.len(), |i| {
            Ok(Sample {
                id: self.entries[i].0.clone(),
                image: self.image(i)?,
                label: self.entries[i].1,
            })
        })
    }
}

impl SampleSource for DiskSource {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn id(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    fn label(&self, index: usize) -> Class {
        self.entries[index].1
    }

    fn image(&self, index: usize) -> Result<Tensor> {
        load_image(&self.root.join(&self.entries[index].0), self.size)
    }
}

/// `f(0..n)` in order, spread over the available cores.
pub fn parallel_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w * chunk..((w + 1) * chunk).min(n))
                        .map(f)
                        .collect::<Result<Vec<T>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
struct Best {
    epoch: usize,
    val_loss: f64,
    tensors: Vec<(String, Tensor)>,
}

pub struct Trainer {
    model: HybridModel,
    adam: Adam,
    config: TrainConfig,
    epoch: usize,
    history: Vec<EpochStats>,
    best: Option<Best>,
}

impl Trainer {
    pub fn new(model: HybridModel, config: &TrainConfig) -> Trainer {
        let adam = Adam::new(
            AdamConfig {
                lr: config.lr,
                ..AdamConfig::default()
            },
            model.params(),
        );
        Trainer {
            model,
            adam,
            config: config.clone(),
            epoch: 0,
            history: Vec::new(),
            best: None,
        }
    }

    /// A freshly initialized model for `config`.
    pub fn from_config(config: &TrainConfig) -> Trainer {
        let model = HybridModel::build(config.model, rng::derive_seed(config.seed, &[0x1417]))
            .with_head_mode(config.head_mode());
        Trainer::new(model, config)
    }

    pub fn model(&self) -> &HybridModel {
        &self.model
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    /// One pass over `train` in a per-epoch shuffled order. Gradients are
    /// averaged over each batch before an optimizer step. Returns the mean
    /// sample loss.
    pub fn train_epoch(&mut self, train: &dyn SampleSource) -> Result<f64> {
        if train.is_empty() {
            return Err(hqcnn_core::Error::EmptyDataset.into());
        }
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(self.config.seed, &[0x5348, epoch as u64]));
        let mut total = 0.0;
        for (batch, indices) in order.chunks(self.config.batch).enumerate() {
            self.model.zero_grad();
            for &i in indices {
                let loss = self.sample_step(train, i, epoch)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        epoch,
                        batch: batch + 1,
                        samples: indices.iter().map(|&j| train.id(j).to_string()).collect(),
                        loss,
                    });
                }
                total += loss;
            }
            let scale = 1.0 / indices.len() as f32;
            for p in self.model.params_mut() {
                p.grad.scale(scale);
            }
            self.adam.step(self.model.params_mut())?;
        }
        self.epoch = epoch;
        Ok(total / train.len() as f64)
    }

    /// Loss for one sample with gradients accumulated; NaN when the network
    /// output is non-finite.
    fn sample_step(&mut self, train: &dyn SampleSource, index: usize, epoch: usize) -> Result<f64> {
        let image = train.image(index)?;
        let target = train.label(index).index();
        let mut dropout = rng::stream(self.config.seed, &[0xd209, epoch as u64, index as u64]);
        let probs = match self.model.forward(&image, Mode::Train, &mut dropout) {
            Ok(p) => p,
            Err(_) if self.model.last_angle().is_some_and(|t| !t.is_finite()) => {
                return Ok(f64::NAN)
            }
            Err(e) => return Err(e.into()),
        };
        let loss = nll_loss(probs, target)?;
        if loss.is_finite() {
            self.model.backward(nll_backward(probs, target)?)?;
        }
        Ok(loss)
    }

    /// Trains one epoch, then validates; the best checkpoint moves only on a
    /// strict decrease of validation loss.
    pub fn run_epoch(
        &mut self,
        train: &dyn SampleSource,
        val: &dyn SampleSource,
    ) -> Result<EpochStats> {
        let train_loss = self.train_epoch(train)?;
        let (val_loss, val_accuracy) = validate(&self.model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch,
                batch: 0,
                samples: Vec::new(),
                loss: val_loss,
            });
        }
        let improved = self.best.as_ref().is_none_or(|b| val_loss < b.val_loss);
        if improved {
            self.best = Some(Best {
                epoch: self.epoch,
                val_loss,
                tensors: self.model.named_tensors(),
            });
        }
        let stats = EpochStats {
            epoch: self.epoch,
            train_loss,
            val_loss,
            val_accuracy,
            improved,
        };
        self.history.push(stats);
        Ok(stats)
    }

    /// Runs the configured number of epochs, reporting each to `progress`.
    pub fn fit(
        &mut self,
        train: &dyn SampleSource,
        val: &dyn SampleSource,
        mut progress: impl FnMut(&EpochStats),
    ) -> Result<()> {
        while self.epoch < self.config.epochs {
            let stats = self.run_epoch(train, val)?;
            progress(&stats);
        }
        Ok(())
    }

    /// The model at the best validated epoch.
    pub fn best_model(&self) -> Option<HybridModel> {
        let best = self.best.as_ref()?;
        let mut model = self.model.clone();
        for (name, value) in &best.tensors {
            model
                .set_tensor(name, value.clone())
                .expect("same architecture");
        }
        Some(model)
    }

    /// Checkpoint of the best epoch with the effective configuration echoed.
    pub fn best_checkpoint(&self) -> Option<Checkpoint> {
        let best = self.best.as_ref()?;
        let mut meta: BTreeMap<String, String> = self.config.to_meta();
        meta.insert("epoch".into(), best.epoch.to_string());
        meta.insert("val_loss".into(), format!("{:e}", best.val_loss));
        Some(Checkpoint::from_model(&self.best_model()?, meta))
    }
}

/// Mean eval-mode loss and accuracy.
pub fn validate(model: &HybridModel, samples: &dyn SampleSource) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(hqcnn_core::Error::EmptyDataset.into());
    }
    let scored = parallel_map(samples.len(), |i| {
        let probs = model.predict(&samples.image(i)?)?;
        let target = samples.label(i).index();
        Ok((nll_loss(probs, target)?, argmax_label(probs) == target))
    })?;
    let loss = scored.iter().map(|s| s.0).sum::<f64>() / scored.len() as f64;
    let correct = scored.iter().filter(|s| s.1).count();
    Ok((loss, correct as f64 / scored.len() as f64))
}

/// Predictions for every sample, in source order.
pub fn predict_all(
    model: &HybridModel,
    samples: &dyn SampleSource,
) -> Result<Vec<PredictionRecord>> {
    parallel_map(samples.len(), |i| {
        let [p0, p1] = model.predict(&samples.image(i)?)?;
        Ok(PredictionRecord {
            id: samples.id(i).to_string(),
            truth: Some(samples.label(i).index()),
            p0,
            p1,
            pred: argmax_label([p0, p1]),
        })
    })
}

/// Metrics and per-sample predictions.
pub fn evaluate(
    model: &HybridModel,
    samples: &dyn SampleSource,
) -> Result<(MetricsReport, Vec<PredictionRecord>)> {
    let records = predict_all(model, samples)?;
    let pred: Vec<usize> = records.iter().map(|r| r.pred).collect();
    let truth: Vec<usize> = records.iter().map(|r| r.truth.expect("labelled")).collect();
    Ok((evaluate_labels(&pred, &truth)?, records))
}
