//! Trainer behaviour on synthetic data.

use hqcnn::checkpoint::Checkpoint;
use hqcnn::config::TrainConfig;
use hqcnn::train::{evaluate, validate, Sample, Trainer};
use hqcnn::Error;
use hqcnn_core::hybrid::{Architecture, HybridModel, ModelId};
use hqcnn_core::synth::synthesize_dataset;

fn samples(seed: u64, per_class: usize) -> Vec<Sample> {
    synthesize_dataset(per_class, seed, 32)
        .into_iter()
        .enumerate()
        .map(|(i, s)| Sample {
            id: format!("s{i:03}"),
            image: s.image,
            label: s.class,
        })
        .collect()
}

fn config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        model: ModelId::M2,
        seed,
        epochs,
        ..TrainConfig::default()
    }
}

fn toy_model(seed: u64) -> HybridModel {
    let arch: Architecture = "3x32x32;conv(3,4,5,1,0);relu;maxpool;conv(4,8,5,1,0);relu;maxpool;flatten;linear(200,16);relu;linear(16,1)"
        .parse()
        .unwrap();
    HybridModel::new("toy", arch, seed).unwrap()
}

/// Training loss here is the eval-mode loss over the whole training set after
/// each epoch, which excludes dropout and minibatch noise.
#[test]
fn train_loss_decreases_over_first_five_epochs() {
    let decreasing: Vec<bool> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..10u64)
            .map(|seed| {
                s.spawn(move || {
                    let data = samples(seed, 16);
                    let mut trainer = Trainer::new(toy_model(seed), &config(seed, 5));
                    let losses: Vec<f64> = (0..5)
                        .map(|_| {
                            trainer.train_epoch(&data).unwrap();
                            validate(trainer.model(), &data).unwrap().0
                        })
                        .collect();
                    losses.windows(2).all(|w| w[1] < w[0])
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let count = decreasing.iter().filter(|&&d| d).count();
    assert!(count >= 9, "{count}/10 seeds strictly decreasing");
}

#[test]
fn fixed_seed_runs_are_identical() {
    let train = samples(1, 6);
    let val = samples(2, 3);
    let run = || {
        let mut t = Trainer::from_config(&config(4, 3));
        t.fit(&train, &val, |_| {}).unwrap();
        (
            t.history().to_vec(),
            t.best_checkpoint().unwrap().to_bytes().unwrap(),
        )
    };
    let (h1, c1) = run();
    let (h2, c2) = run();
    assert_eq!(h1, h2);
    assert_eq!(c1, c2);
    assert_eq!(h1.len(), 3);
}

#[test]
fn best_checkpoint_holds_minimum_validation_loss() {
    let train = samples(3, 6);
    let val = samples(5, 4);
    let mut t = Trainer::from_config(&config(2, 6));
    t.fit(&train, &val, |_| {}).unwrap();
    let min = t
        .history()
        .iter()
        .map(|h| h.val_loss)
        .fold(f64::INFINITY, f64::min);
    let ckpt = t.best_checkpoint().unwrap();
    assert_eq!(ckpt.meta_value::<f64>("val_loss"), Some(min));
    let epoch: usize = ckpt.meta_value("epoch").unwrap();
    assert_eq!(t.history()[epoch - 1].val_loss, min);
    assert!(t.history()[..epoch - 1].iter().all(|h| h.val_loss > min));
    assert_eq!(ckpt.meta["config.seed"], "2");
    assert_eq!(ckpt.meta["config.lr"], "0.001");

    // The stored model reproduces the validation loss it was selected on.
    let reloaded = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap())
        .unwrap()
        .to_model()
        .unwrap();
    let (loss, _) = validate(&reloaded, &val).unwrap();
    assert_eq!(loss, min);
}

#[test]
fn empty_training_set_is_a_data_error() {
    let mut t = Trainer::from_config(&config(0, 1));
    let err = t.train_epoch(&Vec::<Sample>::new()).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn non_finite_loss_reports_the_batch() {
    let mut data = samples(0, 4);
    data[5].image.data_mut()[17] = f32::NAN;
    let mut t = Trainer::from_config(&TrainConfig {
        batch: 2,
        ..config(0, 1)
    });
    let err = t.train_epoch(&data).unwrap_err();
    match &err {
        Error::NonFinite {
            epoch,
            batch,
            samples,
            loss,
        } => {
            assert_eq!(*epoch, 1);
            assert!(*batch >= 1 && samples.len() == 2 && loss.is_nan(), "{err}");
            assert!(samples.contains(&"s005".to_string()), "{err}");
        }
        other => panic!("unexpected error {other}"),
    }
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn evaluation_records_are_distributions_and_repeatable() {
    let data = samples(8, 5);
    let model = HybridModel::build(ModelId::M1, 3);
    let (r1, p1) = evaluate(&model, &data).unwrap();
    let (r2, p2) = evaluate(&model, &data).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(p1, p2);
    assert_eq!(p1.len(), 10);
    for p in &p1 {
        assert!((p.p0 + p.p1 - 1.0).abs() < 1e-6);
        assert_eq!(p.pred, usize::from(p.p1 >= p.p0));
    }
}

#[test]
fn overfit_model_scores_perfectly_on_its_training_split() {
    let data = samples(1, 8);
    let mut t = Trainer::from_config(&TrainConfig {
        model: ModelId::M1,
        ..config(1, 200)
    });
    let mut accuracy = 0.0;
    for _ in 0..200 {
        t.train_epoch(&data).unwrap();
        accuracy = evaluate(t.model(), &data).unwrap().0.accuracy;
        if accuracy == 1.0 {
            break;
        }
    }
    assert_eq!(accuracy, 1.0);
}
