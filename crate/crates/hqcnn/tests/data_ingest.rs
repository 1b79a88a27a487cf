//! Directory scans, image decoding and the synthetic dataset writer.

use std::fs;

use hqcnn::data::{load_image, scan_dataset, tensor_to_rgb, write_synthetic};
use hqcnn_core::synth::synthesize_dataset;
use hqcnn_core::{Class, Tensor};

#[test]
fn scan_filters_magnification_and_reports_strays() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir_all(root.join("b/sub")).unwrap();
    fs::create_dir_all(root.join("m")).unwrap();
    for name in [
        "b/sub/SOB_B_A-14-22549AB-400-002.png",
        "b/SOB_B_A-14-22549AB-400-001.png",
        "b/SOB_B_A-14-22549AB-100-001.png",
        "m/SOB_M_DC-14-3909-400-007.png",
        "m/notes.txt",
        "m/SOB_Q_DC-14-3909-400-008.png",
    ] {
        fs::write(root.join(name), b"").unwrap();
    }
    let scan = scan_dataset(root, 400).unwrap();
    let ids: Vec<String> = scan.records.iter().map(|r| r.id()).collect();
    assert_eq!(
        ids,
        [
            "b/SOB_B_A-14-22549AB-400-001.png",
            "b/sub/SOB_B_A-14-22549AB-400-002.png",
            "m/SOB_M_DC-14-3909-400-007.png"
        ]
    );
    assert_eq!(scan.count(Class::Benign), 2);
    assert_eq!(scan.other_magnification, 1);
    assert_eq!(scan.rejected.len(), 2);
}

#[test]
fn empty_or_missing_roots_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scan_dataset(dir.path(), 400).unwrap_err().exit_code(), 2);
    assert_eq!(
        scan_dataset(&dir.path().join("absent"), 400)
            .unwrap_err()
            .exit_code(),
        2
    );
}

#[test]
fn images_decode_to_unit_range_channels_first() {
    let dir = tempfile::tempdir().unwrap();
    let rgb = dir.path().join("rgb.png");
    image::RgbImage::from_fn(8, 4, |x, _| image::Rgb([255, (x * 30) as u8, 0]))
        .save(&rgb)
        .unwrap();
    let t = load_image(&rgb, 8).unwrap();
    assert_eq!(t.shape(), &[3, 8, 8]);
    assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(t.data()[..64].iter().all(|&v| (v - 1.0).abs() < 1e-6));
    assert!(t.data()[128..].iter().all(|&v| v.abs() < 1e-6));

    let gray = dir.path().join("gray.png");
    image::GrayImage::from_pixel(5, 5, image::Luma([51]))
        .save(&gray)
        .unwrap();
    let g = load_image(&gray, 3).unwrap();
    assert!(
        g.data().iter().all(|&v| (v - 0.2).abs() < 1e-6),
        "{:?}",
        g.data()
    );

    let rgba = dir.path().join("rgba.png");
    image::RgbaImage::from_pixel(2, 2, image::Rgba([1, 2, 3, 4]))
        .save(&rgba)
        .unwrap();
    assert_eq!(load_image(&rgba, 2).unwrap_err().exit_code(), 2);

    let junk = dir.path().join("junk.png");
    fs::write(&junk, b"definitely not a png").unwrap();
    assert_eq!(load_image(&junk, 2).unwrap_err().exit_code(), 2);
}

#[test]
fn quantization_round_trips_within_half_a_level() {
    let t = Tensor::from_vec(&[3, 2, 2], (0..12).map(|i| i as f32 / 11.0).collect()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.png");
    tensor_to_rgb(&t).save(&path).unwrap();
    let back = load_image(&path, 2).unwrap();
    for (a, b) in t.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
    }
}

#[test]
fn synthetic_writer_follows_the_naming_convention() {
    let dir = tempfile::tempdir().unwrap();
    let samples = synthesize_dataset(6, 2, 16);
    let written = write_synthetic(dir.path(), &samples, 2).unwrap();
    assert_eq!(written.len(), 12);
    let scan = scan_dataset(dir.path(), 400).unwrap();
    assert!(scan.rejected.is_empty());
    assert_eq!(
        (scan.count(Class::Benign), scan.count(Class::Malignant)),
        (6, 6)
    );
    let first = scan
        .records
        .iter()
        .find(|r| r.label == Class::Malignant)
        .unwrap();
    assert_eq!(first.id(), "malignant/SOB_M_SYN-00-2-400-001.png");
}

#[test]
fn constant_image_stays_constant_at_model_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gray.png");
    image::RgbImage::from_pixel(700, 460, image::Rgb([128, 128, 128]))
        .save(&path)
        .unwrap();
    for size in [32, 250] {
        let t = load_image(&path, size).unwrap();
        assert_eq!(t.shape(), &[3, size as usize, size as usize]);
        let worst = t
            .data()
            .iter()
            .map(|v| (v - 128.0 / 255.0).abs())
            .fold(0.0f32, f32::max);
        assert!(worst < 1e-6, "size {size}: {worst}");
    }
}

#[test]
fn downscaling_halves_keeps_mean_brightness() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("halves.png");
    image::RgbImage::from_fn(700, 460, |x, _| {
        if x < 350 {
            image::Rgb([0; 3])
        } else {
            image::Rgb([255; 3])
        }
    })
    .save(&path)
    .unwrap();
    for size in [32, 250] {
        let t = load_image(&path, size).unwrap();
        let mean = t.data().iter().map(|&v| v as f64).sum::<f64>() / t.len() as f64;
        assert!(
            (mean - 0.5).abs() <= 1.0 / 255.0,
            "size {size}: mean {mean}"
        );
    }
}
