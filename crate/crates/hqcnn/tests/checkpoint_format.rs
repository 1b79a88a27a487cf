//! Checkpoint container: round trips and load refusals.

use std::collections::BTreeMap;

use hqcnn::checkpoint::{Checkpoint, FormatError, FORMAT_VERSION, MAGIC};
use hqcnn_core::hybrid::{HeadMode, HybridModel, ModelId};

fn sample() -> Checkpoint {
    let model =
        HybridModel::build(ModelId::M2, 7).with_head_mode(HeadMode::Shots { shots: 64, seed: 3 });
    let mut meta = BTreeMap::new();
    meta.insert("epoch".into(), "12".into());
    meta.insert("config.data-root".into(), "/data/break his".into());
    Checkpoint::from_model(&model, meta)
}

#[test]
fn file_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ckpt");
    let b = dir.path().join("nested/b.ckpt");
    let ckpt = sample();
    ckpt.save(&a).unwrap();
    let loaded = Checkpoint::load(&a).unwrap();
    assert_eq!(loaded, ckpt);
    loaded.save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let model = loaded.to_model().unwrap();
    assert_eq!(model.name(), "m2");
    assert_eq!(model.head.mode, HeadMode::Shots { shots: 64, seed: 3 });
    assert_eq!(model.named_tensors(), ckpt.tensors);
}

#[test]
fn header_layout() {
    let bytes = sample().to_bytes().unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    assert_eq!(
        u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
        FORMAT_VERSION
    );
    let meta_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let meta = std::str::from_utf8(&bytes[16..16 + meta_len]).unwrap();
    assert!(meta.contains("model=m2\n"), "{meta}");
    assert!(meta.contains("head=shots:64\n"), "{meta}");
}

#[test]
fn corrupted_payload_byte_fails_the_digest() {
    let mut bytes = sample().to_bytes().unwrap();
    let i = bytes.len() - 100;
    bytes[i] ^= 0x01;
    assert_eq!(Checkpoint::from_bytes(&bytes), Err(FormatError::Digest));
}

#[test]
fn refusals_name_their_reason() {
    let bytes = sample().to_bytes().unwrap();

    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'X';
    assert_eq!(
        Checkpoint::from_bytes(&wrong_magic),
        Err(FormatError::BadMagic)
    );

    let mut wrong_version = bytes.clone();
    wrong_version[8..12].copy_from_slice(&2u32.to_le_bytes());
    assert_eq!(
        Checkpoint::from_bytes(&wrong_version),
        Err(FormatError::Version { found: 2 })
    );

    for keep in [10, 20, bytes.len() / 2, bytes.len() - 1] {
        assert_eq!(
            Checkpoint::from_bytes(&bytes[..keep]),
            Err(FormatError::Truncated),
            "kept {keep} bytes"
        );
    }
}

#[test]
fn load_errors_exit_with_checkpoint_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"not a checkpoint").unwrap();
    let err = Checkpoint::load(&path).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(err.to_string().contains("magic"), "{err}");
    assert_eq!(
        Checkpoint::load(&dir.path().join("missing.ckpt"))
            .unwrap_err()
            .exit_code(),
        4
    );
}

#[test]
fn tensor_set_must_match_the_architecture() {
    let mut ckpt = sample();
    ckpt.tensors.pop();
    assert!(matches!(ckpt.to_model(), Err(FormatError::Malformed(_))));
    let mut ckpt = sample();
    ckpt.meta
        .insert("architecture".into(), "3x32x32;flatten;linear(10,1)".into());
    assert!(ckpt.to_model().is_err());
}
