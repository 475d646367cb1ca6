//! File formats: dataset, config and manifests survive a round trip.

use imfilm::config::ExperimentConfig;
use imfilm::manifest::Manifest;
use imfilm::scene::{make_dataset, read_video, save_video, CorpusSpec, Dataset};
use imfilm::StyleLabel;
use proptest::prelude::*;

fn tiny_spec() -> CorpusSpec {
    let mut spec = CorpusSpec::empty();
    spec.train[StyleLabel::Orbiting.index()] = 1;
    spec.test[StyleLabel::FlyBy.index()] = 1;
    spec.val[StyleLabel::SuperDolly.index()] = 1;
    spec
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let made = make_dataset(&tiny_spec(), dir.path()).unwrap();
    assert_eq!(made.videos.len(), 3);
    let loaded = Dataset::load(dir.path()).unwrap();
    assert_eq!(made.videos, loaded.videos);
}

#[test]
fn single_video_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let v = Dataset::generate(&tiny_spec()).unwrap().videos.remove(0).flipped();
    save_video(&dir.path().join("v"), &v).unwrap();
    assert_eq!(read_video(&dir.path().join("v")).unwrap(), v);
}

#[test]
fn corrupt_table_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    make_dataset(&tiny_spec(), dir.path()).unwrap();
    let id = std::fs::read_to_string(dir.path().join("manifest.txt"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .to_string();
    let table = dir.path().join(&id).join("features.cmt");
    let bytes = std::fs::read(&table).unwrap();
    std::fs::write(&table, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(Dataset::load(dir.path()), Err(imfilm::Error::Format { .. })));
}

#[test]
fn manifest_detects_changed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "one").unwrap();
    let mut m = Manifest::new("test", "0".repeat(64), vec![("seed".into(), 1)]);
    m.add(dir.path(), "a.txt").unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let loaded = Manifest::load(&path).unwrap();
    assert_eq!(loaded, m);
    assert!(loaded.changed(dir.path()).is_empty());
    std::fs::write(dir.path().join("a.txt"), "two").unwrap();
    assert_eq!(loaded.changed(dir.path()), vec![dir.path().join("a.txt")]);
}

#[test]
fn digest_ignores_output_location() {
    let a = ExperimentConfig::default();
    let mut b = a.clone();
    b.output = "elsewhere".into();
    assert_eq!(a.digest(), b.digest());
    b.style.train.epochs += 1;
    assert_ne!(a.digest(), b.digest());
}

proptest! {
    #[test]
    fn config_text_round_trip(
        epochs in 1usize..500,
        lr in 1e-5f64..1.0,
        threshold in 0.05f64..0.95,
        seed in any::<u64>(),
        gain in 0.0f64..2.0,
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.style.train.epochs = epochs;
        cfg.imitation.train.lr = lr;
        cfg.segmenter.threshold = threshold;
        cfg.corpus.seed = seed;
        cfg.controller.reframe_gain = gain;
        let back = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
