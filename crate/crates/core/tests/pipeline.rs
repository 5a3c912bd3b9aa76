use adlkit::harness::{load_windows, train_pipeline, ExperimentConfig, SynthPreset};
use adlkit::ingest::{load_dataset, write_dataset};
use adlkit::recognizer::{recognize, recognize_stage1, EnvPassthrough, PipelineModel};
use adlkit::Error;

fn config() -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.synth.preset = SynthPreset::Full;
    config.synth.count = 35;
    config.synth.rates.audio = 2000.0;
    config.train.iters_scale = 2e-4;
    config.train.learning_rate = 0.5;
    config
}

#[test]
fn dataset_directory_feeds_training() {
    let config = config();
    let windows = load_windows(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &windows).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded, windows);
    let a = train_pipeline(&config, &windows).unwrap();
    let b = train_pipeline(&config, &loaded).unwrap();
    assert_eq!(a, b);
}

#[test]
fn score_passthrough_feeds_the_standing_stage() {
    let mut config = config();
    config.pipeline.options.env_passthrough = EnvPassthrough::Scores;
    let windows = load_windows(&config).unwrap();
    let pipeline = train_pipeline(&config, &windows).unwrap();
    assert!(pipeline.env.is_some() && pipeline.standing.is_some());
    for w in &windows {
        let r = recognize(w, &pipeline).unwrap();
        assert_eq!(r.environment.as_ref().unwrap().scores.len(), 9);
        assert_eq!(r.standing.is_some(), r.adl.label == adlkit::labels::AdlLabel::Standing);
    }
}

#[test]
fn windows_without_accelerometer_are_rejected() {
    let config = config();
    let windows = load_windows(&config).unwrap();
    let pipeline = train_pipeline(&config, &windows).unwrap();
    let mut w = windows[0].clone();
    w.accel = None;
    assert!(matches!(recognize_stage1(&w, &pipeline), Err(Error::SensorUnavailable { .. })));
}

#[test]
fn saved_bundle_matches_in_memory_pipeline() {
    let config = config();
    let windows = load_windows(&config).unwrap();
    let pipeline = train_pipeline(&config, &windows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    pipeline.save(dir.path()).unwrap();
    let back = PipelineModel::load(dir.path()).unwrap();
    for w in &windows {
        assert_eq!(recognize(w, &back).unwrap(), recognize(w, &pipeline).unwrap());
    }
}
