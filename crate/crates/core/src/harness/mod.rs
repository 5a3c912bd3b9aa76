//! Experiment runner: stratified splits, the (stage × combination × variant
//! × kind × normalization) training grid, evaluation, and reports.

mod config;
mod report;

pub use config::{
    ExperimentConfig, ExperimentSettings, Normalization, PipelineSettings, StageChoice, SynthPreset, SynthSettings,
    TrainSettings, CONFIG_VERSION,
};
pub use report::{emit_report, parse_report, CellOutcome, CellReport, ExperimentReport, ReportFormat, StageSummary, REPORT_SCHEMA_VERSION};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::ann::{self, ModelKind, NeuralNet};
use crate::error::{Error, Result};
use crate::fusion::{Combination, DatasetVariant, EnvInput, FeatureVector, Normalizer, WindowFeatures};
use crate::ingest::{load_dataset, synthesize_dataset, SensorWindow};
use crate::labels::Stage;
use crate::recognizer::{fit_stage, PipelineModel, StageModel};

/// Stratified hold-out split over class indices. Returns (train, test)
/// positions, each in ascending order. Every class keeps at least one
/// example on each side.
pub fn split_indices(labels: &[usize], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Config(format!("class {class} has fewer than 2 examples")));
        }
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64 * ratio).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits the windows labelled for `stage`, stratified by that label.
/// Unlabelled windows are left out.
pub fn split_dataset(
    windows: &[SensorWindow],
    stage: Stage,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<SensorWindow>, Vec<SensorWindow>)> {
    let labelled: Vec<&SensorWindow> = windows.iter().filter(|w| w.labels.class_index(stage).is_some()).collect();
    let labels: Vec<usize> = labelled.iter().map(|w| w.labels.class_index(stage).unwrap()).collect();
    let (train, test) = split_indices(&labels, ratio, seed)?;
    Ok((
        train.into_iter().map(|i| labelled[i].clone()).collect(),
        test.into_iter().map(|i| labelled[i].clone()).collect(),
    ))
}

/// Accuracy as a fraction and the confusion matrix (`[true][predicted]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
}

/// Scores (true, predicted) class pairs.
pub fn evaluate(pairs: &[(usize, usize)], classes: usize) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::Domain("cannot evaluate on an empty test set".into()));
    }
    let mut confusion = vec![vec![0u64; classes]; classes];
    for &(t, p) in pairs {
        if t >= classes || p >= classes {
            return Err(Error::Domain(format!("class index outside 0..{classes}")));
        }
        confusion[t][p] += 1;
    }
    let correct: u64 = (0..classes).map(|i| confusion[i][i]).sum();
    Ok(Evaluation { accuracy: correct as f64 / pairs.len() as f64, confusion })
}

/// Evaluates a network on raw test vectors, normalizing them first when a
/// normalizer is given.
pub fn evaluate_net(
    net: &NeuralNet,
    normalizer: Option<&Normalizer>,
    vectors: &[FeatureVector],
    labels: &[usize],
) -> Result<Evaluation> {
    let pairs = vectors
        .iter()
        .zip(labels)
        .map(|(v, &y)| {
            let values = match normalizer {
                Some(n) => n.normalize(v)?.values,
                None => v.values.clone(),
            };
            Ok((y, ann::predict(net, &values)?.0))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(&pairs, net.topology.outputs())
}

/// Loads the configured dataset directory or synthesizes one.
pub fn load_windows(config: &ExperimentConfig) -> Result<Vec<SensorWindow>> {
    match &config.experiment.data {
        Some(dir) => load_dataset(dir),
        None => synthesize_dataset(&config.synth.spec(config.seed)),
    }
}

/// SHA-256 over every window's id, labels, and sample bits.
pub fn dataset_digest(windows: &[SensorWindow]) -> String {
    let mut h = Sha256::new();
    let mut put = |x: f64| h.update(x.to_bits().to_le_bytes());
    let mut ids = Vec::new();
    for w in windows {
        for s in [&w.accel, &w.magnet, &w.gyro].into_iter().flatten().flatten() {
            put(s.t);
            put(s.x);
            put(s.y);
            put(s.z);
        }
        if let Some(a) = &w.audio {
            put(a.sample_rate);
            a.samples.iter().for_each(|&x| put(x));
        }
        for f in w.gps_track.iter().flatten() {
            put(f.t);
            put(f.lat);
            put(f.lon);
        }
        put(w.duration);
        ids.push(format!("{}|{:?}", w.window_id, w.labels));
    }
    h.update(ids.join("\n").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over (seed, stream).
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A window's extracted features and its position in the input.
struct Example {
    features: WindowFeatures,
    window: usize,
}

struct StageData<'a> {
    stage: Stage,
    train: Vec<&'a Example>,
    test: Vec<&'a Example>,
    train_labels: Vec<usize>,
    test_labels: Vec<usize>,
}

/// Result of [`run_experiment`]: the report and, when the grid covered the
/// activity stage, a pipeline assembled from each stage's best cell.
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub pipeline: Option<PipelineModel>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let windows = load_windows(config)?;
    run_experiment_on(config, &windows)
}

/// Runs the grid on already loaded windows.
pub fn run_experiment_on(config: &ExperimentConfig, windows: &[SensorWindow]) -> Result<ExperimentOutcome> {
    config.validate()?;
    let settings = &config.experiment;
    let with_audio = settings.stages.contains(&Stage::Env);
    let examples = windows
        .iter()
        .enumerate()
        .map(|(i, w)| Ok(Example { features: WindowFeatures::extract(w, &config.fusion, with_audio)?, window: i }))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut best: Vec<(Stage, Option<(f64, StageModel)>)> = Vec::new();
    for &stage in &settings.stages {
        let data = stage_data(stage, &examples, windows, settings.split_ratio, config.seed)?;
        let mut stage_best: Option<(f64, StageModel)> = None;
        let layouts: Vec<(Option<&Combination>, Option<&DatasetVariant>)> = if stage == Stage::Env {
            vec![(None, None)]
        } else {
            let mut v = Vec::new();
            for &c in &settings.combinations {
                for &d in &settings.variants {
                    v.push((Some(config.fusion.combination(c)?), Some(config.fusion.variant(d)?)));
                }
            }
            v
        };
        for (combination, variant) in layouts {
            for &kind in &settings.kinds {
                for &normalized in settings.normalization.modes() {
                    let index = cells.len();
                    let started = Instant::now();
                    let cell_seed = mix_seed(config.seed, index as u64);
                    let result = run_cell(config, &data, windows, combination, variant, kind, normalized, cell_seed);
                    let wall_time_ms = settings.record_timings.then(|| started.elapsed().as_secs_f64() * 1e3);
                    let outcome = match result {
                        Ok((model, eval, iterations, final_loss)) => {
                            let accuracy = eval.accuracy * 100.0;
                            if stage_best.as_ref().is_none_or(|(a, _)| accuracy > *a) {
                                stage_best = Some((accuracy, model));
                            }
                            CellOutcome::Completed { accuracy, confusion: eval.confusion, iterations, final_loss, wall_time_ms }
                        }
                        Err(e) => CellOutcome::Failed { diagnostic: e.to_string() },
                    };
                    cells.push(CellReport {
                        index,
                        stage,
                        combination: combination.map(|c| c.id),
                        variant: variant.map(|v| v.id),
                        kind,
                        normalized,
                        iteration_budget: config.train.iteration_budget,
                        max_iterations: config.train.max_iterations(),
                        outcome,
                    });
                }
            }
        }
        best.push((stage, stage_best));
    }

    let report = ExperimentReport::assemble(config.seed, dataset_digest(windows), config, cells);
    let mut models: Vec<(Stage, StageModel)> = best.into_iter().filter_map(|(s, b)| b.map(|(_, m)| (s, m))).collect();
    let take = |models: &mut Vec<(Stage, StageModel)>, stage: Stage| {
        models.iter().position(|(s, _)| *s == stage).map(|i| models.remove(i).1)
    };
    let pipeline = take(&mut models, Stage::Adl).map(|adl| PipelineModel {
        adl,
        env: take(&mut models, Stage::Env),
        standing: take(&mut models, Stage::Standing),
        fusion: config.fusion.clone(),
        options: config.pipeline.options,
    });
    Ok(ExperimentOutcome { report, pipeline })
}

/// The hold-out split `run_experiment` uses for `stage`, as positions into
/// `windows`. Windows without a label for the stage are in neither part.
pub fn stage_split(windows: &[SensorWindow], stage: Stage, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let labelled: Vec<usize> = (0..windows.len()).filter(|&i| windows[i].labels.class_index(stage).is_some()).collect();
    if labelled.is_empty() {
        return Err(Error::Config(format!("no window carries a {stage} label")));
    }
    let labels: Vec<usize> = labelled.iter().map(|&i| windows[i].labels.class_index(stage).unwrap()).collect();
    let (train, test) = split_indices(&labels, ratio, mix_seed(seed, u64::MAX - stage.index() as u64))?;
    Ok((train.into_iter().map(|i| labelled[i]).collect(), test.into_iter().map(|i| labelled[i]).collect()))
}

fn stage_data<'a>(
    stage: Stage,
    examples: &'a [Example],
    windows: &[SensorWindow],
    ratio: f64,
    seed: u64,
) -> Result<StageData<'a>> {
    let (train, test) = stage_split(windows, stage, ratio, seed)?;
    let label = |i: &usize| windows[*i].labels.class_index(stage).unwrap();
    Ok(StageData {
        stage,
        train_labels: train.iter().map(label).collect(),
        test_labels: test.iter().map(label).collect(),
        train: train.iter().map(|&i| &examples[i]).collect(),
        test: test.iter().map(|&i| &examples[i]).collect(),
    })
}

fn assemble_all(
    config: &ExperimentConfig,
    examples: &[&Example],
    windows: &[SensorWindow],
    stage: Stage,
    combination: &Combination,
    variant: &DatasetVariant,
) -> Result<Vec<FeatureVector>> {
    let gains = &config.experiment.channel_gains;
    examples
        .iter()
        .map(|e| {
            // Training and evaluation use the ground-truth environment.
            let env = windows[e.window].labels.env.map(EnvInput::Label);
            let mut v = e.features.assemble(stage, combination, variant, env.as_ref())?;
            if !gains.is_empty() {
                for (name, x) in v.names.iter().zip(v.values.iter_mut()) {
                    if let Some(g) = gains.get(name) {
                        *x *= g;
                    }
                }
            }
            Ok(v)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    config: &ExperimentConfig,
    data: &StageData<'_>,
    windows: &[SensorWindow],
    combination: Option<&Combination>,
    variant: Option<&DatasetVariant>,
    kind: ModelKind,
    normalized: bool,
    seed: u64,
) -> Result<(StageModel, Evaluation, usize, f64)> {
    // The environment stage ignores the layout; any configured one will do.
    let combination = combination.unwrap_or(&config.fusion.combinations[0]);
    let variant = variant.unwrap_or(&config.fusion.variants[0]);
    let train = assemble_all(config, &data.train, windows, data.stage, combination, variant)?;
    let test = assemble_all(config, &data.test, windows, data.stage, combination, variant)?;
    let train_config = config.train.train_config(kind, seed);
    let (model, history) = fit_stage(data.stage, kind, combination, variant, normalized, &train, &data.train_labels, &train_config)?;
    let eval = evaluate_net(&model.net, model.normalizer.as_ref(), &test, &data.test_labels)?;
    Ok((model, eval, history.iterations, history.final_loss.objective))
}

/// Trains the pipeline described by `config.pipeline` on every labelled
/// window (no hold-out). The environment stage is skipped when no window
/// has audio, the standing stage when no window has a standing label.
pub fn train_pipeline(config: &ExperimentConfig, windows: &[SensorWindow]) -> Result<PipelineModel> {
    config.validate()?;
    let has_audio = windows.iter().any(|w| w.audio.is_some() && w.labels.env.is_some());
    let features = windows
        .iter()
        .map(|w| WindowFeatures::extract(w, &config.fusion, has_audio))
        .collect::<Result<Vec<_>>>()?;

    let fit = |stage: Stage| -> Result<Option<StageModel>> {
        let choice = config.pipeline.choice(stage);
        let combination = config.fusion.combination(choice.combination)?;
        let variant = config.fusion.variant(choice.variant)?;
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for (w, f) in windows.iter().zip(&features) {
            let Some(y) = w.labels.class_index(stage) else { continue };
            if stage == Stage::Env && f.audio.is_none() {
                continue;
            }
            let env = w.labels.env.map(EnvInput::Label);
            vectors.push(f.assemble(stage, combination, variant, env.as_ref()).map_err(|e| e.in_stage(stage))?);
            labels.push(y);
        }
        if vectors.is_empty() {
            return Ok(None);
        }
        let seed = mix_seed(config.seed, stage.index() as u64);
        let train_config = config.train.train_config(choice.kind, seed);
        let (model, _) = fit_stage(stage, choice.kind, combination, variant, choice.normalize, &vectors, &labels, &train_config)?;
        Ok(Some(model))
    };

    let adl = fit(Stage::Adl)?.ok_or_else(|| Error::Config("no window carries an activity label".into()))?;
    let env = if has_audio { fit(Stage::Env)? } else { None };
    let standing = fit(Stage::Standing)?;
    Ok(PipelineModel { adl, env, standing, fusion: config.fusion.clone(), options: config.pipeline.options })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_six_thousand() {
        let labels: Vec<usize> = (0..6000).map(|i| i % 3).collect();
        let (train, test) = split_indices(&labels, 0.7, 1).unwrap();
        assert_eq!((train.len(), test.len()), (4200, 1800));
        for c in 0..3 {
            assert_eq!(train.iter().filter(|&&i| labels[i] == c).count(), 1400);
            assert_eq!(test.iter().filter(|&&i| labels[i] == c).count(), 600);
        }
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..6000).collect::<Vec<_>>());
        assert_eq!(split_indices(&labels, 0.7, 1).unwrap(), (train, test));
    }

    #[test]
    fn two_per_class_half_split() {
        let labels = [0, 1, 2, 0, 1, 2];
        let (train, test) = split_indices(&labels, 0.5, 9).unwrap();
        assert_eq!((train.len(), test.len()), (3, 3));
        for c in 0..3 {
            assert_eq!(train.iter().filter(|&&i| labels[i] == c).count(), 1);
        }
    }

    #[test]
    fn singleton_class_is_rejected() {
        assert!(matches!(split_indices(&[0, 0, 1], 0.5, 0), Err(Error::Config(_))));
        assert!(matches!(split_indices(&[0, 0], 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn evaluation_counts() {
        let perfect: Vec<(usize, usize)> = (0..9).map(|i| (i % 3, i % 3)).collect();
        let e = evaluate(&perfect, 3).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.confusion, vec![vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3]]);
        let constant: Vec<(usize, usize)> = (0..9).map(|i| (i % 3, 0)).collect();
        let e = evaluate(&constant, 3).unwrap();
        assert!((e.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.confusion.iter().map(|r| r.iter().sum::<u64>()).collect::<Vec<_>>(), vec![3, 3, 3]);
        assert!(evaluate(&[], 3).is_err());
    }

    #[test]
    fn seeds_mix() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
        assert_eq!(mix_seed(5, 7), mix_seed(5, 7));
    }
}
