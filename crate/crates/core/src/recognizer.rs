//! The three-stage hierarchy: common activity, then environment, then the
//! standing-activity refinement.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use crate::labels::{AdlLabel, EnvLabel, StandingLabel};

use crate::ann::{self, load_model, save_model, ModelKind, NeuralNet, TrainConfig, TrainHistory, TrainingSet};
use crate::error::{Error, Result, Sensor};
use crate::fusion::{fit_normalizer, Combination, DatasetVariant, EnvInput, FeatureVector, FusionConfig, Normalizer, WindowFeatures};
use crate::ingest::SensorWindow;
use crate::labels::Stage;

/// How the recognized environment reaches the standing stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvPassthrough {
    /// One-hot of the winning environment.
    #[default]
    Label,
    /// The environment stage's full score vector.
    Scores,
}

/// What happens when a standing window lacks GPS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gating {
    /// Skip the standing stage.
    #[default]
    Lenient,
    /// Fail with a sensor-unavailable error naming stage 3.
    Strict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub env_passthrough: EnvPassthrough,
    pub gating: Gating,
}

/// One trained stage: network, optional normalizer, and the feature layout
/// it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct StageModel {
    pub stage: Stage,
    pub kind: ModelKind,
    pub combination: Combination,
    pub variant: DatasetVariant,
    pub feature_names: Vec<String>,
    pub normalizer: Option<Normalizer>,
    pub net: NeuralNet,
}

impl StageModel {
    fn vector(&self, features: &WindowFeatures, env: Option<&EnvInput>) -> Result<FeatureVector> {
        let v = features
            .assemble(self.stage, &self.combination, &self.variant, env)
            .map_err(|e| e.in_stage(self.stage))?;
        if v.names != self.feature_names {
            return Err(Error::Domain(format!("stage {} features do not match the trained layout", self.stage.index())));
        }
        match &self.normalizer {
            Some(n) => n.normalize(&v),
            None => Ok(v),
        }
    }

    /// Class index and scores for pre-extracted window features.
    pub fn predict(&self, features: &WindowFeatures, env: Option<&EnvInput>) -> Result<(usize, Vec<f64>)> {
        let v = self.vector(features, env)?;
        ann::predict(&self.net, &v.values)
    }
}

/// Trains one stage on assembled vectors. The normalizer, when requested,
/// is fitted on these training vectors only.
#[allow(clippy::too_many_arguments)]
pub fn fit_stage(
    stage: Stage,
    kind: ModelKind,
    combination: &Combination,
    variant: &DatasetVariant,
    normalize: bool,
    vectors: &[FeatureVector],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(StageModel, TrainHistory)> {
    let first = vectors.first().ok_or_else(|| Error::Domain("no training vectors".into()))?;
    let normalizer = if normalize { Some(fit_normalizer(vectors)?) } else { None };
    let pairs = vectors
        .iter()
        .zip(labels)
        .map(|(v, &y)| {
            let values = match &normalizer {
                Some(n) => n.normalize(v)?.values,
                None => v.values.clone(),
            };
            Ok((values, y))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = TrainingSet::from_pairs(&pairs)?;
    let net = kind.build(first.len(), stage.class_count(), config.seed)?;
    let (net, history) = ann::train(net, &data, config)?;
    Ok((
        StageModel {
            stage,
            kind,
            combination: combination.clone(),
            variant: variant.clone(),
            feature_names: first.names.clone(),
            normalizer,
            net,
        },
        history,
    ))
}

/// A complete trained hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub adl: StageModel,
    pub env: Option<StageModel>,
    pub standing: Option<StageModel>,
    pub fusion: FusionConfig,
    pub options: PipelineOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome<L> {
    pub label: L,
    pub scores: Vec<f64>,
}

/// Output of [`recognize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityResult {
    pub window_id: String,
    pub adl: StageOutcome<AdlLabel>,
    pub environment: Option<StageOutcome<EnvLabel>>,
    pub standing: Option<StageOutcome<StandingLabel>>,
    /// Combination and variant of the first stage.
    pub combination: u8,
    pub variant: u8,
}

fn label_of<L: Copy>(all: &[L], index: usize) -> L {
    all[index]
}

fn features_for(window: &SensorWindow, model: &PipelineModel, with_audio: bool) -> Result<WindowFeatures> {
    WindowFeatures::extract(window, &model.fusion, with_audio)
}

pub fn recognize_stage1(window: &SensorWindow, model: &PipelineModel) -> Result<(AdlLabel, Vec<f64>)> {
    let features = features_for(window, model, false)?;
    stage1(&features, model)
}

fn stage1(features: &WindowFeatures, model: &PipelineModel) -> Result<(AdlLabel, Vec<f64>)> {
    let (i, scores) = model.adl.predict(features, None)?;
    Ok((label_of(AdlLabel::ALL, i), scores))
}

pub fn recognize_stage2(window: &SensorWindow, model: &PipelineModel) -> Result<(EnvLabel, Vec<f64>)> {
    if window.audio.is_none() {
        return Err(Error::SensorUnavailable { sensor: Sensor::Mic, stage: Some(Stage::Env) });
    }
    let features = features_for(window, model, true)?;
    stage2(&features, model)
}

fn stage2(features: &WindowFeatures, model: &PipelineModel) -> Result<(EnvLabel, Vec<f64>)> {
    let env_model = model
        .env
        .as_ref()
        .ok_or_else(|| Error::Config("pipeline has no environment stage".into()))?;
    let (i, scores) = env_model.predict(features, None)?;
    Ok((label_of(EnvLabel::ALL, i), scores))
}

/// Runs the standing stage for a window already recognized as standing in
/// environment `env`.
pub fn recognize_stage3(window: &SensorWindow, env: EnvLabel, model: &PipelineModel) -> Result<(StandingLabel, Vec<f64>)> {
    if window.gps_track.is_none() {
        return Err(Error::SensorUnavailable { sensor: Sensor::Gps, stage: Some(Stage::Standing) });
    }
    let features = features_for(window, model, false)?;
    stage3(&features, &EnvInput::Label(env), model)
}

fn stage3(features: &WindowFeatures, env: &EnvInput, model: &PipelineModel) -> Result<(StandingLabel, Vec<f64>)> {
    let standing = model
        .standing
        .as_ref()
        .ok_or_else(|| Error::Config("pipeline has no standing stage".into()))?;
    let (i, scores) = standing.predict(features, Some(env))?;
    Ok((label_of(StandingLabel::ALL, i), scores))
}

/// Stage 1 always runs; stage 2 whenever the window has audio; stage 3 only
/// when stage 1 says standing, stage 2 produced an environment, and the
/// window has GPS.
pub fn recognize(window: &SensorWindow, model: &PipelineModel) -> Result<ActivityResult> {
    let has_audio = window.audio.is_some() && model.env.is_some();
    let features = features_for(window, model, has_audio)?;

    let (adl, adl_scores) = stage1(&features, model)?;
    let environment = if has_audio {
        let (label, scores) = stage2(&features, model)?;
        Some(StageOutcome { label, scores })
    } else {
        None
    };

    let mut standing = None;
    if adl == AdlLabel::Standing && model.standing.is_some() {
        if let Some(env) = &environment {
            if window.gps_track.is_some() {
                let input = match model.options.env_passthrough {
                    EnvPassthrough::Label => EnvInput::Label(env.label),
                    EnvPassthrough::Scores => EnvInput::Scores(env.scores.clone()),
                };
                let (label, scores) = stage3(&features, &input, model)?;
                standing = Some(StageOutcome { label, scores });
            } else if model.options.gating == Gating::Strict {
                return Err(Error::SensorUnavailable { sensor: Sensor::Gps, stage: Some(Stage::Standing) });
            }
        }
    }

    Ok(ActivityResult {
        window_id: window.window_id.clone(),
        adl: StageOutcome { label: adl, scores: adl_scores },
        environment,
        standing,
        combination: model.adl.combination.id,
        variant: model.adl.variant.id,
    })
}

pub const BUNDLE_MANIFEST: &str = "manifest.json";
pub const BUNDLE_FUSION: &str = "fusion.toml";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StageEntry {
    stage: Stage,
    model: String,
    kind: ModelKind,
    combination: Combination,
    variant: DatasetVariant,
    feature_names: Vec<String>,
    normalizer: Option<Normalizer>,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    bundle_version: u32,
    fusion: String,
    options: PipelineOptions,
    stages: Vec<StageEntry>,
}

impl PipelineModel {
    fn stages(&self) -> impl Iterator<Item = &StageModel> {
        std::iter::once(&self.adl).chain(self.env.as_ref()).chain(self.standing.as_ref())
    }

    /// Writes one model document per stage, the fusion config, and a manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let fusion = toml::to_string(&self.fusion).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join(BUNDLE_FUSION), fusion)?;
        let mut stages = Vec::new();
        for s in self.stages() {
            let file = format!("{}.model.json", s.stage);
            fs::write(dir.join(&file), save_model(&s.net))?;
            stages.push(StageEntry {
                stage: s.stage,
                model: file,
                kind: s.kind,
                combination: s.combination.clone(),
                variant: s.variant.clone(),
                feature_names: s.feature_names.clone(),
                normalizer: s.normalizer.clone(),
            });
        }
        let manifest = BundleManifest { bundle_version: BUNDLE_VERSION, fusion: BUNDLE_FUSION.into(), options: self.options, stages };
        fs::write(dir.join(BUNDLE_MANIFEST), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<PipelineModel> {
        let manifest: BundleManifest = serde_json::from_str(&fs::read_to_string(dir.join(BUNDLE_MANIFEST))?)
            .map_err(|e| Error::ModelLoad(format!("bundle manifest: {e}")))?;
        if manifest.bundle_version != BUNDLE_VERSION {
            return Err(Error::ModelLoad(format!("bundle version {} is not supported", manifest.bundle_version)));
        }
        let fusion: FusionConfig = toml::from_str(&fs::read_to_string(dir.join(&manifest.fusion))?)
            .map_err(|e| Error::Config(format!("bundle fusion config: {e}")))?;
        fusion.validate()?;
        let mut adl = None;
        let mut env = None;
        let mut standing = None;
        for entry in manifest.stages {
            let net = load_model(&fs::read_to_string(dir.join(&entry.model))?)?;
            if net.topology.inputs() != entry.feature_names.len() || net.topology.outputs() != entry.stage.class_count() {
                return Err(Error::ModelLoad(format!("stage {} network shape does not match its wiring", entry.stage)));
            }
            if let Some(n) = &entry.normalizer {
                if n.names != entry.feature_names {
                    return Err(Error::ModelLoad(format!("stage {} normalizer does not match its features", entry.stage)));
                }
            }
            let model = StageModel {
                stage: entry.stage,
                kind: entry.kind,
                combination: entry.combination,
                variant: entry.variant,
                feature_names: entry.feature_names,
                normalizer: entry.normalizer,
                net,
            };
            let slot = match entry.stage {
                Stage::Adl => &mut adl,
                Stage::Env => &mut env,
                Stage::Standing => &mut standing,
            };
            if slot.replace(model).is_some() {
                return Err(Error::ModelLoad(format!("stage {} appears twice", entry.stage)));
            }
        }
        let adl = adl.ok_or_else(|| Error::ModelLoad("bundle lacks the activity stage".into()))?;
        Ok(PipelineModel { adl, env, standing, fusion, options: manifest.options })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{load_windows, train_pipeline, ExperimentConfig, SynthPreset};

    fn small_pipeline() -> (PipelineModel, Vec<SensorWindow>) {
        let mut config = ExperimentConfig::default();
        config.synth.preset = SynthPreset::Full;
        config.synth.count = 28;
        config.train.iters_scale = 2e-4;
        let windows = load_windows(&config).unwrap();
        (train_pipeline(&config, &windows).unwrap(), windows)
    }

    #[test]
    fn missing_sensors_name_their_stage() {
        let (model, windows) = small_pipeline();
        let mut w = windows[0].clone();
        w.audio = None;
        w.gps_track = None;
        let err = recognize_stage2(&w, &model).unwrap_err();
        assert!(matches!(err, Error::SensorUnavailable { sensor: Sensor::Mic, stage: Some(Stage::Env) }));
        let err = recognize_stage3(&w, EnvLabel::Bedroom, &model).unwrap_err();
        assert!(matches!(err, Error::SensorUnavailable { sensor: Sensor::Gps, stage: Some(Stage::Standing) }));
        let r = recognize(&w, &model).unwrap();
        assert!(r.environment.is_none() && r.standing.is_none());
        assert_eq!(r.adl.scores.len(), 5);
    }

    #[test]
    fn strict_gating_rejects_standing_without_gps() {
        let (mut model, windows) = small_pipeline();
        model.options.gating = Gating::Strict;
        let mut seen = false;
        for w in &windows {
            let mut w = w.clone();
            w.gps_track = None;
            let (adl, _) = recognize_stage1(&w, &model).unwrap();
            let r = recognize(&w, &model);
            if adl == AdlLabel::Standing {
                seen = true;
                assert!(matches!(r, Err(Error::SensorUnavailable { stage: Some(Stage::Standing), .. })));
            } else {
                assert!(r.unwrap().standing.is_none());
            }
        }
        assert!(seen, "no window was recognized as standing");
    }

    #[test]
    fn bundle_round_trip() {
        let (model, windows) = small_pipeline();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let back = PipelineModel::load(dir.path()).unwrap();
        assert_eq!(back, model);
        for w in &windows {
            assert_eq!(recognize(w, &back).unwrap(), recognize(w, &model).unwrap());
        }
    }

    #[test]
    fn missing_activity_stage_fails_to_load() {
        let (model, _) = small_pipeline();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        fs::remove_file(dir.path().join("adl.model.json")).unwrap();
        assert!(matches!(PipelineModel::load(dir.path()), Err(Error::Io(_))));
        let manifest = fs::read_to_string(dir.path().join(BUNDLE_MANIFEST)).unwrap();
        fs::write(dir.path().join(BUNDLE_MANIFEST), manifest.replace("\"bundle_version\": 1", "\"bundle_version\": 9")).unwrap();
        assert!(matches!(PipelineModel::load(dir.path()), Err(Error::ModelLoad(_))));
    }
}
