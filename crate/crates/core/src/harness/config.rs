//! The TOML configuration file shared by every CLI command.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [synth]
//! preset = "full"        # or "standing"
//! count = 700
//!
//! [synth.rates]
//! motion = 100.0
//! audio = 8000.0
//! gps = 1.0
//!
//! [fusion.dsp]
//! alpha = 0.1
//!
//! [train]
//! learning_rate = 0.1
//! iteration_budget = 1000000
//! iters_scale = 0.01
//!
//! [experiment]
//! split_ratio = 0.7
//! stages = ["standing"]
//! combinations = [1, 2, 3]
//! variants = [1, 2, 3, 4, 5]
//! kinds = ["MLP", "FNN", "DNN"]
//! normalization = "both"
//!
//! [pipeline.adl]
//! kind = "DNN"
//! normalize = true
//! ```
//!
//! Every section and key is optional; omitted values take their defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ann::{ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::ingest::{SamplingRates, SynthSpec, NOMINAL_DURATION};
use crate::labels::Stage;
use crate::recognizer::PipelineOptions;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthPreset {
    /// Watching TV, sleeping, driving; no microphone.
    Standing,
    /// Every activity and environment with all sensors.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSettings {
    pub preset: SynthPreset,
    pub count: usize,
    pub rates: SamplingRates,
    pub duration: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings { preset: SynthPreset::Standing, count: 6000, rates: SamplingRates::default(), duration: NOMINAL_DURATION }
    }
}

impl SynthSettings {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        let base = match self.preset {
            SynthPreset::Standing => SynthSpec::standing(self.count, seed),
            SynthPreset::Full => SynthSpec::full(self.count, seed),
        };
        SynthSpec { rates: self.rates, duration: self.duration, ..base }
    }
}

/// Training hyperparameters shared by every grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub target_error: f64,
    /// Overrides the per-kind default when set.
    pub l2_lambda: Option<f64>,
    /// Maximum iterations at full scale.
    pub iteration_budget: u64,
    /// Multiplier applied to the budget for desk-scale runs.
    pub iters_scale: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainSettings {
            learning_rate: base.learning_rate,
            target_error: base.target_error,
            l2_lambda: None,
            iteration_budget: 1_000_000,
            iters_scale: 0.01,
        }
    }
}

impl TrainSettings {
    pub fn max_iterations(&self) -> usize {
        ((self.iteration_budget as f64 * self.iters_scale).round() as usize).max(1)
    }

    pub fn train_config(&self, kind: ModelKind, seed: u64) -> TrainConfig {
        TrainConfig {
            max_iterations: self.max_iterations(),
            learning_rate: self.learning_rate,
            l2_lambda: self.l2_lambda.unwrap_or(kind.default_l2()),
            target_error: self.target_error,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.iters_scale.is_finite() && self.iters_scale > 0.0) {
            return Err(Error::Config(format!("iters_scale must be positive, got {}", self.iters_scale)));
        }
        self.train_config(ModelKind::Mlp, 0).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    On,
    Off,
    Both,
}

impl Normalization {
    pub fn modes(self) -> &'static [bool] {
        match self {
            Normalization::On => &[true],
            Normalization::Off => &[false],
            Normalization::Both => &[false, true],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSettings {
    /// Dataset directory; when absent the `[synth]` section generates one.
    pub data: Option<PathBuf>,
    pub split_ratio: f64,
    pub stages: Vec<Stage>,
    pub combinations: Vec<u8>,
    pub variants: Vec<u8>,
    pub kinds: Vec<ModelKind>,
    pub normalization: Normalization,
    /// Record wall-clock time per cell. Off by default so reports are
    /// byte-reproducible.
    pub record_timings: bool,
    /// Multiplies named raw features before normalization, emulating sensors
    /// reporting in mismatched units.
    pub channel_gains: BTreeMap<String, f64>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            data: None,
            split_ratio: 0.7,
            stages: vec![Stage::Standing],
            combinations: vec![1, 2, 3],
            variants: vec![1, 2, 3, 4, 5],
            kinds: ModelKind::ALL.to_vec(),
            normalization: Normalization::Both,
            record_timings: false,
            channel_gains: BTreeMap::new(),
        }
    }
}

/// Kind, normalization, and feature layout of one pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageChoice {
    pub kind: ModelKind,
    pub normalize: bool,
    #[serde(default = "default_combination")]
    pub combination: u8,
    #[serde(default = "default_variant")]
    pub variant: u8,
}

fn default_combination() -> u8 {
    3
}

fn default_variant() -> u8 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    pub adl: StageChoice,
    pub env: StageChoice,
    pub standing: StageChoice,
    pub options: PipelineOptions,
}

impl Default for PipelineSettings {
    /// DNN on normalized data for activities and standing refinements, FNN
    /// on raw data for environments.
    fn default() -> Self {
        let dnn = StageChoice { kind: ModelKind::Dnn, normalize: true, combination: 3, variant: 5 };
        PipelineSettings {
            adl: dnn,
            env: StageChoice { kind: ModelKind::Fnn, normalize: false, combination: 3, variant: 5 },
            standing: dnn,
            options: PipelineOptions::default(),
        }
    }
}

impl PipelineSettings {
    pub fn choice(&self, stage: Stage) -> &StageChoice {
        match stage {
            Stage::Adl => &self.adl,
            Stage::Env => &self.env,
            Stage::Standing => &self.standing,
        }
    }
}

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub synth: SynthSettings,
    pub fusion: FusionConfig,
    pub train: TrainSettings,
    pub experiment: ExperimentSettings,
    pub pipeline: PipelineSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed: 7,
            synth: SynthSettings::default(),
            fusion: FusionConfig::default(),
            train: TrainSettings::default(),
            experiment: ExperimentSettings::default(),
            pipeline: PipelineSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version)));
        }
        self.fusion.validate()?;
        self.train.validate()?;
        let e = &self.experiment;
        if !(e.split_ratio > 0.0 && e.split_ratio < 1.0) {
            return Err(Error::Config(format!("split ratio must lie in (0, 1), got {}", e.split_ratio)));
        }
        if e.stages.is_empty() || e.combinations.is_empty() || e.variants.is_empty() || e.kinds.is_empty() {
            return Err(Error::Config("every experiment grid axis needs at least one value".into()));
        }
        for &c in &e.combinations {
            self.fusion.combination(c)?;
        }
        for &v in &e.variants {
            self.fusion.variant(v)?;
        }
        for (name, gain) in &e.channel_gains {
            if !(gain.is_finite() && *gain > 0.0) {
                return Err(Error::Config(format!("gain for `{name}` must be positive")));
            }
        }
        for stage in Stage::ALL {
            let choice = self.pipeline.choice(stage);
            self.fusion.combination(choice.combination)?;
            self.fusion.variant(choice.variant)?;
        }
        Ok(())
    }
}
