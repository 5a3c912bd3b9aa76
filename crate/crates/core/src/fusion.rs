//! Feature-vector assembly per stage, sensor combination, and dataset
//! variant, plus min-max normalization.

use serde::{Deserialize, Serialize};

use crate::audio::{audio_features, AudioFeatures, MfccConfig};
use crate::dsp::{motion_features, DspConfig, MotionFeatures};
use crate::error::{Error, Result, Sensor};
use crate::geo::{distance_traveled_with, GeoConfig, GeoPoint};
use crate::ingest::{SensorAvailability, SensorWindow};
use crate::labels::{EnvLabel, Stage};

const MOTION_SENSORS: [Sensor; 3] = [Sensor::Accel, Sensor::Magnet, Sensor::Gyro];

/// A building block of a dataset variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    /// The five largest gaps between peaks, per motion sensor.
    PeakGaps,
    /// Mean, std, variance, and median of the peak amplitudes.
    PeakStats,
    /// Six statistics of the filtered signal.
    RawStats,
    /// One-hot of the recognized environment (standing stage only).
    Environment,
    /// GPS distance traveled (standing stage only).
    Distance,
}

/// A cumulative sensor set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combination {
    pub id: u8,
    /// Motion sensors and gps contributing features.
    pub sensors: Vec<Sensor>,
    /// Whether the recognized environment is part of the combination.
    pub environment: bool,
}

impl Combination {
    pub fn defaults() -> Vec<Combination> {
        vec![
            Combination { id: 1, sensors: vec![Sensor::Accel, Sensor::Gps], environment: true },
            Combination { id: 2, sensors: vec![Sensor::Accel, Sensor::Magnet, Sensor::Gps], environment: true },
            Combination { id: 3, sensors: vec![Sensor::Accel, Sensor::Magnet, Sensor::Gyro, Sensor::Gps], environment: true },
        ]
    }

    pub fn includes(&self, sensor: Sensor) -> bool {
        self.sensors.contains(&sensor) || (sensor == Sensor::Mic && self.environment)
    }

    /// Sensors a device needs for this combination; the environment needs the microphone.
    pub fn required(&self) -> SensorAvailability {
        let mut req = SensorAvailability::from_sensors(&self.sensors);
        if self.environment {
            req.mic = true;
        }
        req
    }

    /// Motion sensors in canonical order: accel, magnet, gyro.
    pub fn motion_sensors(&self) -> impl Iterator<Item = Sensor> + '_ {
        MOTION_SENSORS.into_iter().filter(|s| self.sensors.contains(s))
    }
}

/// A named feature recipe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetVariant {
    pub id: u8,
    pub groups: Vec<FeatureGroup>,
}

impl DatasetVariant {
    /// Five nested recipes, each adding one group to the previous.
    pub fn defaults() -> Vec<DatasetVariant> {
        use FeatureGroup::*;
        let order = [PeakGaps, PeakStats, RawStats, Environment, Distance];
        (1..=5).map(|id| DatasetVariant { id, groups: order[..id as usize].to_vec() }).collect()
    }

    pub fn has(&self, group: FeatureGroup) -> bool {
        self.groups.contains(&group)
    }
}

/// Everything that determines how windows become feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub dsp: DspConfig,
    pub mfcc: MfccConfig,
    pub geo: GeoConfig,
    pub combinations: Vec<Combination>,
    pub variants: Vec<DatasetVariant>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            dsp: DspConfig::default(),
            mfcc: MfccConfig::default(),
            geo: GeoConfig::default(),
            combinations: Combination::defaults(),
            variants: DatasetVariant::defaults(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        self.dsp.validate()?;
        if self.combinations.is_empty() || self.variants.is_empty() {
            return Err(Error::Config("fusion needs at least one combination and one variant".into()));
        }
        for c in &self.combinations {
            if !c.sensors.contains(&Sensor::Accel) {
                return Err(Error::Config(format!("combination {} lacks the accelerometer", c.id)));
            }
            if c.sensors.contains(&Sensor::Mic) {
                return Err(Error::Config(format!("combination {}: use `environment` for the microphone", c.id)));
            }
        }
        for v in &self.variants {
            if v.groups.is_empty() {
                return Err(Error::Config(format!("variant {} has no feature group", v.id)));
            }
        }
        Ok(())
    }

    pub fn combination(&self, id: u8) -> Result<&Combination> {
        self.combinations
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::Config(format!("unknown combination {id}")))
    }

    pub fn variant(&self, id: u8) -> Result<&DatasetVariant> {
        self.variants
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| Error::Config(format!("unknown dataset variant {id}")))
    }
}

/// Ordered, named features for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub stage: Stage,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, name: String, value: f64) {
        self.names.push(name);
        self.values.push(value);
    }
}

/// The environment as seen by the standing stage.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvInput {
    /// Hard one-hot of a label.
    Label(EnvLabel),
    /// Class scores passed through unchanged.
    Scores(Vec<f64>),
}

impl EnvInput {
    fn encode(&self) -> Result<Vec<f64>> {
        match self {
            EnvInput::Label(l) => {
                let mut v = vec![0.0; EnvLabel::COUNT];
                v[l.index()] = 1.0;
                Ok(v)
            }
            EnvInput::Scores(s) if s.len() == EnvLabel::COUNT && s.iter().all(|x| x.is_finite()) => Ok(s.clone()),
            EnvInput::Scores(s) => Err(Error::Domain(format!("environment scores need {} finite entries, got {}", EnvLabel::COUNT, s.len()))),
        }
    }
}

/// Every per-sensor feature a window offers, extracted once and assembled
/// into vectors on demand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowFeatures {
    /// Indexed like accel, magnet, gyro.
    pub motion: [Option<MotionFeatures>; 3],
    pub distance: Option<f64>,
    pub audio: Option<AudioFeatures>,
}

impl WindowFeatures {
    /// Extracts features of every sensor present; audio only when `with_audio`.
    pub fn extract(window: &SensorWindow, config: &FusionConfig, with_audio: bool) -> Result<WindowFeatures> {
        let mut out = WindowFeatures::default();
        for (slot, sensor) in out.motion.iter_mut().zip(MOTION_SENSORS) {
            if window.motion(sensor).is_some() {
                *slot = Some(motion_features(window, sensor, &config.dsp)?);
            }
        }
        if let Some(track) = &window.gps_track {
            let points: Vec<GeoPoint> = track.iter().map(GeoPoint::from).collect();
            out.distance = Some(distance_traveled_with(&points, &config.geo));
        }
        if with_audio && window.audio.is_some() {
            out.audio = Some(audio_features(window, &config.mfcc)?);
        }
        Ok(out)
    }

    fn motion_for(&self, sensor: Sensor) -> Result<&MotionFeatures> {
        let i = MOTION_SENSORS.iter().position(|&s| s == sensor).expect("motion sensor");
        self.motion[i].as_ref().ok_or(Error::SensorUnavailable { sensor, stage: None })
    }

    /// Concatenates, in order: environment one-hot, motion features (accel,
    /// magnet, gyro), distance traveled, audio features. The stage decides
    /// which blocks apply; the variant masks the rest.
    pub fn assemble(
        &self,
        stage: Stage,
        combination: &Combination,
        variant: &DatasetVariant,
        env: Option<&EnvInput>,
    ) -> Result<FeatureVector> {
        let mut v = FeatureVector { names: Vec::new(), values: Vec::new(), stage };
        match stage {
            Stage::Env => {
                let audio = self.audio.as_ref().ok_or(Error::SensorUnavailable { sensor: Sensor::Mic, stage: None })?;
                for (k, c) in audio.mfcc.iter().enumerate() {
                    v.push(format!("mic.mfcc_{k:02}"), *c);
                }
                for (name, x) in AudioFeatures::RAW_STAT_NAMES.iter().zip(audio.raw_stats()) {
                    v.push(format!("mic.{name}"), x);
                }
            }
            Stage::Adl | Stage::Standing => {
                let standing = stage == Stage::Standing;
                if standing && combination.environment && variant.has(FeatureGroup::Environment) {
                    let env = env.ok_or_else(|| Error::Domain("standing features need the recognized environment".into()))?;
                    for (label, x) in EnvLabel::ALL.iter().zip(env.encode()?) {
                        v.push(format!("env.{label}"), x);
                    }
                }
                for sensor in combination.motion_sensors() {
                    let f = self.motion_for(sensor)?;
                    if variant.has(FeatureGroup::PeakGaps) {
                        for (name, x) in MotionFeatures::PEAK_GAP_NAMES.iter().zip(f.five_peak_distances) {
                            v.push(format!("{sensor}.{name}"), x);
                        }
                    }
                    if variant.has(FeatureGroup::PeakStats) {
                        for (name, x) in MotionFeatures::PEAK_STAT_NAMES.iter().zip(f.peak_stats()) {
                            v.push(format!("{sensor}.{name}"), x);
                        }
                    }
                    if variant.has(FeatureGroup::RawStats) {
                        for (name, x) in MotionFeatures::RAW_STAT_NAMES.iter().zip(f.raw_stats()) {
                            v.push(format!("{sensor}.{name}"), x);
                        }
                    }
                }
                if standing && combination.includes(Sensor::Gps) && variant.has(FeatureGroup::Distance) {
                    let d = self.distance.ok_or(Error::SensorUnavailable { sensor: Sensor::Gps, stage: None })?;
                    v.push("gps.distance".into(), d);
                }
            }
        }
        if v.is_empty() {
            return Err(Error::Domain(format!(
                "variant {} leaves no features for the {stage} stage",
                variant.id
            )));
        }
        if let Some(i) = v.values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("feature `{}` is not finite", v.names[i])));
        }
        Ok(v)
    }
}

/// Extracts and assembles one vector.
pub fn build_feature_vector(
    window: &SensorWindow,
    stage: Stage,
    combination: &Combination,
    variant: &DatasetVariant,
    env: Option<&EnvInput>,
    config: &FusionConfig,
) -> Result<FeatureVector> {
    WindowFeatures::extract(window, config, stage == Stage::Env)?.assemble(stage, combination, variant, env)
}

/// Per-feature min-max ranges fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// `(x − min) / (max − min)`, or 0 for a constant feature. Values
    /// outside the training range are not clipped.
    pub fn normalize(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.names != self.names {
            return Err(Error::Domain("feature names differ from the fitted normalizer".into()));
        }
        let values = v
            .values
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect();
        Ok(FeatureVector { names: v.names.clone(), values, stage: v.stage })
    }
}

pub fn fit_normalizer(vectors: &[FeatureVector]) -> Result<Normalizer> {
    let first = vectors.first().ok_or_else(|| Error::Domain("cannot fit a normalizer on no vectors".into()))?;
    let mut min = first.values.clone();
    let mut max = first.values.clone();
    for v in &vectors[1..] {
        if v.names != first.names {
            return Err(Error::Domain("training vectors have inconsistent feature names".into()));
        }
        for (i, &x) in v.values.iter().enumerate() {
            min[i] = min[i].min(x);
            max[i] = max[i].max(x);
        }
    }
    Ok(Normalizer { names: first.names.clone(), min, max })
}

pub fn normalize(v: &FeatureVector, normalizer: &Normalizer) -> Result<FeatureVector> {
    normalizer.normalize(v)
}

/// Every configured (combination, variant) pair the device can run, in
/// ascending id order.
pub fn enumerate_runs(
    availability: &SensorAvailability,
    config: &FusionConfig,
) -> Result<Vec<(Combination, DatasetVariant)>> {
    if !availability.accel {
        return Err(Error::UnsupportedDevice("recognition requires an accelerometer".into()));
    }
    let mut combos: Vec<&Combination> = config.combinations.iter().filter(|c| availability.covers(&c.required())).collect();
    combos.sort_by_key(|c| c.id);
    let mut variants: Vec<&DatasetVariant> = config.variants.iter().collect();
    variants.sort_by_key(|v| v.id);
    Ok(combos
        .into_iter()
        .flat_map(|c| variants.iter().map(move |v| (c.clone(), (*v).clone())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synthesize_dataset, SynthSpec};
    use proptest::prelude::*;

    fn standing_window() -> SensorWindow {
        synthesize_dataset(&SynthSpec::standing(3, 4)).unwrap().remove(0)
    }

    #[test]
    fn full_standing_vector_width() {
        let cfg = FusionConfig::default();
        let w = standing_window();
        let env = EnvInput::Label(EnvLabel::Bedroom);
        let v = build_feature_vector(&w, Stage::Standing, cfg.combination(1).unwrap(), cfg.variant(5).unwrap(), Some(&env), &cfg).unwrap();
        assert_eq!(v.len(), 9 + MotionFeatures::WIDTH + 1);
        assert_eq!(v.names[0], "env.bar");
        assert_eq!(v.values[8], 1.0);
        assert_eq!(v.names.last().unwrap(), "gps.distance");
        let combo3 = build_feature_vector(&w, Stage::Standing, cfg.combination(3).unwrap(), cfg.variant(5).unwrap(), Some(&env), &cfg).unwrap();
        assert_eq!(combo3.len(), 9 + 3 * MotionFeatures::WIDTH + 1);
        let mut names = combo3.names.clone();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), combo3.len());
    }

    #[test]
    fn adl_stage_masks_env_and_distance() {
        let cfg = FusionConfig::default();
        let v = build_feature_vector(&standing_window(), Stage::Adl, cfg.combination(1).unwrap(), cfg.variant(5).unwrap(), None, &cfg).unwrap();
        assert_eq!(v.len(), MotionFeatures::WIDTH);
        assert!(v.names.iter().all(|n| n.starts_with("accel.")));
    }

    #[test]
    fn variant_one_is_peak_gaps_only() {
        let cfg = FusionConfig::default();
        let v = build_feature_vector(&standing_window(), Stage::Standing, cfg.combination(2).unwrap(), cfg.variant(1).unwrap(), None, &cfg).unwrap();
        assert_eq!(v.len(), 10);
        assert!(v.names.iter().all(|n| n.contains("peak_gap")));
    }

    #[test]
    fn missing_sensor_and_missing_env() {
        let cfg = FusionConfig::default();
        let mut w = standing_window();
        w.gyro = None;
        let err = build_feature_vector(&w, Stage::Adl, cfg.combination(3).unwrap(), cfg.variant(3).unwrap(), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::SensorUnavailable { sensor: Sensor::Gyro, .. }));
        let err = build_feature_vector(&w, Stage::Standing, cfg.combination(1).unwrap(), cfg.variant(4).unwrap(), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        w.gps_track = None;
        let env = EnvInput::Label(EnvLabel::Gym);
        let err = build_feature_vector(&w, Stage::Standing, cfg.combination(1).unwrap(), cfg.variant(5).unwrap(), Some(&env), &cfg).unwrap_err();
        assert!(matches!(err, Error::SensorUnavailable { sensor: Sensor::Gps, .. }));
        let err = build_feature_vector(&w, Stage::Env, cfg.combination(1).unwrap(), cfg.variant(5).unwrap(), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::SensorUnavailable { sensor: Sensor::Mic, .. }));
    }

    #[test]
    fn env_stage_is_audio() {
        let mut spec = SynthSpec::full(7, 2);
        spec.rates.audio = 2000.0;
        let w = synthesize_dataset(&spec).unwrap().remove(0);
        let cfg = FusionConfig::default();
        let v = build_feature_vector(&w, Stage::Env, cfg.combination(1).unwrap(), cfg.variant(1).unwrap(), None, &cfg).unwrap();
        assert_eq!(v.len(), 26 + 6);
    }

    #[test]
    fn vectors_are_deterministic() {
        let cfg = FusionConfig::default();
        let env = EnvInput::Label(EnvLabel::Street);
        let a = build_feature_vector(&standing_window(), Stage::Standing, cfg.combination(3).unwrap(), cfg.variant(5).unwrap(), Some(&env), &cfg).unwrap();
        let b = build_feature_vector(&standing_window(), Stage::Standing, cfg.combination(3).unwrap(), cfg.variant(5).unwrap(), Some(&env), &cfg).unwrap();
        assert_eq!(a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.names, b.names);
    }

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector { names: (0..values.len()).map(|i| format!("f{i}")).collect(), values: values.to_vec(), stage: Stage::Adl }
    }

    #[test]
    fn normalizer_basics() {
        let n = fit_normalizer(&[fv(&[0.0, 3.0]), fv(&[5.0, 3.0]), fv(&[10.0, 3.0])]).unwrap();
        assert_eq!((n.min.clone(), n.max.clone()), (vec![0.0, 3.0], vec![10.0, 3.0]));
        assert_eq!(n.normalize(&fv(&[5.0, 3.0])).unwrap().values, vec![0.5, 0.0]);
        assert_eq!(n.normalize(&fv(&[20.0, 9.0])).unwrap().values, vec![2.0, 0.0]);
        let single = fit_normalizer(&[fv(&[1.0, -2.0])]).unwrap();
        assert_eq!((single.min.clone(), single.max), (vec![1.0, -2.0], vec![1.0, -2.0]));
    }

    #[test]
    fn normalizer_errors() {
        assert!(matches!(fit_normalizer(&[]), Err(Error::Domain(_))));
        let mut other = fv(&[1.0, 2.0]);
        other.names[1] = "g".into();
        assert!(matches!(fit_normalizer(&[fv(&[0.0, 0.0]), other.clone()]), Err(Error::Domain(_))));
        let n = fit_normalizer(&[fv(&[0.0, 0.0])]).unwrap();
        assert!(matches!(n.normalize(&other), Err(Error::Domain(_))));
    }

    #[test]
    fn runs_by_device() {
        let cfg = FusionConfig::default();
        assert_eq!(enumerate_runs(&SensorAvailability::ALL, &cfg).unwrap().len(), 15);
        let limited = SensorAvailability::from_sensors(&[Sensor::Accel, Sensor::Gps, Sensor::Mic]);
        let runs = enumerate_runs(&limited, &cfg).unwrap();
        assert_eq!(runs.len(), 5);
        assert!(runs.iter().all(|(c, _)| c.id == 1));
        assert_eq!(runs.iter().map(|(_, v)| v.id).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        let no_accel = SensorAvailability { accel: false, ..SensorAvailability::ALL };
        assert!(matches!(enumerate_runs(&no_accel, &cfg), Err(Error::UnsupportedDevice(_))));
    }

    proptest! {
        #[test]
        fn fitted_ranges_match_column_scan(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 4), 1..30)) {
            let vectors: Vec<FeatureVector> = rows.iter().map(|r| fv(r)).collect();
            let n = fit_normalizer(&vectors).unwrap();
            for j in 0..4 {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                prop_assert_eq!(n.min[j], col.iter().cloned().fold(f64::INFINITY, f64::min));
                prop_assert_eq!(n.max[j], col.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            }
            let normalized: Vec<FeatureVector> = vectors.iter().map(|v| n.normalize(v).unwrap()).collect();
            for v in &normalized {
                prop_assert!(v.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
            let refit = fit_normalizer(&normalized).unwrap();
            for j in 0..4 {
                if n.max[j] > n.min[j] {
                    prop_assert_eq!((refit.min[j], refit.max[j]), (0.0, 1.0));
                }
            }
            // Monotone per feature: argmax and argmin survive.
            for j in 0..4 {
                let arg = |vs: &[FeatureVector], pick_max: bool| {
                    let mut best = 0;
                    for (i, v) in vs.iter().enumerate() {
                        let better = if pick_max { v.values[j] > vs[best].values[j] } else { v.values[j] < vs[best].values[j] };
                        if better { best = i; }
                    }
                    best
                };
                if n.max[j] > n.min[j] {
                    prop_assert_eq!(vectors[arg(&vectors, true)].values[j], n.max[j]);
                    prop_assert_eq!(normalized[arg(&vectors, true)].values[j], 1.0);
                    prop_assert_eq!(normalized[arg(&vectors, false)].values[j], 0.0);
                }
            }
        }
    }
}
