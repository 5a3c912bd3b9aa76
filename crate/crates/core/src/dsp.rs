//! Motion and magnetic signal cleaning and the peak/statistical feature set.
//!
//! Each triaxial stream is reduced to its magnitude, smoothed with a
//! single-pole low-pass filter, and summarized by fifteen numbers: the five
//! largest gaps between consecutive maximum peaks, four statistics of the
//! peak amplitudes, and six statistics of the filtered signal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Sensor};
use crate::ingest::{SensorWindow, TriaxialSample};

/// Rate assumed for streams too short to estimate one from timestamps.
const FALLBACK_RATE: f64 = 100.0;

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    pub samples: Vec<f64>,
    pub rate: f64,
}

impl ScalarSeries {
    pub fn new(samples: Vec<f64>, rate: f64) -> ScalarSeries {
        ScalarSeries { samples, rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Strict local maxima of a series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakSet {
    pub indices: Vec<usize>,
    pub amplitudes: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// How the "distance" between consecutive peaks is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakGap {
    /// Time between peaks in seconds.
    #[default]
    Time,
    /// Absolute amplitude difference between peaks.
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    /// Low-pass smoothing factor in (0, 1].
    pub alpha: f64,
    pub peak_gap: PeakGap,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig { alpha: 0.1, peak_gap: PeakGap::Time }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("low-pass alpha must lie in (0, 1], got {alpha}")))
    }
}

/// `y[0] = x[0]`, `y[n] = α x[n] + (1 − α) y[n−1]`.
pub fn low_pass(series: &ScalarSeries, alpha: f64) -> Result<ScalarSeries> {
    check_alpha(alpha)?;
    if series.is_empty() {
        return Err(Error::Domain("cannot filter an empty series".into()));
    }
    if alpha == 1.0 {
        return Ok(series.clone());
    }
    let mut out = Vec::with_capacity(series.len());
    let mut y = series.samples[0];
    out.push(y);
    for &x in &series.samples[1..] {
        // Same recursion written as an increment, which leaves a constant input exactly unchanged.
        y += alpha * (x - y);
        out.push(y);
    }
    Ok(ScalarSeries::new(out, series.rate))
}

/// Euclidean norm of each sample. The rate is estimated from the timestamps.
pub fn magnitude(stream: &[TriaxialSample]) -> Result<ScalarSeries> {
    if stream.is_empty() {
        return Err(Error::Domain("cannot take the magnitude of an empty stream".into()));
    }
    let samples = stream.iter().map(|s| (s.x * s.x + s.y * s.y + s.z * s.z).sqrt()).collect();
    Ok(ScalarSeries::new(samples, estimate_rate(stream)))
}

fn estimate_rate(stream: &[TriaxialSample]) -> f64 {
    match (stream.first(), stream.last()) {
        (Some(first), Some(last)) if stream.len() > 1 && last.t > first.t => (stream.len() - 1) as f64 / (last.t - first.t),
        _ => FALLBACK_RATE,
    }
}

/// Indices `i` with `x[i-1] < x[i] > x[i+1]`. Endpoints and plateaus never qualify.
pub fn detect_max_peaks(series: &ScalarSeries) -> PeakSet {
    let mut peaks = PeakSet::default();
    for (offset, w) in series.samples.windows(3).enumerate() {
        if w[0] < w[1] && w[1] > w[2] {
            peaks.indices.push(offset + 1);
            peaks.amplitudes.push(w[1]);
        }
    }
    peaks
}

/// Five largest time gaps (seconds) between consecutive peaks, descending,
/// zero-padded.
pub fn peak_distance_features(peaks: &PeakSet, rate: f64) -> [f64; 5] {
    let gaps = peaks.indices.windows(2).map(|p| (p[1] - p[0]) as f64 / rate);
    top_five(gaps)
}

/// Five largest absolute amplitude differences between consecutive peaks.
pub fn peak_amplitude_gaps(peaks: &PeakSet) -> [f64; 5] {
    top_five(peaks.amplitudes.windows(2).map(|p| (p[1] - p[0]).abs()))
}

fn top_five(values: impl Iterator<Item = f64>) -> [f64; 5] {
    let mut all: Vec<f64> = values.collect();
    all.sort_by(|a, b| b.total_cmp(a));
    let mut out = [0.0; 5];
    for (slot, v) in out.iter_mut().zip(all) {
        *slot = v;
    }
    out
}

/// Population statistics of a sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub var: f64,
    pub max: f64,
    pub min: f64,
    pub median: f64,
}

/// Mean and variance by Welford's update (variance divides by N); median
/// of a sorted copy, averaging the two middles for even N.
pub fn descriptive_stats(values: &[f64]) -> Result<Stats> {
    if values.is_empty() {
        return Err(Error::Domain("statistics of an empty sequence".into()));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
        max = max.max(x);
        min = min.min(x);
    }
    let var = m2 / values.len() as f64;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { (sorted[mid - 1] + sorted[mid]) / 2.0 };

    Ok(Stats { mean, std: var.sqrt(), var, max, min, median })
}

/// The fifteen motion features of one sensor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionFeatures {
    pub five_peak_distances: [f64; 5],
    pub peak_mean: f64,
    pub peak_std: f64,
    pub peak_var: f64,
    pub peak_median: f64,
    pub raw_std: f64,
    pub raw_mean: f64,
    pub raw_max: f64,
    pub raw_min: f64,
    pub raw_var: f64,
    pub raw_median: f64,
}

impl MotionFeatures {
    pub const PEAK_GAP_NAMES: [&'static str; 5] = ["peak_gap_1", "peak_gap_2", "peak_gap_3", "peak_gap_4", "peak_gap_5"];
    pub const PEAK_STAT_NAMES: [&'static str; 4] = ["peak_mean", "peak_std", "peak_var", "peak_median"];
    pub const RAW_STAT_NAMES: [&'static str; 6] = ["raw_std", "raw_mean", "raw_max", "raw_min", "raw_var", "raw_median"];
    pub const WIDTH: usize = 15;

    pub fn peak_stats(&self) -> [f64; 4] {
        [self.peak_mean, self.peak_std, self.peak_var, self.peak_median]
    }

    pub fn raw_stats(&self) -> [f64; 6] {
        [self.raw_std, self.raw_mean, self.raw_max, self.raw_min, self.raw_var, self.raw_median]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.five_peak_distances.to_vec();
        v.extend(self.peak_stats());
        v.extend(self.raw_stats());
        v
    }
}

/// magnitude → low-pass → peaks and statistics. Windows without peaks get
/// zero peak statistics.
pub fn motion_features(window: &SensorWindow, sensor: Sensor, config: &DspConfig) -> Result<MotionFeatures> {
    let stream = window
        .motion(sensor)
        .ok_or(Error::SensorUnavailable { sensor, stage: None })?;
    let filtered = low_pass(&magnitude(stream)?, config.alpha)?;
    let peaks = detect_max_peaks(&filtered);
    let raw = descriptive_stats(&filtered.samples)?;

    let five_peak_distances = match config.peak_gap {
        PeakGap::Time => peak_distance_features(&peaks, filtered.rate),
        PeakGap::Amplitude => peak_amplitude_gaps(&peaks),
    };
    let peak = if peaks.is_empty() { Stats::default() } else { descriptive_stats(&peaks.amplitudes)? };

    Ok(MotionFeatures {
        five_peak_distances,
        peak_mean: peak.mean,
        peak_std: peak.std,
        peak_var: peak.var,
        peak_median: peak.median,
        raw_std: raw.std,
        raw_mean: raw.mean,
        raw_max: raw.max,
        raw_min: raw.min,
        raw_var: raw.var,
        raw_median: raw.median,
    })
}
