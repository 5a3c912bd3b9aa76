//! Microphone features: window-averaged MFCCs and raw-signal statistics.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::{descriptive_stats, Stats};
use crate::error::{Error, Result, Sensor};
use crate::ingest::SensorWindow;

/// Floor applied to filter energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    /// Seconds.
    pub frame_length: f64,
    /// Seconds.
    pub hop: f64,
    pub n_mel_filters: usize,
    pub n_coefficients: usize,
    pub pre_emphasis: f64,
    pub fmin: f64,
    /// Defaults to half the sample rate.
    pub fmax: Option<f64>,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            frame_length: 0.025,
            hop: 0.010,
            n_mel_filters: 26,
            n_coefficients: 26,
            pre_emphasis: 0.97,
            fmin: 0.0,
            fmax: None,
        }
    }
}

impl MfccConfig {
    pub fn fmax_for(&self, sample_rate: f64) -> f64 {
        self.fmax.unwrap_or(sample_rate / 2.0)
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return bad(format!("sample rate must be positive, got {sample_rate}"));
        }
        if self.n_mel_filters == 0 || self.n_coefficients == 0 || self.n_coefficients > self.n_mel_filters {
            return bad(format!(
                "need 0 < n_coefficients ({}) <= n_mel_filters ({})",
                self.n_coefficients, self.n_mel_filters
            ));
        }
        if !(self.frame_length > 0.0 && self.hop > 0.0 && self.hop <= self.frame_length) {
            return bad(format!("need 0 < hop ({}) <= frame_length ({})", self.hop, self.frame_length));
        }
        let fmax = self.fmax_for(sample_rate);
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= sample_rate / 2.0) {
            return bad(format!("need 0 <= fmin ({}) < fmax ({fmax}) <= {}", self.fmin, sample_rate / 2.0));
        }
        if (self.frame_length * sample_rate).round() < 1.0 || (self.hop * sample_rate).round() < 1.0 {
            return bad("frame or hop shorter than one sample".into());
        }
        Ok(())
    }
}

/// Precomputed MFCC pipeline for one sample rate.
///
/// Chain per frame: pre-emphasis (over the whole clip), Hamming window,
/// power spectrum `|X_k|² / N` with `N` the frame length, triangular mel
/// filters, natural log with floor, orthonormal DCT-II.
pub struct MfccExtractor {
    config: MfccConfig,
    sample_rate: f64,
    frame_samples: usize,
    hop_samples: usize,
    window: Vec<f64>,
    /// `n_mel_filters × (frame_samples / 2 + 1)`.
    filterbank: Vec<Vec<f64>>,
    centers: Vec<f64>,
    /// `n_coefficients × n_mel_filters`.
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(sample_rate: f64, config: MfccConfig) -> Result<MfccExtractor> {
        config.validate(sample_rate)?;
        let frame_samples = (config.frame_length * sample_rate).round() as usize;
        let hop_samples = (config.hop * sample_rate).round() as usize;

        let window = (0..frame_samples)
            .map(|n| {
                if frame_samples == 1 {
                    1.0
                } else {
                    0.54 - 0.46 * (2.0 * PI * n as f64 / (frame_samples - 1) as f64).cos()
                }
            })
            .collect();

        let n_filters = config.n_mel_filters;
        let mel_lo = hz_to_mel(config.fmin);
        let mel_hi = hz_to_mel(config.fmax_for(sample_rate));
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        let n_bins = frame_samples / 2 + 1;
        let filterbank = (0..n_filters)
            .map(|m| {
                let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * sample_rate / frame_samples as f64;
                        if f > lo && f < center {
                            (f - lo) / (center - lo)
                        } else if f >= center && f < hi {
                            (hi - f) / (hi - center)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let centers = edges[1..=n_filters].to_vec();

        let dct = (0..config.n_coefficients)
            .map(|k| {
                let scale = if k == 0 { (1.0 / n_filters as f64).sqrt() } else { (2.0 / n_filters as f64).sqrt() };
                (0..n_filters)
                    .map(|m| scale * (PI * k as f64 * (m as f64 + 0.5) / n_filters as f64).cos())
                    .collect()
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(frame_samples);
        Ok(MfccExtractor { config, sample_rate, frame_samples, hop_samples, window, filterbank, centers, dct, fft })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn frame_samples(&self) -> usize {
        self.frame_samples
    }

    pub fn hop_samples(&self) -> usize {
        self.hop_samples
    }

    /// Center frequency (Hz) of each mel filter.
    pub fn filter_centers(&self) -> &[f64] {
        &self.centers
    }

    /// `floor((len − frame) / hop) + 1`, or 0 when the clip is shorter than a frame.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_samples {
            0
        } else {
            (len - self.frame_samples) / self.hop_samples + 1
        }
    }

    /// Log filterbank energies of every frame.
    pub fn log_mel_frames(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        let frames = self.frame_count(samples.len());
        if frames == 0 {
            return Err(Error::Domain(format!(
                "audio has {} samples, fewer than one frame of {}",
                samples.len(),
                self.frame_samples
            )));
        }
        let emphasized: Vec<f64> = std::iter::once(samples[0])
            .chain(samples.windows(2).map(|w| w[1] - self.config.pre_emphasis * w[0]))
            .collect();

        let n = self.frame_samples;
        let mut buffer = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; n / 2 + 1];
        let mut out = Vec::with_capacity(frames);
        for f in 0..frames {
            let start = f * self.hop_samples;
            for (slot, (x, w)) in buffer.iter_mut().zip(emphasized[start..start + n].iter().zip(&self.window)) {
                *slot = Complex::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buffer, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buffer) {
                *p = c.norm_sqr() / n as f64;
            }
            out.push(
                self.filterbank
                    .iter()
                    .map(|weights| {
                        let e: f64 = weights.iter().zip(&power).map(|(w, p)| w * p).sum();
                        e.max(LOG_FLOOR).ln()
                    })
                    .collect(),
            );
        }
        Ok(out)
    }

    /// Cepstral coefficients of every frame.
    pub fn frames(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .log_mel_frames(samples)?
            .iter()
            .map(|log_e| self.dct.iter().map(|row| row.iter().zip(log_e).map(|(c, e)| c * e).sum()).collect())
            .collect())
    }
}

/// Per-frame MFCCs of a clip.
pub fn mfcc_frames(samples: &[f64], sample_rate: f64, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    MfccExtractor::new(sample_rate, *config)?.frames(samples)
}

/// Window-level microphone features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatures {
    /// Mean of each coefficient over frames.
    pub mfcc: Vec<f64>,
    pub raw_std: f64,
    pub raw_mean: f64,
    pub raw_max: f64,
    pub raw_min: f64,
    pub raw_var: f64,
    pub raw_median: f64,
}

impl AudioFeatures {
    pub const RAW_STAT_NAMES: [&'static str; 6] = ["raw_std", "raw_mean", "raw_max", "raw_min", "raw_var", "raw_median"];

    pub fn raw_stats(&self) -> [f64; 6] {
        [self.raw_std, self.raw_mean, self.raw_max, self.raw_min, self.raw_var, self.raw_median]
    }
}

pub fn audio_features(window: &SensorWindow, config: &MfccConfig) -> Result<AudioFeatures> {
    let clip = window
        .audio
        .as_ref()
        .ok_or(Error::SensorUnavailable { sensor: Sensor::Mic, stage: None })?;
    let frames = mfcc_frames(&clip.samples, clip.sample_rate, config)?;
    let mut mfcc = vec![0.0; config.n_coefficients];
    for frame in &frames {
        for (acc, c) in mfcc.iter_mut().zip(frame) {
            *acc += c;
        }
    }
    for acc in &mut mfcc {
        *acc /= frames.len() as f64;
    }
    let Stats { mean, std, var, max, min, median } = descriptive_stats(&clip.samples)?;
    Ok(AudioFeatures { mfcc, raw_std: std, raw_mean: mean, raw_max: max, raw_min: min, raw_var: var, raw_median: median })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AudioClip;

    #[test]
    fn config_invariants() {
        let ok = MfccConfig::default();
        ok.validate(8000.0).unwrap();
        let bad = [
            MfccConfig { n_coefficients: 27, ..ok },
            MfccConfig { hop: 0.03, ..ok },
            MfccConfig { frame_length: 0.0, ..ok },
            MfccConfig { fmin: 4000.0, ..ok },
            MfccConfig { fmax: Some(5000.0), ..ok },
        ];
        for c in bad {
            assert!(matches!(c.validate(8000.0), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 100.0, 1000.0, 3999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.9855).abs() < 1e-3);
    }

    #[test]
    fn frame_count_arithmetic() {
        let ex = MfccExtractor::new(8000.0, MfccConfig::default()).unwrap();
        assert_eq!((ex.frame_samples(), ex.hop_samples()), (200, 80));
        for len in [200usize, 279, 280, 8000, 40000] {
            let frames = ex.frames(&vec![0.01; len]).unwrap();
            assert_eq!(frames.len(), (len - 200) / 80 + 1);
        }
        assert!(matches!(ex.frames(&[0.0; 199]), Err(Error::Domain(_))));
    }

    #[test]
    fn silence_is_dct_of_floor() {
        let frames = mfcc_frames(&[0.0; 800], 8000.0, &MfccConfig::default()).unwrap();
        let c0 = 26.0 * LOG_FLOOR.ln() / 26f64.sqrt();
        for f in frames {
            assert_eq!(f.len(), 26);
            assert!((f[0] - c0).abs() < 1e-9);
            assert!(f[1..].iter().all(|c| c.abs() < 1e-9));
        }
    }

    #[test]
    fn absent_audio() {
        let w = SensorWindow::empty("w");
        assert!(matches!(
            audio_features(&w, &MfccConfig::default()),
            Err(Error::SensorUnavailable { sensor: Sensor::Mic, .. })
        ));
    }

    #[test]
    fn silence_window_features() {
        let mut w = SensorWindow::empty("w");
        w.audio = Some(AudioClip { samples: vec![0.0; 4000], sample_rate: 8000.0 });
        let f = audio_features(&w, &MfccConfig::default()).unwrap();
        assert_eq!(f.mfcc.len(), 26);
        assert_eq!(f.raw_stats(), [0.0; 6]);
        assert!((f.mfcc[0] - 26f64.sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
        assert_eq!(audio_features(&w, &MfccConfig::default()).unwrap(), f);
    }

    #[test]
    fn trailing_partial_frame_is_ignored() {
        let clip: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5).collect();
        let a = mfcc_frames(&clip[..920], 8000.0, &MfccConfig::default()).unwrap();
        let b = mfcc_frames(&clip[..999], 8000.0, &MfccConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gain_shifts_only_c0() {
        let clip: Vec<f64> = (0..1600).map(|i| 0.3 * (i as f64 * 0.7).sin() + 0.1 * (i as f64 * 2.3).cos()).collect();
        let loud: Vec<f64> = clip.iter().map(|x| 2.0 * x).collect();
        let a = mfcc_frames(&clip, 8000.0, &MfccConfig::default()).unwrap();
        let b = mfcc_frames(&loud, 8000.0, &MfccConfig::default()).unwrap();
        let shift = 26f64.sqrt() * 4f64.ln();
        for (fa, fb) in a.iter().zip(&b) {
            assert!((fb[0] - fa[0] - shift).abs() < 1e-8);
            for k in 1..26 {
                assert!((fb[k] - fa[k]).abs() < 1e-8);
            }
        }
    }
}
