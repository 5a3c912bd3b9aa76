//! Sensor data model, the window file format, dataset directories, and the
//! synthetic generator used in place of recorded data.

mod dataset;
mod format;
mod synth;

pub use dataset::{load_dataset, write_dataset, ManifestEntry, MANIFEST_FILE};
pub use format::{parse_window, serialize_window};
pub use synth::{
    synthesize_dataset, AudioRecipe, ClassRecipe, GpsRecipe, MotionRecipe, SamplingRates, SynthSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Sensor};
use crate::labels::Labels;

/// Nominal acquisition burst length in seconds.
pub const NOMINAL_DURATION: f64 = 5.0;

/// One triaxial reading (accelerometer m/s², magnetometer µT, gyroscope rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriaxialSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
}

/// Microphone samples in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

/// One acquisition burst. Absent sensors are `None`, never zero-filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorWindow {
    pub window_id: String,
    pub accel: Option<Vec<TriaxialSample>>,
    pub magnet: Option<Vec<TriaxialSample>>,
    pub gyro: Option<Vec<TriaxialSample>>,
    pub audio: Option<AudioClip>,
    pub gps_track: Option<Vec<GpsFix>>,
    pub duration: f64,
    pub labels: Labels,
}

impl SensorWindow {
    pub fn empty(window_id: impl Into<String>) -> SensorWindow {
        SensorWindow {
            window_id: window_id.into(),
            accel: None,
            magnet: None,
            gyro: None,
            audio: None,
            gps_track: None,
            duration: NOMINAL_DURATION,
            labels: Labels::default(),
        }
    }

    /// Triaxial stream for a motion sensor, `None` for mic and gps.
    pub fn motion(&self, sensor: Sensor) -> Option<&[TriaxialSample]> {
        match sensor {
            Sensor::Accel => self.accel.as_deref(),
            Sensor::Magnet => self.magnet.as_deref(),
            Sensor::Gyro => self.gyro.as_deref(),
            Sensor::Mic | Sensor::Gps => None,
        }
    }

    pub fn availability(&self) -> SensorAvailability {
        SensorAvailability {
            accel: self.accel.is_some(),
            magnet: self.magnet.is_some(),
            gyro: self.gyro.is_some(),
            mic: self.audio.is_some(),
            gps: self.gps_track.is_some(),
        }
    }

    /// Checks every structural invariant of a window.
    pub fn validate(&self) -> Result<()> {
        if self.availability().is_empty() {
            return Err(Error::Validation(format!("window `{}` has no sensor stream", self.window_id)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Validation(format!("duration must be positive, got {}", self.duration)));
        }
        for sensor in [Sensor::Accel, Sensor::Magnet, Sensor::Gyro] {
            if let Some(stream) = self.motion(sensor) {
                check_increasing(sensor, stream.iter().map(|s| s.t))?;
            }
        }
        if let Some(track) = &self.gps_track {
            check_increasing(Sensor::Gps, track.iter().map(|f| f.t))?;
            for fix in track {
                check_coordinates(fix.lat, fix.lon)?;
            }
        }
        if let Some(audio) = &self.audio {
            if !(audio.sample_rate.is_finite() && audio.sample_rate > 0.0) {
                return Err(Error::Validation(format!("audio sample rate must be positive, got {}", audio.sample_rate)));
            }
        }
        Ok(())
    }
}

fn check_increasing(sensor: Sensor, times: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in times.enumerate() {
        if t <= prev {
            return Err(Error::Validation(format!(
                "{sensor} timestamps not strictly increasing at sample {i} ({t} after {prev})"
            )));
        }
        prev = t;
    }
    Ok(())
}

pub(crate) fn check_coordinates(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::Validation(format!("latitude {lat} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::Validation(format!("longitude {lon} outside [-180, 180]")));
    }
    Ok(())
}

/// Which sensors a device (or a window) provides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorAvailability {
    pub accel: bool,
    pub magnet: bool,
    pub gyro: bool,
    pub mic: bool,
    pub gps: bool,
}

impl SensorAvailability {
    pub const ALL: SensorAvailability = SensorAvailability { accel: true, magnet: true, gyro: true, mic: true, gps: true };

    pub fn from_sensors(sensors: &[Sensor]) -> SensorAvailability {
        let mut out = SensorAvailability::default();
        for &s in sensors {
            out.set(s, true);
        }
        out
    }

    pub fn has(&self, sensor: Sensor) -> bool {
        match sensor {
            Sensor::Accel => self.accel,
            Sensor::Magnet => self.magnet,
            Sensor::Gyro => self.gyro,
            Sensor::Mic => self.mic,
            Sensor::Gps => self.gps,
        }
    }

    pub fn set(&mut self, sensor: Sensor, on: bool) {
        match sensor {
            Sensor::Accel => self.accel = on,
            Sensor::Magnet => self.magnet = on,
            Sensor::Gyro => self.gyro = on,
            Sensor::Mic => self.mic = on,
            Sensor::Gps => self.gps = on,
        }
    }

    pub fn is_empty(&self) -> bool {
        Sensor::ALL.iter().all(|&s| !self.has(s))
    }

    /// True when every sensor in `other` is also available here.
    pub fn covers(&self, other: &SensorAvailability) -> bool {
        Sensor::ALL.iter().all(|&s| !other.has(s) || self.has(s))
    }

    pub fn sensors(&self) -> Vec<Sensor> {
        Sensor::ALL.iter().copied().filter(|&s| self.has(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accel_only() -> SensorWindow {
        let mut w = SensorWindow::empty("w");
        w.accel = Some(vec![
            TriaxialSample { t: 0.0, x: 0.0, y: 0.0, z: 9.8 },
            TriaxialSample { t: 0.01, x: 0.1, y: 0.0, z: 9.8 },
        ]);
        w
    }

    #[test]
    fn window_needs_a_stream() {
        let err = SensorWindow::empty("nothing").validate().unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        accel_only().validate().unwrap();
    }

    #[test]
    fn repeated_timestamp_is_rejected() {
        let mut w = accel_only();
        w.accel.as_mut().unwrap()[1].t = 0.0;
        assert!(matches!(w.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn coordinate_bounds_are_inclusive() {
        check_coordinates(90.0, -180.0).unwrap();
        check_coordinates(-90.0, 180.0).unwrap();
        assert!(check_coordinates(90.5, 0.0).is_err());
        assert!(check_coordinates(0.0, 180.01).is_err());
    }

    #[test]
    fn zero_audio_rate_is_rejected() {
        let mut w = accel_only();
        w.audio = Some(AudioClip { samples: vec![0.0; 4], sample_rate: 0.0 });
        assert!(matches!(w.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn availability_covers() {
        let full = SensorAvailability::ALL;
        let some = SensorAvailability::from_sensors(&[Sensor::Accel, Sensor::Gps]);
        assert!(full.covers(&some));
        assert!(!some.covers(&full));
        assert_eq!(some.sensors(), vec![Sensor::Accel, Sensor::Gps]);
    }
}
