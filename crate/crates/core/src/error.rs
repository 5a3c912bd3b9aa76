use std::fmt;

use serde::{Deserialize, Serialize};

use crate::labels::Stage;

/// A physical sensor on the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensor {
    Accel,
    Magnet,
    Gyro,
    Mic,
    Gps,
}

impl Sensor {
    pub const ALL: [Sensor; 5] = [Sensor::Accel, Sensor::Magnet, Sensor::Gyro, Sensor::Mic, Sensor::Gps];

    pub fn name(self) -> &'static str {
        match self {
            Sensor::Accel => "accel",
            Sensor::Magnet => "magnet",
            Sensor::Gyro => "gyro",
            Sensor::Mic => "mic",
            Sensor::Gps => "gps",
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid window: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{}", sensor_unavailable_message(*.sensor, *.stage))]
    SensorUnavailable { sensor: Sensor, stage: Option<Stage> },

    #[error("unsupported device: {0}")]
    UnsupportedDevice(String),

    #[error("training diverged at iteration {iteration}: loss is not finite")]
    Divergence { iteration: usize },

    #[error("cannot load model: {0}")]
    ModelLoad(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn sensor_unavailable_message(sensor: Sensor, stage: Option<Stage>) -> String {
    match stage {
        Some(stage) => format!("stage {} ({}): {sensor} data unavailable", stage.index(), stage.name()),
        None => format!("{sensor} data unavailable"),
    }
}

impl Error {
    /// Attaches the recognition stage to a sensor-unavailable error.
    pub fn in_stage(self, stage: Stage) -> Error {
        match self {
            Error::SensorUnavailable { sensor, stage: None } => Error::SensorUnavailable { sensor, stage: Some(stage) },
            other => other,
        }
    }

    /// True for errors caused by bad input or configuration rather than by a run going wrong.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Divergence { .. } | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
