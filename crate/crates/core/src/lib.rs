//! Recognition of activities of daily living and their environments from
//! smartphone sensors.
//!
//! The pipeline is hierarchical. A first network labels the common activity
//! from motion features, a second labels the acoustic environment from
//! MFCCs, and a third refines `standing` into watching TV, sleeping, or
//! driving using the environment, motion, and GPS distance.

pub mod ann;
pub mod audio;
pub mod dsp;
pub mod error;
pub mod fusion;
pub mod geo;
pub mod harness;
pub mod ingest;
pub mod labels;
pub mod recognizer;

pub use error::{Error, Result, Sensor};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/windows.md")]
    mod windows {}
    #[doc = include_str!("../../../book/src/motion.md")]
    mod motion {}
    #[doc = include_str!("../../../book/src/audio.md")]
    mod audio {}
    #[doc = include_str!("../../../book/src/geo.md")]
    mod geo {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
