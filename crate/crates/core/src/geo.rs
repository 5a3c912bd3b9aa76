//! Distance traveled within a window, on a spherical Earth.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{check_coordinates, GpsFix};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<GeoPoint> {
        check_coordinates(lat, lon)?;
        Ok(GeoPoint { lat, lon })
    }
}

impl From<&GpsFix> for GeoPoint {
    fn from(fix: &GpsFix) -> GeoPoint {
        GeoPoint { lat: fix.lat, lon: fix.lon }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoConfig {
    /// Steps shorter than this many meters are dropped as receiver noise.
    /// Zero sums every step.
    pub min_step_m: f64,
}

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // Symmetric in (a, b): every term above is even in the differences.
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Sum of haversine distances over consecutive points.
pub fn distance_traveled(track: &[GeoPoint]) -> f64 {
    distance_traveled_with(track, &GeoConfig::default())
}

pub fn distance_traveled_with(track: &[GeoPoint], config: &GeoConfig) -> f64 {
    track
        .windows(2)
        .map(|p| haversine(p[0], p[1]))
        .filter(|&d| d >= config.min_step_m)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(haversine(p(12.5, -7.0), p(12.5, -7.0)), 0.0);
        let degree = EARTH_RADIUS_M * PI / 180.0;
        assert!((haversine(p(0.0, 0.0), p(0.0, 1.0)) - degree).abs() < 1e-6);
        assert!((haversine(p(0.0, 0.0), p(0.0, 1.0)) - 111_194.9).abs() < 0.1);
        assert!((haversine(p(0.0, 0.0), p(0.0, 180.0)) - 20_015_086.8).abs() < 1.0);
    }

    #[test]
    fn short_tracks() {
        assert_eq!(distance_traveled(&[]), 0.0);
        assert_eq!(distance_traveled(&[p(40.0, -8.0)]), 0.0);
    }

    #[test]
    fn out_and_back() {
        let (a, b) = (p(40.28, -7.5), p(40.29, -7.48));
        assert_eq!(distance_traveled(&[a, b, a]), 2.0 * haversine(a, b));
    }

    #[test]
    fn equator_steps() {
        let track: Vec<GeoPoint> = (0..5).map(|i| p(0.0, 0.001 * i as f64)).collect();
        assert!((distance_traveled(&track) - 4.0 * 111.1949).abs() < 0.01);
    }

    #[test]
    fn min_step_gate() {
        let track = [p(0.0, 0.0), p(0.0, 0.000001), p(0.0, 0.001)];
        let gated = distance_traveled_with(&track, &GeoConfig { min_step_m: 1.0 });
        assert!((gated - haversine(track[1], track[2])).abs() < 1e-9);
    }

    #[test]
    fn invalid_point() {
        assert!(GeoPoint::new(-90.1, 0.0).is_err());
    }
}
