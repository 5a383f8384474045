//! Synthetic UAV sequences over a ground plane with exact homographies.

mod camera;
mod scene;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use camera::{plane_homography, CameraPose};
pub use scene::{generate_sequence, GtBox, SequenceBundle, SimCorrespondences};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scenario {
    #[default]
    Hover,
    TurnLeft,
    TurnRight,
    Ascend,
    Descend,
    Linear,
    Mixed,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Hover,
        Scenario::TurnLeft,
        Scenario::TurnRight,
        Scenario::Ascend,
        Scenario::Descend,
        Scenario::Linear,
        Scenario::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hover => "hover",
            Scenario::TurnLeft => "turn_left",
            Scenario::TurnRight => "turn_right",
            Scenario::Ascend => "ascend",
            Scenario::Descend => "descend",
            Scenario::Linear => "linear",
            Scenario::Mixed => "mixed",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario '{s}'")))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that determines a generated sequence. Lengths on the ground
/// are meters, image quantities pixels, rates per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub frames: usize,
    pub objects: usize,
    pub frame_width: f64,
    pub frame_height: f64,
    pub focal: f64,
    pub altitude: f64,
    pub det_noise_sigma: f64,
    pub det_dropout: f64,
    /// Expected false positives per frame (Poisson).
    pub false_positive_rate: f64,
    pub correspondence_count: usize,
    pub correspondence_outlier_rate: f64,
    pub correspondence_noise_sigma: f64,
    pub embedding_dim: usize,
    pub embedding_view_noise: f64,
    pub seed: u64,
    /// Yaw rate of hover and turns, degrees per frame.
    pub turn_rate_deg: f64,
    /// Horizontal image offset of the turn pivot from the principal point.
    pub turn_offset: f64,
    pub climb_rate: f64,
    pub pan_speed: f64,
    pub object_speed: f64,
    pub motion_noise: f64,
    /// Spawn annulus around the rotation pivot, in frame-1 pixels.
    pub spawn_radius_min: f64,
    pub spawn_radius_max: f64,
    /// Keyframe intervals whose correspondence pairs are materialized.
    pub corr_intervals: Vec<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Hover,
            frames: 60,
            objects: 8,
            frame_width: 1000.0,
            frame_height: 1000.0,
            focal: 1000.0,
            altitude: 100.0,
            det_noise_sigma: 0.0,
            det_dropout: 0.0,
            false_positive_rate: 0.0,
            correspondence_count: 200,
            correspondence_outlier_rate: 0.0,
            correspondence_noise_sigma: 0.0,
            embedding_dim: 64,
            embedding_view_noise: 1.0,
            seed: 0,
            turn_rate_deg: 15.0,
            turn_offset: 200.0,
            climb_rate: 1.0,
            pan_speed: 3.0,
            object_speed: 0.15,
            motion_noise: 0.02,
            spawn_radius_min: 150.0,
            spawn_radius_max: 400.0,
            corr_intervals: vec![1, 10],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, p) in
            [("det_dropout", self.det_dropout), ("correspondence_outlier_rate", self.correspondence_outlier_rate)]
        {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        for (name, v) in [
            ("det_noise_sigma", self.det_noise_sigma),
            ("false_positive_rate", self.false_positive_rate),
            ("correspondence_noise_sigma", self.correspondence_noise_sigma),
            ("embedding_view_noise", self.embedding_view_noise),
            ("climb_rate", self.climb_rate),
            ("pan_speed", self.pan_speed),
            ("object_speed", self.object_speed),
            ("motion_noise", self.motion_noise),
            ("turn_offset", self.turn_offset),
            ("spawn_radius_min", self.spawn_radius_min),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("frame_width", self.frame_width),
            ("frame_height", self.frame_height),
            ("focal", self.focal),
            ("altitude", self.altitude),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !self.turn_rate_deg.is_finite() {
            return bad("turn_rate_deg must be finite".into());
        }
        if self.frames < 2 {
            return bad(format!("frames must be >= 2, got {}", self.frames));
        }
        if self.embedding_dim < 4 || !self.embedding_dim.is_multiple_of(4) {
            return bad(format!("embedding_dim must be a positive multiple of 4, got {}", self.embedding_dim));
        }
        if self.correspondence_count < 4 {
            return bad(format!("correspondence_count must be >= 4, got {}", self.correspondence_count));
        }
        if !(self.spawn_radius_max >= self.spawn_radius_min) {
            return bad("spawn_radius_max must be >= spawn_radius_min".into());
        }
        if self.corr_intervals.is_empty() || self.corr_intervals.contains(&0) {
            return bad("corr_intervals must be a non-empty list of intervals >= 1".into());
        }
        if self.scenario == Scenario::Descend
            && self.altitude - self.climb_rate * (self.frames - 1) as f64 <= 0.1 * self.altitude
        {
            return bad("descend trajectory reaches the ground".into());
        }
        Ok(())
    }

    /// Camera pose of 1-based frame `t`.
    pub fn pose(&self, t: usize) -> CameraPose {
        let tau = (t - 1) as f64;
        let (cx, cy) = (self.frame_width / 2.0, self.frame_height / 2.0);
        let base = CameraPose::nadir(0.0, 0.0, self.altitude, self.focal, cx, cy);
        let rate = self.turn_rate_deg.to_radians();
        let metres_per_px = self.altitude / self.focal;
        match self.scenario {
            Scenario::Hover => CameraPose { yaw: rate * tau, ..base },
            Scenario::TurnLeft | Scenario::TurnRight => {
                // Orbit a ground pivot that stays fixed in the image.
                let (side, sign) = if self.scenario == Scenario::TurnLeft { (-1.0, 1.0) } else { (1.0, -1.0) };
                let pivot = nalgebra::Vector2::new(side * self.turn_offset * metres_per_px, 0.0);
                let yaw = sign * rate * tau;
                let rel = nalgebra::Rotation2::new(yaw) * (-pivot);
                let mut pose = CameraPose { yaw, ..base };
                pose.position.x = pivot.x + rel.x;
                pose.position.y = pivot.y + rel.y;
                pose
            }
            Scenario::Ascend => {
                let mut pose = base;
                pose.position.z += self.climb_rate * tau;
                pose
            }
            Scenario::Descend => {
                let mut pose = base;
                pose.position.z -= self.climb_rate * tau;
                pose
            }
            Scenario::Linear => {
                let mut pose = base;
                pose.position.x = self.pan_speed * tau;
                pose
            }
            Scenario::Mixed => {
                // Speed ramps from 0.1 to 0.4 of pan_speed over the sequence.
                let span = (self.frames - 1).max(1) as f64;
                let (v0, v1) = (0.1 * self.pan_speed, 0.4 * self.pan_speed);
                let x = v0 * tau + 0.5 * (v1 - v0) / span * tau * tau;
                let tp = std::f64::consts::TAU;
                let mut pose = CameraPose { yaw: 0.25 * (tp * tau / 120.0).sin(), ..base };
                pose.position.x = x;
                pose.position.z = self.altitude * (1.0 + 0.08 * (tp * tau / 90.0).sin());
                pose
            }
        }
    }

    /// Image point the view rotates about; spawn annuli are centered here.
    pub(crate) fn pivot(&self) -> (f64, f64) {
        let (cx, cy) = (self.frame_width / 2.0, self.frame_height / 2.0);
        match self.scenario {
            Scenario::TurnLeft => (cx - self.turn_offset, cy),
            Scenario::TurnRight => (cx + self.turn_offset, cy),
            _ => (cx, cy),
        }
    }

    /// Union of correspondence pairs needed for every `corr_intervals` entry.
    pub fn required_pairs(&self) -> Result<Vec<(usize, usize)>> {
        let mut pairs = std::collections::BTreeSet::new();
        for &h in &self.corr_intervals {
            pairs.extend(crate::fhe::KeyframeSchedule::new(self.frames, h)?.required_pairs());
        }
        Ok(pairs.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert_eq!("turn-left".parse::<Scenario>().unwrap(), Scenario::TurnLeft);
        assert!("barrel_roll".parse::<Scenario>().is_err());
    }

    #[test]
    fn dominant_motion_matches_name() {
        let cfg = |s| ScenarioConfig { scenario: s, frames: 20, ..Default::default() };
        let d = |s| {
            let c = cfg(s);
            let (a, b) = (c.pose(1), c.pose(20));
            (b.yaw - a.yaw, b.position - a.position)
        };
        let (yaw, dp) = d(Scenario::Hover);
        assert!(yaw > 0.5 && dp.norm() < 1e-9);
        assert!(d(Scenario::TurnLeft).0 > 0.5);
        assert!(d(Scenario::TurnRight).0 < -0.5);
        assert!(d(Scenario::Ascend).1.z > 10.0);
        assert!(d(Scenario::Descend).1.z < -10.0);
        let (yaw, dp) = d(Scenario::Linear);
        assert!(yaw == 0.0 && dp.x > 50.0 && dp.z == 0.0);
    }

    #[test]
    fn turn_pivot_stays_fixed() {
        for s in [Scenario::TurnLeft, Scenario::TurnRight] {
            let c = ScenarioConfig { scenario: s, ..Default::default() };
            let (px, py) = c.pivot();
            let g = c.pose(1).image_to_ground(crate::geometry::Point2::new(px, py)).unwrap();
            for t in [2, 9, 30] {
                let p = c.pose(t).project_ground(g.0, g.1).unwrap();
                assert!((p.x - px).abs() < 1e-9 && (p.y - py).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn validation() {
        assert!(ScenarioConfig::default().validate().is_ok());
        let bad = [
            ScenarioConfig { frames: 1, ..Default::default() },
            ScenarioConfig { det_dropout: 1.5, ..Default::default() },
            ScenarioConfig { embedding_dim: 6, ..Default::default() },
            ScenarioConfig { corr_intervals: vec![], ..Default::default() },
            ScenarioConfig { scenario: Scenario::Descend, climb_rate: 5.0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))), "{c:?}");
        }
    }
}
