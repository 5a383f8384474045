use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{content_lines, read_text, write_text};
use crate::association::TrackerConfig;
use crate::error::{Error, Result};
use crate::fhe::FheParams;
use crate::simulator::ScenarioConfig;

/// Every setting a config file can override.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub fhe: FheParams,
    pub scenario: ScenarioConfig,
    pub eval_iou: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            fhe: FheParams::default(),
            scenario: ScenarioConfig::default(),
            eval_iou: 0.5,
        }
    }
}

/// `(key, description)` for every accepted key.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("iou_weight", "weight of the HMF cost in the fused cost, [0, 1]"),
    ("match_threshold", "fused cost at or above which pairs never match, > 0"),
    ("min_confidence", "detections below this confidence are ignored, [0, 1]"),
    ("confirm_hits", "consecutive matches before a track is emitted, >= 1"),
    ("max_misses", "unmatched frames before a lost track is removed"),
    ("embedding_momentum", "weight of the old embedding in the track update, [0, 1]"),
    ("use_vcil", "refine embeddings with view-centric slot attention, bool"),
    ("hmf_mode", "projected box shape for HMF, polygon | aabb"),
    ("vcil_slots", "number of slots, >= 1"),
    ("vcil_iterations", "attention iterations per frame pair, >= 1"),
    ("vcil_seed", "seed of the slot initialization and weights"),
    ("h", "keyframe interval, >= 1"),
    ("mode", "non-keyframe derivation, lerp | paper_literal"),
    ("ransac_threshold", "inlier symmetric transfer error in pixels, > 0"),
    ("ransac_max_iters", "RANSAC iteration cap, >= 1"),
    ("ransac_seed", "RANSAC base seed"),
    ("ransac_confidence", "early-exit confidence, (0, 1)"),
    ("eval_iou", "IoU threshold of a metric match, (0, 1]"),
    ("scenario", "hover | turn_left | turn_right | ascend | descend | linear | mixed"),
    ("frames", "sequence length, >= 2"),
    ("objects", "number of ground objects"),
    ("frame_width", "image width in pixels"),
    ("frame_height", "image height in pixels"),
    ("focal", "focal length in pixels"),
    ("altitude", "camera height in meters"),
    ("det_noise_sigma", "per-corner detection jitter in pixels"),
    ("det_dropout", "probability a visible object is not detected, [0, 1]"),
    ("false_positive_rate", "expected false detections per frame"),
    ("correspondence_count", "keypoint pairs per frame pair, >= 4"),
    ("correspondence_outlier_rate", "fraction of pairs with a random destination, [0, 1]"),
    ("correspondence_noise_sigma", "keypoint jitter in pixels"),
    ("embedding_dim", "embedding length, multiple of 4"),
    ("embedding_view_noise", "appearance noise scale; grows with yaw away from frame 1"),
    ("seed", "simulator seed"),
    ("turn_rate_deg", "yaw per frame for hover and turns, degrees"),
    ("turn_offset", "image distance of the turn pivot from the center, pixels"),
    ("climb_rate", "altitude change per frame for ascend/descend, meters"),
    ("pan_speed", "camera speed for linear (and scale for mixed), meters per frame"),
    ("object_speed", "maximum object speed, meters per frame"),
    ("motion_noise", "per-frame object position noise, meters"),
    ("spawn_radius_min", "inner spawn radius around the pivot, pixels"),
    ("spawn_radius_max", "outer spawn radius around the pivot, pixels"),
    ("corr_intervals", "comma list of h values whose correspondence pairs are written"),
];

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
}

fn float(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("non-finite value `{v}`"))
    }
}

fn ranged(v: &str, lo: f64, hi: f64) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if (lo..=hi).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} outside [{lo}, {hi}]"))
    }
}

fn positive(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be > 0"))
    }
}

fn non_negative(v: &str) -> std::result::Result<f64, String> {
    ranged(v, 0.0, f64::INFINITY)
}

fn at_least(v: &str, lo: usize) -> std::result::Result<usize, String> {
    let x: usize = num(v)?;
    if x >= lo {
        Ok(x)
    } else {
        Err(format!("{x} must be >= {lo}"))
    }
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got `{v}`")),
    }
}

impl RunConfig {
    /// `Ok(false)` for an unknown key.
    fn set(&mut self, key: &str, v: &str) -> std::result::Result<bool, String> {
        let (t, f, s) = (&mut self.tracker, &mut self.fhe, &mut self.scenario);
        match key {
            "iou_weight" => t.iou_weight = ranged(v, 0.0, 1.0)?,
            "match_threshold" => t.match_threshold = positive(v)?,
            "min_confidence" => t.min_confidence = ranged(v, 0.0, 1.0)?,
            "confirm_hits" => t.confirm_hits = at_least(v, 1)?,
            "max_misses" => t.max_misses = num(v)?,
            "embedding_momentum" => t.embedding_momentum = ranged(v, 0.0, 1.0)?,
            "use_vcil" => t.use_vcil = boolean(v)?,
            "hmf_mode" => t.hmf_mode = v.parse()?,
            "vcil_slots" => t.vcil.n_slots = at_least(v, 1)?,
            "vcil_iterations" => t.vcil.iterations = at_least(v, 1)?,
            "vcil_seed" => t.vcil.seed = num(v)?,
            "h" => f.interval = at_least(v, 1)?,
            "mode" => f.mode = v.parse()?,
            "ransac_threshold" => f.ransac.threshold = positive(v)?,
            "ransac_max_iters" => f.ransac.max_iters = at_least(v, 1)?,
            "ransac_seed" => f.ransac.seed = num(v)?,
            "ransac_confidence" => {
                let c = ranged(v, 0.0, 1.0)?;
                if c <= 0.0 || c >= 1.0 {
                    return Err(format!("{c} must be in (0, 1)"));
                }
                f.ransac.confidence = c;
            }
            "eval_iou" => {
                let x = ranged(v, 0.0, 1.0)?;
                if x <= 0.0 {
                    return Err("must be > 0".into());
                }
                self.eval_iou = x;
            }
            "scenario" => s.scenario = v.parse().map_err(|e: Error| e.to_string())?,
            "frames" => s.frames = at_least(v, 2)?,
            "objects" => s.objects = num(v)?,
            "frame_width" => s.frame_width = positive(v)?,
            "frame_height" => s.frame_height = positive(v)?,
            "focal" => s.focal = positive(v)?,
            "altitude" => s.altitude = positive(v)?,
            "det_noise_sigma" => s.det_noise_sigma = non_negative(v)?,
            "det_dropout" => s.det_dropout = ranged(v, 0.0, 1.0)?,
            "false_positive_rate" => s.false_positive_rate = non_negative(v)?,
            "correspondence_count" => s.correspondence_count = at_least(v, 4)?,
            "correspondence_outlier_rate" => s.correspondence_outlier_rate = ranged(v, 0.0, 1.0)?,
            "correspondence_noise_sigma" => s.correspondence_noise_sigma = non_negative(v)?,
            "embedding_dim" => {
                let d = at_least(v, 4)?;
                if d % 4 != 0 {
                    return Err(format!("{d} is not a multiple of 4"));
                }
                s.embedding_dim = d;
            }
            "embedding_view_noise" => s.embedding_view_noise = non_negative(v)?,
            "seed" => s.seed = num(v)?,
            "turn_rate_deg" => s.turn_rate_deg = float(v)?,
            "turn_offset" => s.turn_offset = non_negative(v)?,
            "climb_rate" => s.climb_rate = non_negative(v)?,
            "pan_speed" => s.pan_speed = non_negative(v)?,
            "object_speed" => s.object_speed = non_negative(v)?,
            "motion_noise" => s.motion_noise = non_negative(v)?,
            "spawn_radius_min" => s.spawn_radius_min = non_negative(v)?,
            "spawn_radius_max" => s.spawn_radius_max = non_negative(v)?,
            "corr_intervals" => {
                s.corr_intervals =
                    v.split(',').map(|x| at_least(x.trim(), 1)).collect::<std::result::Result<_, _>>()?;
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply(&mut self, text: &str, path: &Path) -> Result<()> {
        for (ln, line) in content_lines(text) {
            let line = line.split_once('#').map_or(line, |(a, _)| a).trim();
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse { path: path.into(), line: ln, msg: "expected `key = value`".into() });
            };
            let (key, value) = (key.trim(), value.trim());
            match self.set(key, value) {
                Ok(true) => {}
                Ok(false) => return Err(Error::UnknownKey { path: path.into(), line: ln, key: key.into() }),
                Err(msg) => return Err(Error::TypeError { path: path.into(), line: ln, key: key.into(), msg }),
            }
        }
        self.tracker.validate()?;
        self.scenario.validate()
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply(&read_text(path)?, path)?;
    Ok(cfg)
}

/// Scenario keys in the config format, readable by [`read_config`].
pub fn write_scenario_config(s: &ScenarioConfig, path: &Path) -> Result<()> {
    let mut out = String::from("# simulator scenario\n");
    let intervals: Vec<String> = s.corr_intervals.iter().map(|h| h.to_string()).collect();
    let lines: [(&str, String); 25] = [
        ("scenario", s.scenario.to_string()),
        ("frames", s.frames.to_string()),
        ("objects", s.objects.to_string()),
        ("frame_width", s.frame_width.to_string()),
        ("frame_height", s.frame_height.to_string()),
        ("focal", s.focal.to_string()),
        ("altitude", s.altitude.to_string()),
        ("det_noise_sigma", s.det_noise_sigma.to_string()),
        ("det_dropout", s.det_dropout.to_string()),
        ("false_positive_rate", s.false_positive_rate.to_string()),
        ("correspondence_count", s.correspondence_count.to_string()),
        ("correspondence_outlier_rate", s.correspondence_outlier_rate.to_string()),
        ("correspondence_noise_sigma", s.correspondence_noise_sigma.to_string()),
        ("embedding_dim", s.embedding_dim.to_string()),
        ("embedding_view_noise", s.embedding_view_noise.to_string()),
        ("seed", s.seed.to_string()),
        ("turn_rate_deg", s.turn_rate_deg.to_string()),
        ("turn_offset", s.turn_offset.to_string()),
        ("climb_rate", s.climb_rate.to_string()),
        ("pan_speed", s.pan_speed.to_string()),
        ("object_speed", s.object_speed.to_string()),
        ("motion_noise", s.motion_noise.to_string()),
        ("spawn_radius_min", s.spawn_radius_min.to_string()),
        ("spawn_radius_max", s.spawn_radius_max.to_string()),
        ("corr_intervals", intervals.join(",")),
    ];
    for (k, v) in lines {
        writeln!(out, "{k} = {v}").unwrap();
    }
    write_text(path, &out)
}
