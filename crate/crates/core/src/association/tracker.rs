use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::cost::{fuse_costs, hmf_association, id_similarity_cost, GATED_COST};
use super::hungarian::hungarian;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fhe::HomographySource;
use crate::geometry::{BBox, BoxProjectionMode};
use crate::vcil::{refine_features, IdFeatureSet, VcilConfig, VcilWeights};

/// One detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: usize,
    pub bbox: BBox,
    pub confidence: f64,
    pub class_id: i32,
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tentative,
    Confirmed,
    Lost,
    Removed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    pub class_id: i32,
    pub state: TrackState,
    pub last_box: BBox,
    pub last_frame: usize,
    pub last_confidence: f64,
    pub embedding: Option<Vec<f64>>,
    /// Frames since creation.
    pub age: usize,
    /// Consecutive unmatched frames.
    pub misses: usize,
    /// Consecutive matches while tentative.
    pub hits: usize,
    pub history: Vec<(usize, BBox)>,
}

impl Track {
    fn is_live(&self) -> bool {
        self.state != TrackState::Removed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub iou_weight: f64,
    /// Fused-cost cutoff; pairs at or above it never match.
    pub match_threshold: f64,
    pub min_confidence: f64,
    pub confirm_hits: usize,
    pub max_misses: usize,
    pub embedding_momentum: f64,
    pub use_vcil: bool,
    pub hmf_mode: BoxProjectionMode,
    pub vcil: VcilConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_weight: 0.5,
            match_threshold: 0.8,
            min_confidence: 0.3,
            confirm_hits: 2,
            max_misses: 30,
            embedding_momentum: 0.9,
            use_vcil: false,
            hmf_mode: BoxProjectionMode::Polygon,
            vcil: VcilConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("iou_weight", self.iou_weight)?;
        unit("min_confidence", self.min_confidence)?;
        unit("embedding_momentum", self.embedding_momentum)?;
        if !(self.match_threshold > 0.0) || !self.match_threshold.is_finite() {
            return Err(Error::InvalidConfig(format!("match_threshold must be > 0, got {}", self.match_threshold)));
        }
        if self.confirm_hits < 1 {
            return Err(Error::InvalidConfig("confirm_hits must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything carried between frames.
#[derive(Debug, Clone, Default)]
pub struct TrackerState {
    pub tracks: Vec<Track>,
    pub next_id: u64,
    pub frame: Option<usize>,
    prev_features: Option<IdFeatureSet>,
}

impl TrackerState {
    pub fn new() -> Self {
        Self { next_id: 1, ..Default::default() }
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Stateful tracker over one sequence.
#[derive(Debug)]
pub struct Tracker {
    cfg: TrackerConfig,
    state: TrackerState,
    weights: Option<VcilWeights>,
    exec: Execution,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: TrackerState::new(), weights: None, exec: Execution::default() })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    /// Advances to `frame` and returns the confirmed tracks observed in it.
    pub fn step(&mut self, frame: usize, detections: &[Detection], homs: &dyn HomographySource) -> Result<Vec<Track>> {
        if let Some(prev) = self.state.frame {
            if frame <= prev {
                return Err(Error::NonMonotonicFrame { frame, previous: prev });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::FrameMismatch(format!("detection of frame {} passed for frame {frame}", d.frame)));
        }
        let mut dets: Vec<Detection> =
            detections.iter().filter(|d| d.confidence >= self.cfg.min_confidence).cloned().collect();
        self.refine_embeddings(frame, &mut dets, homs)?;

        let live: Vec<usize> = (0..self.state.tracks.len()).filter(|&i| self.state.tracks[i].is_live()).collect();
        let cost = self.association_cost(frame, &live, &dets, homs)?;
        let assignment = hungarian(&cost, self.cfg.match_threshold);

        let momentum = self.cfg.embedding_momentum;
        let mut matched = vec![false; live.len()];
        for &(r, c) in &assignment.matches {
            matched[r] = true;
            let det = &dets[c];
            let t = &mut self.state.tracks[live[r]];
            t.last_box = det.bbox;
            t.last_frame = frame;
            t.last_confidence = det.confidence;
            t.misses = 0;
            t.history.push((frame, det.bbox));
            t.embedding = match (t.embedding.take(), &det.embedding) {
                (Some(old), Some(new)) if old.len() == new.len() => {
                    let mut e: Vec<f64> =
                        old.iter().zip(new).map(|(o, n)| momentum * o + (1.0 - momentum) * n).collect();
                    normalize(&mut e);
                    Some(e)
                }
                (old, new) => new.clone().or(old),
            };
            match t.state {
                TrackState::Tentative => {
                    t.hits += 1;
                    if t.hits >= self.cfg.confirm_hits {
                        t.state = TrackState::Confirmed;
                    }
                }
                TrackState::Lost => t.state = TrackState::Confirmed,
                TrackState::Confirmed | TrackState::Removed => {}
            }
        }
        for (r, &idx) in live.iter().enumerate() {
            if matched[r] {
                continue;
            }
            let t = &mut self.state.tracks[idx];
            t.misses += 1;
            t.state = match t.state {
                // Never confirmed: dropped at its first miss.
                TrackState::Tentative => TrackState::Removed,
                TrackState::Confirmed | TrackState::Lost if t.misses > self.cfg.max_misses => TrackState::Removed,
                TrackState::Confirmed | TrackState::Lost => TrackState::Lost,
                TrackState::Removed => TrackState::Removed,
            };
        }
        for &c in &assignment.unmatched_cols {
            let det = &dets[c];
            let id = self.state.next_id;
            self.state.next_id += 1;
            let state = if self.cfg.confirm_hits <= 1 { TrackState::Confirmed } else { TrackState::Tentative };
            self.state.tracks.push(Track {
                track_id: id,
                class_id: det.class_id,
                state,
                last_box: det.bbox,
                last_frame: frame,
                last_confidence: det.confidence,
                embedding: det.embedding.clone(),
                age: 0,
                misses: 0,
                hits: 1,
                history: vec![(frame, det.bbox)],
            });
        }
        self.state.tracks.retain(Track::is_live);
        for t in &mut self.state.tracks {
            if t.last_frame != frame || t.history.len() > 1 {
                t.age += 1;
            }
        }
        self.state.frame = Some(frame);
        Ok(self
            .state
            .tracks
            .iter()
            .filter(|t| t.state == TrackState::Confirmed && t.last_frame == frame)
            .cloned()
            .collect())
    }

    fn refine_embeddings(&mut self, frame: usize, dets: &mut [Detection], homs: &dyn HomographySource) -> Result<()> {
        let rows: Option<Vec<Vec<f64>>> = dets.iter().map(|d| d.embedding.clone()).collect();
        let current = match rows {
            Some(r) if !r.is_empty() => Some(IdFeatureSet::from_rows(frame, &r)?),
            _ => None,
        };
        if self.cfg.use_vcil {
            if let (Some(prev), Some(cur)) = (&self.state.prev_features, &current) {
                let weights = match &self.weights {
                    Some(w) if w.dim() == cur.dim() => w,
                    _ => self.weights.insert(VcilWeights::seeded(cur.dim(), self.cfg.vcil.seed)?),
                };
                if prev.dim() == cur.dim() {
                    let h_prev_cur = homs.between(prev.frame, frame)?;
                    let refined = refine_features(prev, cur, &h_prev_cur, weights, &self.cfg.vcil)?;
                    for (i, d) in dets.iter_mut().enumerate() {
                        d.embedding = Some(refined.row(i));
                    }
                }
            }
        }
        self.state.prev_features = current;
        Ok(())
    }

    fn association_cost(
        &self,
        frame: usize,
        live: &[usize],
        dets: &[Detection],
        homs: &dyn HomographySource,
    ) -> Result<DMatrix<f64>> {
        let tracks = &self.state.tracks;
        let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
        let mut iou_cost = DMatrix::from_element(live.len(), dets.len(), 1.0);
        let mut gate = DMatrix::from_element(live.len(), dets.len(), false);
        // Tracks grouped by last frame share one homography.
        let mut by_frame: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (r, &idx) in live.iter().enumerate() {
            by_frame.entry(tracks[idx].last_frame).or_default().push(r);
        }
        for (last_frame, rows) in by_frame {
            let h_last_cur = homs.between(last_frame, frame)?;
            let boxes: Vec<BBox> = rows.iter().map(|&r| tracks[live[r]].last_box).collect();
            let part = hmf_association(&boxes, &det_boxes, &h_last_cur, self.cfg.hmf_mode, self.exec)?;
            for (k, &r) in rows.iter().enumerate() {
                iou_cost.set_row(r, &part.cost.row(k));
                gate.set_row(r, &part.gate.row(k));
            }
        }
        let track_emb: Vec<Option<&[f64]>> = live.iter().map(|&i| tracks[i].embedding.as_deref()).collect();
        let det_emb: Vec<Option<&[f64]>> = dets.iter().map(|d| d.embedding.as_deref()).collect();
        let weight = if det_emb.iter().all(Option::is_none) { 1.0 } else { self.cfg.iou_weight };
        let id_cost = id_similarity_cost(&track_emb, &det_emb);
        let mut fused = fuse_costs(&iou_cost, &id_cost, weight, Some(&gate))?;
        for (r, &i) in live.iter().enumerate() {
            for (c, d) in dets.iter().enumerate() {
                if tracks[i].class_id != d.class_id {
                    fused[(r, c)] = GATED_COST;
                }
            }
        }
        Ok(fused)
    }
}

/// Functional form of [`Tracker::step`].
pub fn tracker_step(
    state: TrackerState,
    frame: usize,
    detections: &[Detection],
    homs: &dyn HomographySource,
    cfg: &TrackerConfig,
) -> Result<(TrackerState, Vec<Track>)> {
    let mut tracker = Tracker::new(cfg.clone())?;
    tracker.state = state;
    let out = tracker.step(frame, detections, homs)?;
    Ok((tracker.state, out))
}
