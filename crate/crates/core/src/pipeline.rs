//! End-to-end runs: graph estimation, tracking, evaluation and the `h` sweep.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::association::{Detection, Tracker, TrackerConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fhe::{CorrespondenceProvider, FheParams, HomographyGraph, HomographySource, KeyframeSchedule};
use crate::geometry::{grid_points, CorrespondenceSet, Homography};
use crate::metrics::{evaluate, EvalReport, FrameBoxes, TrackedBox};
use crate::simulator::SequenceBundle;

/// Wall-clock milliseconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub homography_ms: f64,
    pub association_ms: f64,
    pub total_ms: f64,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the tracker over frames `1..=frame_count` and collects the emitted
/// confirmed tracks.
pub fn run_tracker(
    frame_count: usize,
    detections: &BTreeMap<usize, Vec<Detection>>,
    homs: &dyn HomographySource,
    cfg: &TrackerConfig,
    exec: Execution,
) -> Result<(FrameBoxes, f64)> {
    let start = Instant::now();
    let mut tracker = Tracker::new(cfg.clone())?.with_execution(exec);
    let mut out = FrameBoxes::new();
    let empty = Vec::new();
    for t in 1..=frame_count {
        let tracks = tracker
            .step(t, detections.get(&t).unwrap_or(&empty), homs)
            .map_err(|e| Error::AtFrame { frame: t, source: Box::new(e) })?;
        out.insert(
            t,
            tracks
                .iter()
                .map(|tr| TrackedBox { id: tr.track_id as i64, bbox: tr.last_box, class_id: tr.class_id })
                .collect(),
        );
    }
    Ok((out, ms(start)))
}

/// Estimates the graph and caches every adjacent pair the tracker queries.
pub fn build_graph(
    frame_count: usize,
    params: &FheParams,
    provider: &dyn CorrespondenceProvider,
    exec: Execution,
) -> Result<(HomographyGraph, f64)> {
    let start = Instant::now();
    let graph = HomographyGraph::estimate_with(frame_count, params, provider, exec)?;
    graph.prepopulate((1..frame_count).map(|t| (t, t + 1)))?;
    Ok((graph, ms(start)))
}

pub fn gt_boxes(bundle: &SequenceBundle) -> FrameBoxes {
    bundle
        .gt
        .iter()
        .map(|(&f, v)| {
            (f, v.iter().map(|g| TrackedBox { id: g.track_id as i64, bbox: g.bbox, class_id: g.class_id }).collect())
        })
        .collect()
}

/// Mean distance between grid points mapped by `a` and by `b` on a
/// `width × height` frame with an `n × n` grid.
pub fn grid_error(a: &Homography, b: &Homography, width: f64, height: f64, n: usize) -> Result<f64> {
    a.mean_transfer_distance(b, &grid_points(width, height, n))
}

/// Mean 5×5-grid error of every derived `H_{t,k1}` against `truth`.
pub fn derived_fidelity(graph: &HomographyGraph, truth: &dyn HomographySource, width: f64, height: f64) -> Result<f64> {
    let entries = graph.derived_entries();
    if entries.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (&(t, k), h) in entries {
        sum += grid_error(h, &truth.between(t, k)?, width, height, 5)?;
    }
    Ok(sum / entries.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub h: usize,
    pub report: EvalReport,
    pub timings: PhaseTimings,
}

impl AblationRow {
    pub const CSV_HEADER: &'static str = "h,MOTA,IDF1,IDs,wall_ms";

    pub fn csv(&self) -> String {
        format!(
            "{},{:.3},{:.3},{},{:.3}",
            self.h, self.report.mota, self.report.idf1, self.report.ids, self.timings.homography_ms
        )
    }
}

/// Builds, tracks and evaluates once per `h`. Correspondences for every
/// needed pair are generated before any clock starts, and each row runs
/// sequentially so the homography timings are comparable.
pub fn ablate_h(
    bundle: &SequenceBundle,
    h_list: &[usize],
    fhe: &FheParams,
    tracker: &TrackerConfig,
    iou_threshold: f64,
) -> Result<Vec<AblationRow>> {
    let n = bundle.frame_count();
    let mut pairs = std::collections::BTreeSet::new();
    for &h in h_list {
        pairs.extend(KeyframeSchedule::new(n, h)?.required_pairs());
    }
    let provider = bundle.correspondence_provider();
    let mut corr: BTreeMap<(usize, usize), CorrespondenceSet> = bundle.correspondences.clone();
    for p in pairs {
        if let std::collections::btree_map::Entry::Vacant(e) = corr.entry(p) {
            e.insert(provider.correspondences(p.0, p.1)?);
        }
    }
    let gt = gt_boxes(bundle);
    h_list
        .iter()
        .map(|&h| {
            let params = FheParams { interval: h, ..*fhe };
            let start = Instant::now();
            let (graph, homography_ms) = build_graph(n, &params, &corr, Execution::Sequential)?;
            let (pred, association_ms) = run_tracker(n, &bundle.detections, &graph, tracker, Execution::Sequential)?;
            let timings = PhaseTimings { homography_ms, association_ms, total_ms: ms(start) };
            Ok(AblationRow { h, report: evaluate(&gt, &pred, iou_threshold)?, timings })
        })
        .collect()
}
