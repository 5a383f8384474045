//! CLEAR-MOT and identity metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::association::{hungarian, min_cost_assignment};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// One annotated or predicted box. `class_id < 0` means unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedBox {
    pub id: i64,
    pub bbox: BBox,
    pub class_id: i32,
}

/// Boxes per 1-based frame.
pub type FrameBoxes = BTreeMap<usize, Vec<TrackedBox>>;

/// Additive counts from which every reported ratio is derived.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Counts {
    pub gt_boxes: usize,
    pub pred_boxes: usize,
    pub matches: usize,
    pub iou_sum: f64,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub fm: usize,
    pub gt_tracks: usize,
    pub mt: usize,
    pub ml: usize,
    pub idtp: usize,
}

impl Counts {
    pub fn merge(&self, o: &Counts) -> Counts {
        Counts {
            gt_boxes: self.gt_boxes + o.gt_boxes,
            pred_boxes: self.pred_boxes + o.pred_boxes,
            matches: self.matches + o.matches,
            iou_sum: self.iou_sum + o.iou_sum,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            ids: self.ids + o.ids,
            fm: self.fm + o.fm,
            gt_tracks: self.gt_tracks + o.gt_tracks,
            mt: self.mt + o.mt,
            ml: self.ml + o.ml,
            idtp: self.idtp + o.idtp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    pub motp: f64,
    pub idf1: f64,
    pub mt: usize,
    pub ml: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub fm: usize,
    pub counts: Counts,
    pub per_sequence: Vec<(String, EvalReport)>,
}

impl EvalReport {
    pub fn from_counts(c: Counts) -> Self {
        let mota = 100.0 * (1.0 - (c.fp + c.fn_ + c.ids) as f64 / c.gt_boxes.max(1) as f64);
        let motp = if c.matches == 0 { 0.0 } else { 100.0 * c.iou_sum / c.matches as f64 };
        let denom = c.gt_boxes + c.pred_boxes;
        let idf1 = if denom == 0 { 100.0 } else { 100.0 * 2.0 * c.idtp as f64 / denom as f64 };
        Self {
            mota,
            motp,
            idf1,
            mt: c.mt,
            ml: c.ml,
            fp: c.fp,
            fn_: c.fn_,
            ids: c.ids,
            fm: c.fm,
            counts: c,
            per_sequence: Vec::new(),
        }
    }

    /// Sums the counts of named sequence reports and recomputes the ratios.
    pub fn combine(parts: Vec<(String, EvalReport)>) -> Self {
        let total = parts.iter().fold(Counts::default(), |acc, (_, r)| acc.merge(&r.counts));
        Self { per_sequence: parts, ..Self::from_counts(total) }
    }

    /// IDFP and IDFN implied by the counts.
    pub fn idfp(&self) -> usize {
        self.counts.pred_boxes - self.counts.idtp
    }

    pub fn idfn(&self) -> usize {
        self.counts.gt_boxes - self.counts.idtp
    }

    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let r = self;
        for (k, v) in [("mota", r.mota), ("motp", r.motp), ("idf1", r.idf1)] {
            writeln!(s, "{k}={v:.3}").unwrap();
        }
        for (k, v) in [
            ("mt", r.mt),
            ("ml", r.ml),
            ("fp", r.fp),
            ("fn", r.fn_),
            ("ids", r.ids),
            ("fm", r.fm),
            ("gt_boxes", r.counts.gt_boxes),
            ("pred_boxes", r.counts.pred_boxes),
            ("gt_tracks", r.counts.gt_tracks),
        ] {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    pub fn table(&self) -> String {
        let header = ["", "MOTA", "MOTP", "IDF1", "MT", "ML", "FP", "FN", "IDs", "FM"];
        let row = |name: &str, r: &EvalReport| {
            vec![
                name.to_string(),
                format!("{:.1}", r.mota),
                format!("{:.1}", r.motp),
                format!("{:.1}", r.idf1),
                r.mt.to_string(),
                r.ml.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                r.ids.to_string(),
                r.fm.to_string(),
            ]
        };
        let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for (name, r) in &self.per_sequence {
            rows.push(row(name, r));
        }
        rows.push(row("OVERALL", self));
        let widths: Vec<usize> = (0..header.len()).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap()).collect();
        let mut s = String::new();
        for r in rows {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(
                    |(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) },
                )
                .collect();
            writeln!(s, "{}", cells.join("  ")).unwrap();
        }
        s
    }
}

fn check_frames(gt: &FrameBoxes, pred: &FrameBoxes) -> Result<()> {
    let last = gt.keys().next_back().copied().unwrap_or(0);
    if let Some(&f) = pred.keys().find(|&&f| f < 1 || f > last) {
        if pred[&f].is_empty() {
            return Ok(());
        }
        return Err(Error::FrameMismatch(format!("prediction frame {f} outside ground-truth frames 1..={last}")));
    }
    Ok(())
}

/// Splits by class when ground truth carries class ids.
fn by_class(gt: &FrameBoxes, pred: &FrameBoxes) -> Vec<(FrameBoxes, FrameBoxes)> {
    let classes: BTreeSet<i32> = gt.values().flatten().map(|b| b.class_id).filter(|&c| c >= 0).collect();
    if classes.is_empty() {
        return vec![(gt.clone(), pred.clone())];
    }
    let pred_classes: BTreeSet<i32> = pred.values().flatten().map(|b| b.class_id).collect();
    let select = |m: &FrameBoxes, c: i32| -> FrameBoxes {
        m.iter().map(|(&f, v)| (f, v.iter().filter(|b| b.class_id == c).copied().collect())).collect()
    };
    classes.union(&pred_classes).map(|&c| (select(gt, c), select(pred, c))).collect()
}

fn iou_matrix(g: &[TrackedBox], p: &[TrackedBox]) -> DMatrix<f64> {
    DMatrix::from_fn(g.len(), p.len(), |i, j| g[i].bbox.iou(&p[j].bbox))
}

fn clear_single(gt: &FrameBoxes, pred: &FrameBoxes, thr: f64) -> Counts {
    let mut c = Counts::default();
    let mut current: HashMap<i64, i64> = HashMap::new();
    let mut last_pred: HashMap<i64, i64> = HashMap::new();
    // Per gt id: (frames present, frames matched, matched at last presence, ever matched)
    let mut status: BTreeMap<i64, (usize, usize, bool, bool)> = BTreeMap::new();
    let frames: BTreeSet<usize> = gt.keys().chain(pred.keys()).copied().collect();
    let empty = Vec::new();
    for f in frames {
        let g = gt.get(&f).unwrap_or(&empty);
        let p = pred.get(&f).unwrap_or(&empty);
        c.gt_boxes += g.len();
        c.pred_boxes += p.len();
        let iou = iou_matrix(g, p);
        let mut g_used = vec![false; g.len()];
        let mut p_used = vec![false; p.len()];
        let mut pairs = Vec::new();
        for (i, gb) in g.iter().enumerate() {
            if let Some(&pid) = current.get(&gb.id) {
                if let Some(j) = (0..p.len()).find(|&j| !p_used[j] && p[j].id == pid && iou[(i, j)] >= thr) {
                    g_used[i] = true;
                    p_used[j] = true;
                    pairs.push((i, j));
                }
            }
        }
        let rows: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let cols: Vec<usize> = (0..p.len()).filter(|&j| !p_used[j]).collect();
        let cost = DMatrix::from_fn(rows.len(), cols.len(), |r, k| {
            let v = iou[(rows[r], cols[k])];
            if v >= thr {
                1.0 - v
            } else {
                2.0
            }
        });
        for (r, k) in hungarian(&cost, 1.0 - thr + 1e-12).matches {
            let (i, j) = (rows[r], cols[k]);
            if let Some(&prev) = last_pred.get(&g[i].id) {
                if prev != p[j].id {
                    c.ids += 1;
                }
            }
            pairs.push((i, j));
        }
        let mut matched_now = vec![false; g.len()];
        current.clear();
        for &(i, j) in &pairs {
            matched_now[i] = true;
            c.matches += 1;
            c.iou_sum += iou[(i, j)];
            current.insert(g[i].id, p[j].id);
            last_pred.insert(g[i].id, p[j].id);
        }
        for (i, gb) in g.iter().enumerate() {
            let s = status.entry(gb.id).or_insert((0, 0, false, false));
            s.0 += 1;
            if matched_now[i] {
                s.1 += 1;
                if !s.2 && s.3 {
                    c.fm += 1;
                }
                s.3 = true;
            }
            s.2 = matched_now[i];
        }
        c.fn_ += g.len() - pairs.len();
        c.fp += p.len() - pairs.len();
    }
    c.gt_tracks = status.len();
    for &(present, matched, _, _) in status.values() {
        let ratio = matched as f64 / present as f64;
        if ratio >= 0.8 {
            c.mt += 1;
        } else if ratio <= 0.2 {
            c.ml += 1;
        }
    }
    c
}

fn idtp_single(gt: &FrameBoxes, pred: &FrameBoxes, thr: f64) -> usize {
    let mut g_index: BTreeMap<i64, usize> = BTreeMap::new();
    let mut p_index: BTreeMap<i64, usize> = BTreeMap::new();
    for b in gt.values().flatten() {
        let n = g_index.len();
        g_index.entry(b.id).or_insert(n);
    }
    for b in pred.values().flatten() {
        let n = p_index.len();
        p_index.entry(b.id).or_insert(n);
    }
    if g_index.is_empty() || p_index.is_empty() {
        return 0;
    }
    let mut overlap = DMatrix::<f64>::zeros(g_index.len(), p_index.len());
    for (f, g) in gt {
        let Some(p) = pred.get(f) else { continue };
        for gb in g {
            for pb in p {
                if gb.bbox.iou(&pb.bbox) >= thr {
                    overlap[(g_index[&gb.id], p_index[&pb.id])] += 1.0;
                }
            }
        }
    }
    let neg = -overlap.clone();
    min_cost_assignment(&neg).into_iter().map(|(r, c)| overlap[(r, c)] as usize).sum()
}

/// CLEAR-MOT counts and ratios; `idf1` is left at its value for the counts
/// (IDTP = 0) and filled in by [`evaluate`].
pub fn clear_mot(gt: &FrameBoxes, pred: &FrameBoxes, iou_threshold: f64) -> Result<EvalReport> {
    check_frames(gt, pred)?;
    let counts =
        by_class(gt, pred).iter().fold(Counts::default(), |acc, (g, p)| acc.merge(&clear_single(g, p, iou_threshold)));
    Ok(EvalReport::from_counts(counts))
}

/// IDF1 in percent.
pub fn idf1(gt: &FrameBoxes, pred: &FrameBoxes, iou_threshold: f64) -> Result<f64> {
    check_frames(gt, pred)?;
    let (mut idtp, mut total) = (0usize, 0usize);
    for (g, p) in by_class(gt, pred) {
        idtp += idtp_single(&g, &p, iou_threshold);
        total += g.values().map(Vec::len).sum::<usize>() + p.values().map(Vec::len).sum::<usize>();
    }
    Ok(if total == 0 { 100.0 } else { 200.0 * idtp as f64 / total as f64 })
}

/// Full report: CLEAR-MOT plus identity metrics.
pub fn evaluate(gt: &FrameBoxes, pred: &FrameBoxes, iou_threshold: f64) -> Result<EvalReport> {
    check_frames(gt, pred)?;
    let mut counts = Counts::default();
    for (g, p) in by_class(gt, pred) {
        let mut c = clear_single(&g, &p, iou_threshold);
        c.idtp = idtp_single(&g, &p, iou_threshold);
        counts = counts.merge(&c);
    }
    Ok(EvalReport::from_counts(counts))
}
