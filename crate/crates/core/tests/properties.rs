use homview_core::association::{hungarian, min_cost_assignment, Tracker, TrackerConfig};
use homview_core::fhe::{FheParams, HomographyGraph, HomographySource};
use homview_core::geometry::{
    estimate_homography_dlt, estimate_homography_ransac, polygon_iou, project_box, BBox, BoxProjectionMode,
    CorrespondenceSet, Homography, Point2, ProjectedBox, RansacParams,
};
use homview_core::io;
use homview_core::metrics::{clear_mot, evaluate, idf1, FrameBoxes, TrackedBox};
use homview_core::simulator::{generate_sequence, Scenario, ScenarioConfig};
use homview_core::vcil::{
    hsa_forward, init_slots, softmax_rows, update_id_features, IdFeatureSet, SlotBank, VcilWeights,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn near_affine() -> impl Strategy<Value = Homography> {
    (
        (0.7f64..1.3, -0.3f64..0.3, -50.0f64..50.0),
        (-0.3f64..0.3, 0.7f64..1.3, -50.0f64..50.0),
        (-9e-4f64..9e-4, -9e-4f64..9e-4),
    )
        .prop_filter_map("invertible", |((a, b, c), (d, e, f), (g, h))| {
            let m = Homography::from_row_major([a, b, c, d, e, f, g, h, 1.0]).ok()?;
            (m.determinant().abs() > 0.2).then_some(m)
        })
}

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0f64..300.0, 0.0f64..300.0, 5.0f64..80.0, 5.0f64..80.0).prop_map(|(l, t, w, h)| BBox::new(l, t, w, h).unwrap())
}

fn brute_force(cost: &DMatrix<f64>) -> f64 {
    fn rec(cost: &DMatrix<f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.nrows() {
            *best = best.min(acc);
            return;
        }
        for c in 0..cost.ncols() {
            if !used[c] {
                used[c] = true;
                rec(cost, row + 1, used, acc + cost[(row, c)], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.ncols()], 0.0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projected_box_self_iou_is_one(h in near_affine(), b in bbox()) {
        let p = project_box(&h, &b, BoxProjectionMode::Polygon).unwrap();
        let ProjectedBox::Quad(q) = p else { panic!("polygon mode") };
        prop_assert!((polygon_iou(&q, &q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_iou_is_symmetric(h1 in near_affine(), h2 in near_affine(), a in bbox(), b in bbox()) {
        let qa = match project_box(&h1, &a, BoxProjectionMode::Polygon).unwrap() { ProjectedBox::Quad(q) => q, _ => unreachable!() };
        let qb = match project_box(&h2, &b, BoxProjectionMode::Polygon).unwrap() { ProjectedBox::Quad(q) => q, _ => unreachable!() };
        prop_assert!((polygon_iou(&qa, &qb) - polygon_iou(&qb, &qa)).abs() < 1e-12);
        let v = polygon_iou(&qa, &qb);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn dlt_round_trip(h in near_affine(), pts in prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 4..16)) {
        let pairs: Vec<(Point2, Point2)> = pts.iter().map(|&(x, y)| {
            let p = Point2::new(x, y);
            (p, h.project(p).unwrap())
        }).collect();
        let corr = CorrespondenceSet::new(1, 2, pairs);
        // Random draws may be near-degenerate; only well-posed sets are checked.
        if let Ok(est) = estimate_homography_dlt(&corr) {
            let spread = pts.iter().map(|p| p.0).fold(f64::NAN, f64::max) - pts.iter().map(|p| p.0).fold(f64::NAN, f64::min);
            let spread_y = pts.iter().map(|p| p.1).fold(f64::NAN, f64::max) - pts.iter().map(|p| p.1).fold(f64::NAN, f64::min);
            prop_assume!(spread > 200.0 && spread_y > 200.0);
            prop_assume!(est.max_abs_diff(&h) < 1.0);
            prop_assert!(est.max_abs_diff(&h) < 1e-6, "error {}", est.max_abs_diff(&h));
        }
    }

    #[test]
    fn compose_is_associative(a in near_affine(), b in near_affine(), c in near_affine()) {
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-9);
    }

    #[test]
    fn ransac_is_deterministic(h in near_affine(), seed in any::<u64>()) {
        let pairs: Vec<(Point2, Point2)> = (0..30).map(|i| {
            let p = Point2::new((i * 37 % 1000) as f64, (i * 91 % 1000) as f64);
            let q = if i % 5 == 0 { Point2::new(500.0, (i * 13) as f64) } else { h.project(p).unwrap() };
            (p, q)
        }).collect();
        let corr = CorrespondenceSet::new(1, 2, pairs);
        let params = RansacParams { seed, ..Default::default() };
        let a = estimate_homography_ransac(&corr, &params).unwrap();
        let b = estimate_homography_ransac(&corr, &params).unwrap();
        prop_assert_eq!(a.homography.to_row_major(), b.homography.to_row_major());
        prop_assert_eq!(a.inliers, b.inliers);
    }

    #[test]
    fn hungarian_matches_brute_force(rows in 1usize..=7, cols in 1usize..=7, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cost = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>());
        let cost = if rows <= cols { cost } else { cost.transpose() };
        let pairs = min_cost_assignment(&cost);
        prop_assert_eq!(pairs.len(), cost.nrows().min(cost.ncols()));
        let total: f64 = pairs.iter().map(|&(r, c)| cost[(r, c)]).sum();
        prop_assert!((total - brute_force(&cost)).abs() < 1e-12);
        let a = hungarian(&cost, 2.0);
        let mut seen_r = std::collections::HashSet::new();
        let mut seen_c = std::collections::HashSet::new();
        for (r, c) in a.matches {
            prop_assert!(seen_r.insert(r) && seen_c.insert(c));
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(vals in prop::collection::vec(-50.0f64..50.0, 12)) {
        let m = DMatrix::from_row_slice(3, 4, &vals);
        for row in softmax_rows(&m).row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hsa_slot_permutation_equivariance(seed in any::<u64>(), n_f in 1usize..6) {
        let w = VcilWeights::seeded(8, seed).unwrap();
        let s = init_slots(3, 8, seed ^ 1, 1).unwrap();
        let rows: Vec<Vec<f64>> = (0..n_f).map(|i| (0..8).map(|j| ((seed as usize + i * 8 + j) % 17) as f64 - 8.0 + 0.5).collect()).collect();
        let f = IdFeatureSet::from_rows(1, &rows).unwrap();
        let h = Homography::from_row_major([1.0, 0.1, 3.0, -0.05, 0.9, -2.0, 1e-4, 0.0, 1.0]).unwrap();
        let perm = [2usize, 0, 1];
        let permuted = SlotBank { slots: DMatrix::from_fn(3, 8, |r, c| s.slots[(perm[r], c)]), frame: 1 };
        let out = hsa_forward(&f, &s, &h, &w).unwrap();
        let out_p = hsa_forward(&f, &permuted, &h, &w).unwrap();
        for (r, &pr) in perm.iter().enumerate() {
            for c in 0..8 {
                prop_assert!((out_p.slots[(r, c)] - out.slots[(pr, c)]).abs() < 1e-12);
            }
        }
        let f_perm = IdFeatureSet { features: DMatrix::from_fn(n_f, 8, |r, c| f.features[(n_f - 1 - r, c)]), frame: 1 };
        let u = update_id_features(&f, &out, &w).unwrap();
        let u_p = update_id_features(&f_perm, &out, &w).unwrap();
        for r in 0..n_f {
            for c in 0..8 {
                prop_assert!((u_p.features[(r, c)] - u.features[(n_f - 1 - r, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mot_round_trip(recs in prop::collection::vec((1usize..50, -1i64..20, -100.0f64..100.0, -100.0f64..100.0, 0.5f64..90.0, 0.5f64..90.0, 0.0f64..1.0, -1i32..5), 0..30)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let records: Vec<io::MotRecord> = recs.into_iter().map(|(frame, id, left, top, width, height, conf, class_id)| io::MotRecord {
            frame, id, left, top, width, height, conf, class_id, visibility: 1.0, extra: vec![],
        }).collect();
        io::write_mot(&records, &p).unwrap();
        let back = io::read_mot(&p).unwrap();
        let mut sorted = records.clone();
        sorted.sort_by_key(|r| r.frame);
        prop_assert_eq!(back, sorted);
    }

    #[test]
    fn cache_round_trip(hs in prop::collection::vec(near_affine(), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        let entries: Vec<((usize, usize), Homography)> = hs.iter().enumerate().map(|(i, h)| ((i + 2, i + 1), *h)).collect();
        io::write_homography_cache(&entries, &p).unwrap();
        let back = io::read_homography_entries(&p).unwrap();
        prop_assert_eq!(back, entries);
    }

    #[test]
    fn embedding_round_trip_is_text_stable(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut map = io::EmbeddingMap::new();
        for k in 0..5 {
            let mut v: Vec<f64> = (0..8).map(|_| rng.random::<f64>() - 0.5).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            map.insert((k / 2 + 1, k % 2), v);
        }
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
        io::write_embeddings(&map, &a).unwrap();
        let back = io::read_embeddings(&a).unwrap();
        io::write_embeddings(&back, &b).unwrap();
        prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        for (k, v) in &map {
            for (x, y) in v.iter().zip(&back[k]) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ids_invariant_to_relabeling(flip in 2usize..9, offset in 1i64..1000) {
        let gt: FrameBoxes = (1..=10).map(|f| (f, vec![tb(1, f as f64), tb(2, 200.0)])).collect();
        let pred: FrameBoxes = (1..=10).map(|f| (f, vec![tb(if f < flip { 5 } else { 6 }, f as f64), tb(9, 200.0)])).collect();
        let renamed: FrameBoxes = pred.iter().map(|(&f, v)| (f, v.iter().map(|b| TrackedBox { id: b.id * 7 + offset, ..*b }).collect())).collect();
        let a = clear_mot(&gt, &pred, 0.5).unwrap();
        let b = clear_mot(&gt, &renamed, 0.5).unwrap();
        prop_assert_eq!(a.ids, 1);
        prop_assert_eq!(a.ids, b.ids);
        // which fragment keeps the original id does not matter
        let swapped: FrameBoxes = (1..=10).map(|f| (f, vec![tb(if f < flip { 6 } else { 5 }, f as f64), tb(9, 200.0)])).collect();
        prop_assert_eq!(idf1(&gt, &pred, 0.5).unwrap(), idf1(&gt, &swapped, 0.5).unwrap());
    }
}

fn tb(id: i64, x: f64) -> TrackedBox {
    TrackedBox { id, bbox: BBox::new(x, 0.0, 20.0, 20.0).unwrap(), class_id: -1 }
}

#[test]
fn graph_consistency_on_simulated_motion() {
    let cfg = ScenarioConfig {
        scenario: Scenario::Mixed,
        frames: 45,
        correspondence_noise_sigma: 0.3,
        corr_intervals: vec![7],
        ..Default::default()
    };
    let b = generate_sequence(&cfg).unwrap();
    let g =
        HomographyGraph::estimate(45, &FheParams { interval: 7, ..Default::default() }, &b.correspondences).unwrap();
    for (a, c) in [(1, 45), (3, 17), (9, 10), (22, 8), (44, 2)] {
        assert_eq!(g.between(a, a).unwrap(), Homography::identity());
        let prod = g.between(a, c).unwrap().compose(&g.between(c, a).unwrap()).unwrap();
        assert!(prod.max_abs_diff(&Homography::identity()) < 1e-6);
    }
}

#[test]
fn keyframe_chain_within_noise_floor() {
    let cfg = ScenarioConfig {
        scenario: Scenario::Linear,
        frames: 21,
        pan_speed: 1.5,
        correspondence_noise_sigma: 0.5,
        corr_intervals: vec![10, 20],
        ..Default::default()
    };
    let b = generate_sequence(&cfg).unwrap();
    let g =
        HomographyGraph::estimate(21, &FheParams { interval: 10, ..Default::default() }, &b.correspondences).unwrap();
    let grid = homview_core::geometry::grid_points(1000.0, 1000.0, 5);
    let truth = b.gt_between(21, 1).unwrap();
    let chained = g.between(21, 1).unwrap();
    let direct = estimate_homography_ransac(&b.correspondences[&(1, 21)], &RansacParams::default()).unwrap().homography;
    let pair_err = |k1: usize, k2: usize| {
        let h = estimate_homography_ransac(&b.correspondences[&(k1, k2)], &RansacParams::default()).unwrap().homography;
        h.mean_transfer_distance(&b.gt_between(k2, k1).unwrap(), &grid).unwrap()
    };
    let floor = pair_err(1, 11).max(pair_err(11, 21)).max(direct.mean_transfer_distance(&truth, &grid).unwrap());
    let chain_err = chained.mean_transfer_distance(&direct, &grid).unwrap();
    assert!(chain_err < 2.0 * floor.max(0.05) * 2.0, "chain {chain_err} floor {floor}");
}

#[test]
fn tracker_ids_unique_and_matching_is_injective() {
    let cfg = ScenarioConfig {
        scenario: Scenario::TurnRight,
        frames: 40,
        det_noise_sigma: 2.0,
        det_dropout: 0.1,
        false_positive_rate: 1.0,
        ..Default::default()
    };
    let b = generate_sequence(&cfg).unwrap();
    let g = b.gt_graph().unwrap();
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let empty = Vec::new();
    for t in 1..=40 {
        let out = tracker.step(t, b.detections.get(&t).unwrap_or(&empty), &g).unwrap();
        let ids: std::collections::BTreeSet<u64> = out.iter().map(|t| t.track_id).collect();
        assert_eq!(ids.len(), out.len(), "duplicate ids in frame {t}");
        for tr in &out {
            assert_eq!(tr.misses, 0);
        }
        for tr in &tracker.state().tracks {
            seen.insert(tr.track_id);
        }
        let all: Vec<u64> = tracker.state().tracks.iter().map(|t| t.track_id).collect();
        let set: std::collections::BTreeSet<u64> = all.iter().copied().collect();
        assert_eq!(all.len(), set.len());
    }
    assert_eq!(tracker.state().next_id as usize, seen.len() + 1);
}

#[test]
fn identity_graph_equals_plain_iou_tracker() {
    let cfg = ScenarioConfig {
        scenario: Scenario::Hover,
        frames: 30,
        det_noise_sigma: 2.0,
        det_dropout: 0.05,
        ..Default::default()
    };
    let b = generate_sequence(&cfg).unwrap();
    let ident = HomographyGraph::from_pairs(30, (1..30).map(|t| ((t, t + 1), Homography::identity()))).unwrap();
    let run = |h: &dyn HomographySource| {
        homview_core::pipeline::run_tracker(
            30,
            &b.detections,
            h,
            &TrackerConfig::default(),
            homview_core::Execution::Sequential,
        )
        .unwrap()
        .0
    };
    assert_eq!(run(&ident), run(&homview_core::fhe::IdentityHomographies));
}

#[test]
fn clear_mot_of_gt_is_perfect_and_tp_removal_costs_one_fn() {
    for s in [Scenario::Hover, Scenario::Linear, Scenario::Descend] {
        let b = generate_sequence(&ScenarioConfig { scenario: s, frames: 25, ..Default::default() }).unwrap();
        let gt = homview_core::pipeline::gt_boxes(&b);
        let r = evaluate(&gt, &gt, 0.5).unwrap();
        assert_eq!((r.mota, r.motp, r.idf1, r.fp, r.fn_, r.ids, r.fm), (100.0, 100.0, 100.0, 0, 0, 0, 0));
        let total = r.counts.gt_boxes as f64;
        let mut pred = gt.clone();
        let frame = *pred.keys().nth(12).unwrap();
        pred.get_mut(&frame).unwrap().pop();
        let r2 = clear_mot(&gt, &pred, 0.5).unwrap();
        assert_eq!(r2.fn_, 1);
        assert!((r.mota - r2.mota - 100.0 / total).abs() < 1e-9);
    }
}
