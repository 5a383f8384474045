use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{project_box, BBox, BoxProjectionMode, Homography, ProjectedBox};

/// Cost assigned to forbidden pairs; above every admissible threshold.
pub const GATED_COST: f64 = 1.0 + 1e-6;
/// Non-overlapping pairs farther apart than this many box diagonals cannot
/// be matched on appearance alone.
pub const CENTER_GATE_DIAGONALS: f64 = 2.0;

/// HMF cost plus the spatial gate mask (true = forbidden).
#[derive(Debug, Clone, PartialEq)]
pub struct HmfCost {
    pub cost: DMatrix<f64>,
    pub gate: DMatrix<bool>,
}

/// `1 − HMF` for every pair of `boxes_a` (frame a) and `boxes_b` (frame b).
///
/// `h_ab` maps frame-b coordinates into frame a; boxes of a are carried into
/// frame b by its inverse and boxes of b into frame a by `h_ab`, and the two
/// IoUs are averaged. A pair whose projection degenerates costs 1.
pub fn hmf_cost(
    boxes_a: &[BBox],
    boxes_b: &[BBox],
    h_ab: &Homography,
    mode: BoxProjectionMode,
) -> Result<DMatrix<f64>> {
    Ok(hmf_association(boxes_a, boxes_b, h_ab, mode, Execution::default())?.cost)
}

/// [`hmf_cost`] with the spatial gate, rows evaluated under `exec`.
pub fn hmf_association(
    boxes_a: &[BBox],
    boxes_b: &[BBox],
    h_ab: &Homography,
    mode: BoxProjectionMode,
    exec: Execution,
) -> Result<HmfCost> {
    let h_ba = h_ab.inverse()?;
    let a_in_b: Vec<Option<ProjectedBox>> = boxes_a.iter().map(|b| project_box(&h_ba, b, mode).ok()).collect();
    let b_in_a: Vec<Option<ProjectedBox>> = boxes_b.iter().map(|b| project_box(h_ab, b, mode).ok()).collect();
    let rows = exec.map_range(boxes_a.len(), |i| {
        boxes_b
            .iter()
            .enumerate()
            .map(|(j, bj)| {
                let (Some(pa), Some(pb)) = (&a_in_b[i], &b_in_a[j]) else {
                    return (1.0, true);
                };
                let hmf = 0.5 * (pa.iou(bj) + pb.iou(&boxes_a[i]));
                let gate = hmf <= 0.0 && {
                    let reach = CENTER_GATE_DIAGONALS * boxes_a[i].diagonal().max(bj.diagonal());
                    pa.center().distance(&bj.center()) > reach
                };
                (1.0 - hmf, gate)
            })
            .collect::<Vec<_>>()
    });
    let (n, m) = (boxes_a.len(), boxes_b.len());
    Ok(HmfCost { cost: DMatrix::from_fn(n, m, |i, j| rows[i][j].0), gate: DMatrix::from_fn(n, m, |i, j| rows[i][j].1) })
}

/// `(1 − cos) / 2` between unit embeddings; 0.5 where either side is missing.
pub fn id_similarity_cost(tracks: &[Option<&[f64]>], dets: &[Option<&[f64]>]) -> DMatrix<f64> {
    DMatrix::from_fn(tracks.len(), dets.len(), |i, j| match (tracks[i], dets[j]) {
        (Some(a), Some(b)) if a.len() == b.len() => {
            let cos: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            ((1.0 - cos) * 0.5).clamp(0.0, 1.0)
        }
        _ => 0.5,
    })
}

/// `iou_weight · iou_cost + (1 − iou_weight) · id_cost`, with gated entries
/// forced to [`GATED_COST`].
pub fn fuse_costs(
    iou_cost: &DMatrix<f64>,
    id_cost: &DMatrix<f64>,
    iou_weight: f64,
    gate: Option<&DMatrix<bool>>,
) -> Result<DMatrix<f64>> {
    if iou_cost.shape() != id_cost.shape() {
        return Err(Error::ShapeMismatch(iou_cost.shape(), id_cost.shape()));
    }
    if let Some(g) = gate {
        if g.shape() != iou_cost.shape() {
            return Err(Error::ShapeMismatch(iou_cost.shape(), g.shape()));
        }
    }
    Ok(DMatrix::from_fn(iou_cost.nrows(), iou_cost.ncols(), |i, j| {
        if gate.is_some_and(|g| g[(i, j)]) {
            GATED_COST
        } else {
            iou_weight * iou_cost[(i, j)] + (1.0 - iou_weight) * id_cost[(i, j)]
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(l: f64, t: f64, w: f64, h: f64) -> BBox {
        BBox::new(l, t, w, h).unwrap()
    }

    #[test]
    fn identity_is_plain_iou() {
        let a = [b(0.0, 0.0, 10.0, 10.0), b(50.0, 50.0, 20.0, 10.0)];
        let c = [b(5.0, 0.0, 10.0, 10.0), b(52.0, 51.0, 20.0, 10.0), b(300.0, 0.0, 4.0, 4.0)];
        let m = hmf_cost(&a, &c, &Homography::identity(), BoxProjectionMode::Polygon).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((m[(i, j)] - (1.0 - a[i].iou(&c[j]))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_translation_has_zero_cost() {
        // A box at (0,0) in frame a sits at (40,0) in frame b; H_ab maps b → a.
        let h_ab = Homography::translation(-40.0, 0.0);
        let m = hmf_cost(&[b(0.0, 0.0, 10.0, 10.0)], &[b(40.0, 0.0, 10.0, 10.0)], &h_ab, BoxProjectionMode::Polygon)
            .unwrap();
        assert!(m[(0, 0)].abs() < 1e-12);
        let direct = hmf_cost(
            &[b(0.0, 0.0, 10.0, 10.0)],
            &[b(40.0, 0.0, 10.0, 10.0)],
            &Homography::identity(),
            BoxProjectionMode::Aabb,
        )
        .unwrap();
        assert_eq!(direct[(0, 0)], 1.0);
    }

    #[test]
    fn gate_only_far_non_overlapping() {
        let a = [b(0.0, 0.0, 10.0, 10.0)];
        let c = [b(12.0, 0.0, 10.0, 10.0), b(200.0, 0.0, 10.0, 10.0)];
        let r = hmf_association(&a, &c, &Homography::identity(), BoxProjectionMode::Polygon, Execution::Sequential)
            .unwrap();
        assert_eq!(r.cost[(0, 0)], 1.0);
        assert!(!r.gate[(0, 0)]);
        assert!(r.gate[(0, 1)]);
    }

    #[test]
    fn id_cost_examples() {
        let x = [1.0, 0.0];
        let y = [0.0, 1.0];
        let nx = [-1.0, 0.0];
        let m = id_similarity_cost(&[Some(&x)], &[Some(&x), Some(&nx), Some(&y), None]);
        assert_eq!(m.as_slice(), &[0.0, 1.0, 0.5, 0.5]);
    }

    #[test]
    fn fusion() {
        let iou = DMatrix::from_element(1, 1, 0.2);
        let id = DMatrix::from_element(1, 1, 0.6);
        assert!((fuse_costs(&iou, &id, 0.5, None).unwrap()[(0, 0)] - 0.4).abs() < 1e-15);
        assert_eq!(fuse_costs(&iou, &id, 1.0, None).unwrap()[(0, 0)], 0.2);
        assert_eq!(fuse_costs(&iou, &id, 0.0, None).unwrap()[(0, 0)], 0.6);
        let g = DMatrix::from_element(1, 1, true);
        assert_eq!(fuse_costs(&iou, &id, 0.5, Some(&g)).unwrap()[(0, 0)], GATED_COST);
        assert!(matches!(fuse_costs(&iou, &DMatrix::zeros(2, 1), 0.5, None), Err(Error::ShapeMismatch(..))));
    }
}
