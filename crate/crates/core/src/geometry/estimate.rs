//! Homography estimation: Hartley-normalized DLT and a seeded RANSAC wrapper.

use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorrespondenceSet, Homography, Point2};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Relative singular-value gap below which the design matrix is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;
/// Cross-product magnitude (in normalized coordinates) below which three
/// points count as collinear.
const COLLINEAR_TOL: f64 = 1e-9;
const RANSAC_CHUNK: usize = 32;

/// Similarity transform moving the centroid to the origin and the mean
/// distance from it to √2.
fn hartley_transform(points: &[Point2]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) {
        return Err(Error::DegenerateConfiguration("all points coincide"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply(t: &Matrix3<f64>, p: &Point2) -> Point2 {
    // `t` is a similarity without projective part.
    Point2::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// True if any two points coincide or any three are collinear.
fn has_degenerate_subset(points: &[Point2]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            if points[i].distance(&points[j]) < COLLINEAR_TOL {
                return true;
            }
            for k in j + 1..n {
                if cross(&points[i], &points[j], &points[k]).abs() < COLLINEAR_TOL {
                    return true;
                }
            }
        }
    }
    false
}

/// Direct linear transform on all pairs of `corr`.
///
/// Points are Hartley-normalized per side, each pair contributes the two rows
/// `[-x, -y, -1, 0, 0, 0, ux, uy, u]` and `[0, 0, 0, -x, -y, -1, vx, vy, v]`,
/// and the solution is the right singular vector of the smallest singular
/// value, mapped back through the normalizing transforms.
pub fn estimate_homography_dlt(corr: &CorrespondenceSet) -> Result<Homography> {
    let n = corr.len();
    if n < 4 {
        return Err(Error::TooFewCorrespondences(n));
    }
    if !corr.all_finite() {
        return Err(Error::DegenerateConfiguration("non-finite point"));
    }
    let src: Vec<Point2> = corr.pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point2> = corr.pairs.iter().map(|p| p.1).collect();
    let t_src = hartley_transform(&src)?;
    let t_dst = hartley_transform(&dst)?;
    let src_n: Vec<Point2> = src.iter().map(|p| apply(&t_src, p)).collect();
    let dst_n: Vec<Point2> = dst.iter().map(|p| apply(&t_dst, p)).collect();
    if n == 4 && (has_degenerate_subset(&src_n) || has_degenerate_subset(&dst_n)) {
        return Err(Error::DegenerateConfiguration("duplicate or collinear points"));
    }

    // Pad to at least 9 rows so the SVD returns the full 9×9 right basis.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src_n.iter().zip(&dst_n).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * i;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateConfiguration("svd failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let s_max = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[order[1]] <= RANK_TOL * s_max {
        return Err(Error::DegenerateConfiguration("rank-deficient design matrix"));
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(Error::DegenerateConfiguration("normalization not invertible"))?;
    let result = Homography::from_matrix(t_dst_inv * hn * t_src)?;
    if !result.is_invertible() {
        return Err(Error::DegenerateConfiguration("estimated homography is singular"));
    }
    Ok(result)
}

/// RANSAC settings. `threshold` is in pixels of symmetric transfer error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Target probability of drawing at least one all-inlier sample; drives
    /// early termination.
    pub confidence: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { threshold: 2.0, max_iters: 1000, seed: 0, confidence: 0.999 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub iterations: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Mean of forward and backward reprojection error, or `None` when either
/// direction sends the point to infinity.
fn symmetric_error(h: &Homography, h_inv: &Homography, s: &Point2, d: &Point2) -> Option<f64> {
    let fwd = h.project(*s).ok()?.distance(d);
    let bwd = h_inv.project(*d).ok()?.distance(s);
    Some(0.5 * (fwd + bwd))
}

fn inlier_mask(h: &Homography, corr: &CorrespondenceSet, threshold: f64) -> Option<(Vec<bool>, f64)> {
    let h_inv = h.inverse().ok()?;
    let mut err_sum = 0.0;
    let mask = corr
        .pairs
        .iter()
        .map(|(s, d)| match symmetric_error(h, &h_inv, s, d) {
            Some(e) if e < threshold => {
                err_sum += e;
                true
            }
            _ => false,
        })
        .collect();
    Some((mask, err_sum))
}

fn subset(corr: &CorrespondenceSet, mask: &[bool]) -> CorrespondenceSet {
    let pairs = corr.pairs.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    CorrespondenceSet::new(corr.frame_src, corr.frame_dst, pairs)
}

pub fn estimate_homography_ransac(corr: &CorrespondenceSet, params: &RansacParams) -> Result<RansacResult> {
    estimate_homography_ransac_with(corr, params, Execution::default())
}

/// Seeded RANSAC over minimal 4-point samples followed by a DLT refit on the
/// winning inlier set.
///
/// Samples are drawn sequentially from the seeded generator in fixed-size
/// chunks; only the scoring of a chunk is distributed. The best hypothesis is
/// chosen by (inlier count, lower error sum, earlier iteration), so the result
/// is identical for every execution policy.
pub fn estimate_homography_ransac_with(
    corr: &CorrespondenceSet,
    params: &RansacParams,
    exec: Execution,
) -> Result<RansacResult> {
    let n = corr.len();
    if n < 4 {
        return Err(Error::TooFewCorrespondences(n));
    }
    if !(params.threshold > 0.0) {
        return Err(Error::InvalidConfig(format!("ransac threshold must be > 0, got {}", params.threshold)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, f64, usize, Vec<bool>)> = None;
    let mut needed = params.max_iters;
    let mut iters = 0;
    while iters < needed.min(params.max_iters) {
        let chunk = RANSAC_CHUNK.min(params.max_iters - iters);
        let samples: Vec<Vec<usize>> =
            (0..chunk).map(|_| rand::seq::index::sample(&mut rng, n, 4).into_vec()).collect();
        let scored = exec.map(&samples, |idx| {
            let pairs = idx.iter().map(|&i| corr.pairs[i]).collect();
            let minimal = CorrespondenceSet::new(corr.frame_src, corr.frame_dst, pairs);
            let h = estimate_homography_dlt(&minimal).ok()?;
            inlier_mask(&h, corr, params.threshold)
        });
        for (offset, score) in scored.into_iter().enumerate() {
            let Some((mask, err)) = score else { continue };
            let count = mask.iter().filter(|&&b| b).count();
            let better = match &best {
                None => true,
                Some((bc, be, _, _)) => count > *bc || (count == *bc && err < *be),
            };
            if better {
                best = Some((count, err, iters + offset, mask));
            }
        }
        iters += chunk;
        if let Some((count, ..)) = &best {
            let w = *count as f64 / n as f64;
            needed = adaptive_iterations(w, params.confidence).min(params.max_iters);
        }
    }

    let (count, _, _, mut mask) = best.ok_or(Error::NoConsensus(0))?;
    if count < 4 {
        return Err(Error::NoConsensus(count));
    }
    let mut h = estimate_homography_dlt(&subset(corr, &mask))?;
    if let Some((refined, _)) = inlier_mask(&h, corr, params.threshold) {
        let refined_count = refined.iter().filter(|&&b| b).count();
        if refined != mask && refined_count >= 4 {
            if let Ok(h2) = estimate_homography_dlt(&subset(corr, &refined)) {
                h = h2;
                mask = refined;
            }
        }
    }
    Ok(RansacResult { homography: h, inliers: mask, iterations: iters })
}

fn adaptive_iterations(inlier_ratio: f64, confidence: f64) -> usize {
    let p_good = inlier_ratio.powi(4);
    if p_good >= 1.0 - f64::EPSILON {
        return 0;
    }
    if p_good <= 0.0 {
        return usize::MAX;
    }
    let k = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if k.is_finite() {
        k.ceil().max(0.0) as usize
    } else {
        usize::MAX
    }
}
