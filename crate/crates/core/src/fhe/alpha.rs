use crate::error::{Error, Result};
use crate::geometry::CorrespondenceSet;

const DISPLACEMENT_EPS: f64 = 1e-9;

/// An axis whose keyframe displacement is below this fraction of the other
/// axis is treated as static when interpolating; its ratio is noise over noise.
pub(crate) const MINOR_AXIS_FRACTION: f64 = 0.1;

/// Per-axis displacement ratios locating frame `t` inside its keyframe interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaPair {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl AlphaPair {
    pub const ONE: AlphaPair = AlphaPair { alpha1: 1.0, alpha2: 1.0 };
    pub const ZERO: AlphaPair = AlphaPair { alpha1: 0.0, alpha2: 0.0 };

    pub fn mean(&self) -> f64 {
        0.5 * (self.alpha1 + self.alpha2)
    }
}

/// Mean absolute x and y displacement between the two sides of `corr`.
pub(crate) fn mean_displacement(corr: &CorrespondenceSet) -> (f64, f64) {
    let n = corr.len().max(1) as f64;
    let (dx, dy) =
        corr.pairs.iter().fold((0.0, 0.0), |(ax, ay), (s, d)| (ax + (d.x - s.x).abs(), ay + (d.y - s.y).abs()));
    (dx / n, dy / n)
}

/// Ratios of mean per-axis displacement `t ← k1` over `k2 ← k1`, with
/// `None` for an axis whose keyframe displacement vanishes.
pub(crate) fn axis_ratios(
    corr_t_k1: &CorrespondenceSet,
    corr_k2_k1: &CorrespondenceSet,
) -> Result<(Option<f64>, Option<f64>)> {
    if corr_t_k1.is_empty() || corr_k2_k1.is_empty() {
        return Err(Error::MissingCorrespondences { src: corr_t_k1.frame_src, dst: corr_t_k1.frame_dst });
    }
    let (tx, ty) = mean_displacement(corr_t_k1);
    let (kx, ky) = mean_displacement(corr_k2_k1);
    let ratio = |num: f64, den: f64| (den > DISPLACEMENT_EPS).then(|| num / den);
    Ok((ratio(tx, kx), ratio(ty, ky)))
}

/// [`axis_ratios`] with a minor axis dropped (see [`MINOR_AXIS_FRACTION`]).
pub(crate) fn interpolation_ratios(
    corr_t_k1: &CorrespondenceSet,
    corr_k2_k1: &CorrespondenceSet,
) -> Result<(Option<f64>, Option<f64>)> {
    let (rx, ry) = axis_ratios(corr_t_k1, corr_k2_k1)?;
    let (kx, ky) = mean_displacement(corr_k2_k1);
    Ok((rx.filter(|_| kx >= MINOR_AXIS_FRACTION * ky), ry.filter(|_| ky >= MINOR_AXIS_FRACTION * kx)))
}

/// Scaling factors from matched keypoints: `corr_t_k1` maps keyframe `k1`
/// onto frame `t`, `corr_k2_k1` maps `k1` onto the next keyframe `k2`.
pub fn compute_alpha(corr_t_k1: &CorrespondenceSet, corr_k2_k1: &CorrespondenceSet) -> Result<AlphaPair> {
    match axis_ratios(corr_t_k1, corr_k2_k1)? {
        (Some(alpha1), Some(alpha2)) => Ok(AlphaPair { alpha1, alpha2 }),
        _ => Err(Error::ZeroKeyframeDisplacement { k1: corr_k2_k1.frame_src, k2: corr_k2_k1.frame_dst }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn shifted(src: usize, dst: usize, pts: &[(f64, f64)], dx: f64, dy: f64) -> CorrespondenceSet {
        let pairs = pts.iter().map(|&(x, y)| (Point2::new(x, y), Point2::new(x + dx, y + dy))).collect();
        CorrespondenceSet::new(src, dst, pairs)
    }

    const PTS: [(f64, f64); 4] = [(10.0, 10.0), (200.0, 40.0), (90.0, 300.0), (400.0, 410.0)];

    #[test]
    fn zero_displacement_gives_zero() {
        let a = compute_alpha(&shifted(1, 3, &PTS, 0.0, 0.0), &shifted(1, 11, &PTS, 8.0, -4.0)).unwrap();
        assert_eq!(a, AlphaPair::ZERO);
    }

    #[test]
    fn half_displacement_gives_half() {
        let a = compute_alpha(&shifted(1, 6, &PTS, 4.0, -2.0), &shifted(1, 11, &PTS, 8.0, -4.0)).unwrap();
        assert_eq!(a, AlphaPair { alpha1: 0.5, alpha2: 0.5 });
    }

    #[test]
    fn static_keyframes_are_an_error() {
        let e = compute_alpha(&shifted(1, 6, &PTS, 0.0, 0.0), &shifted(1, 11, &PTS, 0.0, 0.0));
        assert!(matches!(e, Err(Error::ZeroKeyframeDisplacement { k1: 1, k2: 11 })));
        let e = compute_alpha(&shifted(1, 6, &PTS, 3.0, 0.0), &shifted(1, 11, &PTS, 6.0, 0.0));
        assert!(matches!(e, Err(Error::ZeroKeyframeDisplacement { .. })));
    }

    #[test]
    fn minor_axis_is_dropped_for_interpolation() {
        let r = interpolation_ratios(&shifted(1, 6, &PTS, 4.0, 0.3), &shifted(1, 11, &PTS, 8.0, 0.2)).unwrap();
        assert_eq!(r, (Some(0.5), None));
        let r = interpolation_ratios(&shifted(1, 6, &PTS, 4.0, -2.0), &shifted(1, 11, &PTS, 8.0, -4.0)).unwrap();
        assert_eq!(r, (Some(0.5), Some(0.5)));
    }
}
