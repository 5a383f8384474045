//! Fast homography estimation.
//!
//! Homographies are estimated directly only between adjacent keyframes. A
//! non-keyframe `t` in `[k1, k2]` gets `H_{t,k1}` from the keyframe matrix
//! `H_{k2,k1}` scaled by its displacement ratios, and any other pair is
//! composed from those pieces by [`HomographyGraph::between`].

mod alpha;
mod graph;
mod schedule;

pub use alpha::{compute_alpha, AlphaPair};
pub use graph::{CorrespondenceProvider, FheParams, HomographyGraph, HomographySource, IdentityHomographies};
pub use schedule::KeyframeSchedule;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::Homography;

const ALPHA_EPS: f64 = 1e-6;

/// How a within-interval homography is derived from the keyframe matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeriveMode {
    /// `diag(α1, α2, 1) · H_{k2,k1}`: scaling rows one and two of the
    /// keyframe matrix, the row-wise reading of scaling `x_t` and `y_t`.
    PaperLiteral,
    /// `(1 − ᾱ)·I + ᾱ·H_{k2,k1}` with `ᾱ = (α1 + α2) / 2`.
    #[default]
    Lerp,
}

impl std::str::FromStr for DeriveMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lerp" => Ok(DeriveMode::Lerp),
            "paper_literal" | "paper-literal" | "literal" => Ok(DeriveMode::PaperLiteral),
            other => Err(format!("unknown mode `{other}` (expected lerp or paper_literal)")),
        }
    }
}

impl std::fmt::Display for DeriveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeriveMode::PaperLiteral => "paper_literal",
            DeriveMode::Lerp => "lerp",
        })
    }
}

/// `H_{t,k1}` from `H_{k2,k1}` and the displacement ratios of `t`.
pub fn derive_within_interval(h_k2_k1: &Homography, alpha: AlphaPair, mode: DeriveMode) -> Result<Homography> {
    let h = h_k2_k1.matrix();
    match mode {
        DeriveMode::PaperLiteral => {
            if alpha.alpha1 <= ALPHA_EPS || alpha.alpha2 <= ALPHA_EPS {
                return Err(Error::DegenerateAlpha(alpha.alpha1, alpha.alpha2));
            }
            let scale = Matrix3::from_diagonal(&nalgebra::Vector3::new(alpha.alpha1, alpha.alpha2, 1.0));
            Homography::from_matrix(scale * h)
        }
        DeriveMode::Lerp => {
            let a = alpha.mean();
            Homography::from_matrix(Matrix3::identity() * (1.0 - a) + h * a)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_h() -> Homography {
        Homography::from_row_major([1.02, 0.03, 12.0, -0.01, 0.98, -7.0, 1e-5, -2e-5, 1.0]).unwrap()
    }

    #[test]
    fn alpha_one_keeps_keyframe_matrix() {
        let h = sample_h();
        for mode in [DeriveMode::PaperLiteral, DeriveMode::Lerp] {
            let d = derive_within_interval(&h, AlphaPair::ONE, mode).unwrap();
            assert!(d.max_abs_diff(&h) < 1e-15);
        }
    }

    #[test]
    fn lerp_alpha_zero_is_identity() {
        let d = derive_within_interval(&sample_h(), AlphaPair::ZERO, DeriveMode::Lerp).unwrap();
        assert_eq!(d, Homography::identity());
    }

    #[test]
    fn paper_literal_scales_rows() {
        let h = sample_h();
        let d = derive_within_interval(&h, AlphaPair { alpha1: 0.5, alpha2: 0.25 }, DeriveMode::PaperLiteral).unwrap();
        let (m, n) = (h.matrix(), d.matrix());
        for c in 0..3 {
            assert!((n[(0, c)] - 0.5 * m[(0, c)]).abs() < 1e-15);
            assert!((n[(1, c)] - 0.25 * m[(1, c)]).abs() < 1e-15);
            assert_eq!(n[(2, c)], m[(2, c)]);
        }
        assert!(matches!(
            derive_within_interval(&h, AlphaPair::ZERO, DeriveMode::PaperLiteral),
            Err(Error::DegenerateAlpha(..))
        ));
    }

    #[test]
    fn lerp_of_translation_is_exact() {
        let h = Homography::translation(30.0, -12.0);
        let d = derive_within_interval(&h, AlphaPair { alpha1: 0.3, alpha2: 0.3 }, DeriveMode::Lerp).unwrap();
        assert!(d.max_abs_diff(&Homography::translation(9.0, -3.6)) < 1e-12);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("lerp".parse::<DeriveMode>().unwrap(), DeriveMode::Lerp);
        assert_eq!("paper_literal".parse::<DeriveMode>().unwrap(), DeriveMode::PaperLiteral);
        assert!("cubic".parse::<DeriveMode>().is_err());
    }
}
