use nalgebra::Matrix3;

use super::Point2;
use crate::error::{Error, Result};

const H9_EPS: f64 = 1e-9;
const DET_EPS: f64 = 1e-12;
const W_EPS: f64 = 1e-9;

/// A 3×3 projective transform, always stored normalized: `h9 = 1` when
/// `|h9| > 1e-9`, otherwise unit Frobenius norm.
///
/// `Homography` maps points of a source plane onto a destination plane;
/// for a frame pair `(a, b)` the graph stores `H_{a,b}` with `x_a = H_{a,b} x_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    /// Normalizes `m`. Fails on non-finite or all-zero input.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite homography"));
        }
        let h9 = m[(2, 2)];
        let scale = if h9.abs() > H9_EPS { h9 } else { m.norm() };
        if scale == 0.0 {
            return Err(Error::InvalidGeometry("zero homography"));
        }
        Ok(Homography(m / scale))
    }

    /// Builds from the nine entries h1..h9 in row-major order.
    pub fn from_row_major(h: [f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(&h))
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Homography(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn is_invertible(&self) -> bool {
        self.determinant().abs() > DET_EPS
    }

    pub fn project(&self, p: Point2) -> Result<Point2> {
        let m = &self.0;
        let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
        if w.abs() <= W_EPS {
            return Err(Error::PointAtInfinity(w));
        }
        let x = (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w;
        let y = (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w;
        Ok(Point2::new(x, y))
    }

    /// `self ∘ inner`: projecting through the result equals projecting through
    /// `inner` and then `self`.
    pub fn compose(&self, inner: &Homography) -> Result<Homography> {
        if !self.is_invertible() || !inner.is_invertible() {
            let det = if self.is_invertible() { inner.determinant() } else { self.determinant() };
            return Err(Error::SingularMatrix(det));
        }
        Homography::from_matrix(self.0 * inner.0)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let det = self.determinant();
        if det.abs() <= DET_EPS {
            return Err(Error::SingularMatrix(det));
        }
        let inv = self.0.try_inverse().ok_or(Error::SingularMatrix(det))?;
        Homography::from_matrix(inv)
    }

    /// Maximum absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).amax()
    }

    /// Mean distance between the images of `points` under the two transforms.
    pub fn mean_transfer_distance(&self, other: &Homography, points: &[Point2]) -> Result<f64> {
        let mut sum = 0.0;
        for &p in points {
            sum += self.project(p)?.distance(&other.project(p)?);
        }
        Ok(sum / points.len().max(1) as f64)
    }
}

/// `compose(H_ba, H_cb)` returns `H_ca`.
pub fn compose(h_ba: &Homography, h_cb: &Homography) -> Result<Homography> {
    h_ba.compose(h_cb)
}

/// Evenly spaced `n × n` grid over `[0, width] × [0, height]`, corners included.
pub fn grid_points(width: f64, height: f64, n: usize) -> Vec<Point2> {
    let step = |len: f64, i: usize| if n > 1 { len * i as f64 / (n - 1) as f64 } else { 0.5 * len };
    (0..n).flat_map(|r| (0..n).map(move |c| Point2::new(step(width, c), step(height, r)))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_h(rng: &mut ChaCha8Rng) -> Homography {
        let m = Matrix3::new(
            rng.random_range(0.8..1.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-50.0..50.0),
            rng.random_range(-0.2..0.2),
            rng.random_range(0.8..1.2),
            rng.random_range(-50.0..50.0),
            rng.random_range(-1e-4..1e-4),
            rng.random_range(-1e-4..1e-4),
            1.0,
        );
        Homography::from_matrix(m).unwrap()
    }

    #[test]
    fn normalization_convention() {
        let h = Homography::from_matrix(Matrix3::identity() * 4.0).unwrap();
        assert_eq!(h, Homography::identity());
        let m = Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let h = Homography::from_matrix(m * 3.0).unwrap();
        assert!((h.matrix().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn project_examples() {
        let p = Point2::new(5.0, 7.0);
        assert_eq!(Homography::identity().project(p).unwrap(), p);
        assert_eq!(Homography::translation(10.0, 0.0).project(Point2::new(0.0, 0.0)).unwrap(), Point2::new(10.0, 0.0));
        let scale = Homography::from_row_major([2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(scale.project(Point2::new(3.0, 4.0)).unwrap(), Point2::new(6.0, 8.0));
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_row_major([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 0.0, 1.0]).unwrap();
        assert!(matches!(h.project(Point2::new(-100.0, 3.0)), Err(Error::PointAtInfinity(_))));
    }

    #[test]
    fn compose_and_invert() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_h(&mut rng);
        assert!(compose(&h, &Homography::identity()).unwrap().max_abs_diff(&h) < 1e-15);
        let back = compose(&h, &h.inverse().unwrap()).unwrap();
        assert!(back.max_abs_diff(&Homography::identity()) < 1e-9);
    }

    #[test]
    fn chain_matches_sequential_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (a, b, c) = (random_h(&mut rng), random_h(&mut rng), random_h(&mut rng));
            let chain = a.compose(&b).unwrap().compose(&c).unwrap();
            let p = Point2::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
            let seq = a.project(b.project(c.project(p).unwrap()).unwrap()).unwrap();
            assert!(chain.project(p).unwrap().distance(&seq) < 1e-7);
            // associativity
            let other = a.compose(&b.compose(&c).unwrap()).unwrap();
            assert!(chain.max_abs_diff(&other) < 1e-9);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let s = Homography::from_row_major([1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(s.inverse(), Err(Error::SingularMatrix(_))));
        assert!(matches!(s.compose(&Homography::identity()), Err(Error::SingularMatrix(_))));
    }
}
