//! Homogeneous-coordinate primitives: points, boxes, homographies,
//! estimation from correspondences and exact convex-polygon IoU.

mod estimate;
mod homography;
mod polygon;

pub use estimate::{
    estimate_homography_dlt, estimate_homography_ransac, estimate_homography_ransac_with, RansacParams, RansacResult,
};
pub use homography::{compose, grid_points, Homography};
pub use polygon::{polygon_iou, project_box, BoxProjectionMode, ConvexQuad, ProjectedBox};

use crate::error::{Error, Result};

/// A point in frame pixel coordinates (origin top-left).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box in MOT convention: left, top, width, height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        let b = Self { left, top, width, height };
        if !(left.is_finite() && top.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite box"));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidGeometry("box width and height must be positive"));
        }
        Ok(b)
    }

    /// Bounding box of a set of points.
    pub fn enclosing(points: &[Point2]) -> Result<Self> {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.left + 0.5 * self.width, self.top + 0.5 * self.height)
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    /// Corners in the order top-left, top-right, bottom-right, bottom-left.
    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.left, self.top),
            Point2::new(self.right(), self.top),
            Point2::new(self.right(), self.bottom()),
            Point2::new(self.left, self.bottom()),
        ]
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let w = (self.right().min(other.right()) - self.left.max(other.left)).max(0.0);
        let h = (self.bottom().min(other.bottom()) - self.top.max(other.top)).max(0.0);
        let inter = w * h;
        if inter <= 0.0 {
            return 0.0;
        }
        inter / (self.area() + other.area() - inter)
    }
}

/// Matched keypoints between two frames. Each pair is `(src, dst)`, where
/// `src` lives in `frame_src` and `dst` in `frame_dst`; a homography
/// estimated from the set maps `src` onto `dst`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(Point2, Point2)>,
    pub frame_src: usize,
    pub frame_dst: usize,
}

impl CorrespondenceSet {
    pub fn new(frame_src: usize, frame_dst: usize, pairs: Vec<(Point2, Point2)>) -> Self {
        Self { pairs, frame_src, frame_dst }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.pairs.iter().all(|(s, d)| s.is_finite() && d.is_finite())
    }

    /// The same matches viewed from the other frame.
    pub fn reversed(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(s, d)| (d, s)).collect(),
            frame_src: self.frame_dst,
            frame_dst: self.frame_src,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_rejects_non_positive() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn aabb_iou() {
        let a = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = BBox::new(0.5, 0.0, 1.0, 1.0).unwrap();
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.iou(&BBox::new(3.0, 3.0, 1.0, 1.0).unwrap()), 0.0);
    }
}
