use super::{BBox, Homography, Point2};
use crate::error::{Error, Result};

const AREA_EPS: f64 = 1e-12;

/// A convex quadrilateral with counter-clockwise (positive signed area)
/// winding in the x-right/y-down pixel frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexQuad {
    corners: [Point2; 4],
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace signed area.
fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (&poly[i], &poly[(i + 1) % n]);
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

impl ConvexQuad {
    /// Validates convexity and normalizes the winding. Corners must be given
    /// in boundary order (either direction).
    pub fn new(mut corners: [Point2; 4]) -> Result<Self> {
        if corners.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite quad corner"));
        }
        if signed_area(&corners) < 0.0 {
            corners.reverse();
        }
        let area = signed_area(&corners);
        if !(area > AREA_EPS) {
            return Err(Error::InvalidGeometry("quad has no area"));
        }
        for i in 0..4 {
            let turn = cross(&corners[i], &corners[(i + 1) % 4], &corners[(i + 2) % 4]);
            if turn <= 0.0 {
                return Err(Error::InvalidGeometry("quad is not strictly convex"));
            }
        }
        Ok(Self { corners })
    }

    pub fn from_bbox(b: &BBox) -> Self {
        // top-left, top-right, bottom-right, bottom-left has positive signed area
        ConvexQuad { corners: b.corners() }
    }

    pub fn corners(&self) -> &[Point2; 4] {
        &self.corners
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.corners)
    }

    pub fn bounding_box(&self) -> Result<BBox> {
        BBox::enclosing(&self.corners)
    }

    pub fn centroid(&self) -> Point2 {
        let (sx, sy) = self.corners.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        Point2::new(sx / 4.0, sy / 4.0)
    }
}

/// Clips `subject` against the half-planes of the convex polygon `clip`
/// (positive winding), Sutherland–Hodgman style.
fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let input = std::mem::take(&mut output);
        let k = input.len();
        for j in 0..k {
            let cur = input[j];
            let prev = input[(j + k - 1) % k];
            let d_cur = cross(&a, &b, &cur);
            let d_prev = cross(&a, &b, &prev);
            if d_cur >= 0.0 {
                if d_prev < 0.0 {
                    output.push(intersect(&prev, &cur, d_prev, d_cur));
                }
                output.push(cur);
            } else if d_prev >= 0.0 {
                output.push(intersect(&prev, &cur, d_prev, d_cur));
            }
        }
    }
    output
}

fn intersect(p: &Point2, q: &Point2, dp: f64, dq: f64) -> Point2 {
    let t = dp / (dp - dq);
    Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

/// Exact IoU of two convex quads via polygon clipping and shoelace areas.
pub fn polygon_iou(a: &ConvexQuad, b: &ConvexQuad) -> f64 {
    let inter_poly = clip_convex(&a.corners, &b.corners);
    if inter_poly.len() < 3 {
        return 0.0;
    }
    let inter = signed_area(&inter_poly).max(0.0);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// How projected boxes are represented for IoU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxProjectionMode {
    /// Exact projected quadrilateral.
    #[default]
    Polygon,
    /// Axis-aligned bounding box of the projected quadrilateral.
    Aabb,
}

impl std::str::FromStr for BoxProjectionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "polygon" => Ok(BoxProjectionMode::Polygon),
            "aabb" => Ok(BoxProjectionMode::Aabb),
            other => Err(format!("unknown box mode `{other}` (expected polygon or aabb)")),
        }
    }
}

impl std::fmt::Display for BoxProjectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoxProjectionMode::Polygon => "polygon",
            BoxProjectionMode::Aabb => "aabb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectedBox {
    Quad(ConvexQuad),
    Aabb(BBox),
}

impl ProjectedBox {
    /// IoU against an unprojected box, using the representation of `self`.
    pub fn iou(&self, other: &BBox) -> f64 {
        match self {
            ProjectedBox::Quad(q) => polygon_iou(q, &ConvexQuad::from_bbox(other)),
            ProjectedBox::Aabb(b) => b.iou(other),
        }
    }

    pub fn center(&self) -> Point2 {
        match self {
            ProjectedBox::Quad(q) => q.centroid(),
            ProjectedBox::Aabb(b) => b.center(),
        }
    }
}

/// Projects the four corners of `b` through `h`.
pub fn project_box(h: &Homography, b: &BBox, mode: BoxProjectionMode) -> Result<ProjectedBox> {
    let mut corners = [Point2::default(); 4];
    for (dst, src) in corners.iter_mut().zip(b.corners()) {
        *dst = h.project(src).map_err(|_| Error::DegenerateProjection("corner at infinity"))?;
    }
    let quad = ConvexQuad::new(corners).map_err(|_| Error::DegenerateProjection("projected box is not convex"))?;
    Ok(match mode {
        BoxProjectionMode::Polygon => ProjectedBox::Quad(quad),
        BoxProjectionMode::Aabb => ProjectedBox::Aabb(quad.bounding_box()?),
    })
}
