use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Homography, Point2};

/// Pinhole camera above the ground plane `Z = 0` (world `Z` up).
///
/// Camera axes are x right, y down, z forward. With zero angles the camera
/// looks straight down and image "up" is world `+Y`. Yaw turns about world
/// `Z`; pitch and roll are applied in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraPose {
    pub fn nadir(x: f64, y: f64, height: f64, focal: f64, cx: f64, cy: f64) -> Self {
        Self { position: Vector3::new(x, y, height), yaw: 0.0, pitch: 0.0, roll: 0.0, focal, cx, cy }
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.focal, 0.0, self.cx, 0.0, self.focal, self.cy, 0.0, 0.0, 1.0)
    }

    /// Camera-to-world rotation.
    pub fn rotation_wc(&self) -> Matrix3<f64> {
        let nadir = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw);
        let pitch = Rotation3::from_axis_angle(&Vector3::x_axis(), self.pitch);
        let roll = Rotation3::from_axis_angle(&Vector3::z_axis(), self.roll);
        yaw.matrix() * nadir * pitch.matrix() * roll.matrix()
    }

    fn check_visible(&self) -> Result<()> {
        let forward = self.rotation_wc().column(2).into_owned();
        if self.position.z <= 0.0 || forward.z > -1e-6 {
            return Err(Error::PlaneBehindCamera);
        }
        Ok(())
    }

    /// `G = K [r1 r2 t]`: ground `(X, Y, 1)` to homogeneous image point.
    pub fn ground_to_image(&self) -> Result<Matrix3<f64>> {
        self.check_visible()?;
        let r_cw = self.rotation_wc().transpose();
        let t = -(r_cw * self.position);
        let mut m = Matrix3::zeros();
        m.set_column(0, &r_cw.column(0));
        m.set_column(1, &r_cw.column(1));
        m.set_column(2, &t);
        Ok(self.intrinsics() * m)
    }

    pub fn project_ground(&self, x: f64, y: f64) -> Result<Point2> {
        let p = self.ground_to_image()? * Vector3::new(x, y, 1.0);
        if p.z <= 1e-9 {
            return Err(Error::PlaneBehindCamera);
        }
        Ok(Point2::new(p.x / p.z, p.y / p.z))
    }

    /// Ground point seen at image point `p`.
    pub fn image_to_ground(&self, p: Point2) -> Result<(f64, f64)> {
        let g = self.ground_to_image()?;
        let inv = g.try_inverse().ok_or(Error::PlaneBehindCamera)?;
        let w = inv * Vector3::new(p.x, p.y, 1.0);
        if w.z.abs() <= 1e-12 {
            return Err(Error::PointAtInfinity(w.z));
        }
        let (x, y) = (w.x / w.z, w.y / w.z);
        // Points above the horizon back-project behind the camera.
        self.project_ground(x, y)?;
        let depth = (self.rotation_wc().transpose() * (Vector3::new(x, y, 0.0) - self.position)).z;
        if depth <= 0.0 {
            return Err(Error::PlaneBehindCamera);
        }
        Ok((x, y))
    }
}

/// Image-to-image map of ground points from view `a` into view `b`:
/// `G_b G_a⁻¹`, i.e. `H_{b,a}`.
pub fn plane_homography(pose_a: &CameraPose, pose_b: &CameraPose) -> Result<Homography> {
    let ga = pose_a.ground_to_image()?;
    let gb = pose_b.ground_to_image()?;
    let ga_inv = ga.try_inverse().ok_or(Error::PlaneBehindCamera)?;
    Homography::from_matrix(gb * ga_inv)
}
