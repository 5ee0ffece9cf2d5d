//! Pinhole ray-cast depth camera producing planar depth with instance masks.

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::frame::DepthFrame;
use crate::error::{invalid, Result};
use crate::sim::world::World;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    /// Sensor resolution before downsampling.
    pub height: usize,
    pub width: usize,
    /// Field of view (rad).
    pub hfov: f64,
    pub vfov: f64,
    /// Depth range (m); depths outside are invalid.
    pub min_range: f64,
    pub max_range: f64,
    /// Camera position in the body frame (m).
    pub offset: [f64; 3],
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            height: 120,
            width: 160,
            hfov: 87f64.to_radians(),
            vfov: 58f64.to_radians(),
            min_range: 0.3,
            max_range: 10.0,
            offset: [0.1, 0.0, 0.0],
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(invalid("camera resolution must be non-zero"));
        }
        if !(self.min_range > 0.0 && self.min_range < self.max_range) {
            return Err(invalid("camera needs 0 < min_range < max_range"));
        }
        let pi = std::f64::consts::PI;
        if !(self.hfov > 0.0 && self.hfov < pi && self.vfov > 0.0 && self.vfov < pi) {
            return Err(invalid("camera field of view must lie in (0, pi)"));
        }
        Ok(())
    }

    pub fn fx(&self) -> f64 {
        self.width as f64 / 2.0 / (self.hfov / 2.0).tan()
    }

    pub fn fy(&self) -> f64 {
        self.height as f64 / 2.0 / (self.vfov / 2.0).tan()
    }

    /// Horizontal angle subtended by one pixel at the image centre.
    pub fn pixel_angle(&self) -> f64 {
        self.hfov / self.width as f64
    }

    /// Camera-frame direction (x forward, y left, z up) through the centre
    /// of pixel `(r, c)`, scaled so its forward component is 1.
    pub fn ray(&self, r: usize, c: usize) -> Vector3<f64> {
        let u = (c as f64 + 0.5 - self.width as f64 / 2.0) / self.fx();
        let v = (r as f64 + 0.5 - self.height as f64 / 2.0) / self.fy();
        Vector3::new(1.0, -u, -v)
    }

    /// Clean render from a camera at `origin` with orientation `rot`.
    pub fn render(&self, world: &World, origin: &Point3<f64>, rot: &Rotation3<f64>) -> DepthFrame {
        let mut frame = DepthFrame::invalid(self.height, self.width);
        let o = origin.coords;
        let fwd = rot * Vector3::x();
        let fwd_h = Vector3::new(fwd.x, fwd.y, 0.0);
        let fwd_norm = fwd_h.norm();
        // Horizontal culling cone; roll and pitch widen the visible wedge so
        // the margin covers the diagonal half-angle.
        let half = ((self.hfov / 2.0).tan().hypot((self.vfov / 2.0).tan())).atan() + 0.05;
        // Depth is planar, so off-axis rays travel up to |ray| * max_range;
        // the corner pixel has the longest ray.
        let reach = self.max_range * self.ray(0, 0).norm();
        let obs = world.obstacles();
        let cands: Vec<usize> = world
            .candidates(&o, reach)
            .into_iter()
            .filter(|&i| {
                let ob = &obs[i];
                let dx = ob.center[0] - o.x;
                let dy = ob.center[1] - o.y;
                let dist = dx.hypot(dy);
                let br = ob.bound_radius();
                if dist > reach + br {
                    return false;
                }
                if dist <= br + 0.5 || fwd_norm < 1e-6 {
                    return true;
                }
                let cosang = (dx * fwd_h.x + dy * fwd_h.y) / (dist * fwd_norm);
                let ang = cosang.clamp(-1.0, 1.0).acos();
                ang <= half + (br / dist).min(1.0).asin()
            })
            .collect();
        for r in 0..self.height {
            for c in 0..self.width {
                let d = rot * self.ray(r, c);
                if let Some(hit) = world.raycast_among(&cands, &o, &d, 0.0, self.max_range) {
                    if hit.t >= self.min_range {
                        frame.set(r * self.width + c, (hit.t / self.max_range) as f32, hit.instance);
                    }
                }
            }
        }
        frame
    }

    /// Camera pose for a body at `position` with attitude `attitude`.
    pub fn pose(&self, position: &Vector3<f64>, attitude: &Rotation3<f64>) -> (Point3<f64>, Rotation3<f64>) {
        let p = position + attitude * Vector3::from(self.offset);
        (Point3::from(p), *attitude)
    }
}
