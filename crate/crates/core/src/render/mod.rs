//! Depth camera, frame triple, sensor corruption and PGM I/O.

pub mod camera;
pub mod frame;
pub mod noise;
pub mod pgm;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use camera::CameraModel;
pub use frame::DepthFrame;
pub use noise::{corrupt, NoiseParams};
pub use pgm::Pgm;

use crate::error::{invalid, Result};
use crate::sim::dynamics::RobotState;
use crate::sim::world::World;

/// Camera, output resolution and corruption model used by every stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub camera: CameraModel,
    /// Resolution of frames handed to the networks.
    pub out_height: usize,
    pub out_width: usize,
    pub noise: NoiseParams,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            out_height: 60,
            out_width: 80,
            noise: NoiseParams::default(),
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.noise.validate()?;
        if self.out_height == 0
            || self.out_width == 0
            || self.out_height > self.camera.height
            || self.out_width > self.camera.width
        {
            return Err(invalid("output resolution must be non-empty and no larger than the sensor"));
        }
        Ok(())
    }

    /// Clean frame at output resolution for a body state.
    pub fn clean(&self, world: &World, state: &RobotState) -> DepthFrame {
        let (o, rot) = self.camera.pose(&state.position(), &state.attitude());
        let full = self.camera.render(world, &o, &rot);
        full.downsample(self.out_height, self.out_width)
            .expect("validated output resolution")
    }

    pub fn noisy<R: Rng + ?Sized>(&self, clean: &DepthFrame, rng: &mut R) -> DepthFrame {
        corrupt(clean, &self.noise, rng)
    }
}

/// Millimetre value stored in 16-bit depth images for normalized depth `x`.
pub fn depth_to_mm(x: f32, max_range: f64) -> u16 {
    (x as f64 * max_range * 1000.0).round().clamp(1.0, 65534.0) as u16
}

pub fn mm_to_depth(mm: u16, max_range: f64) -> f32 {
    (mm as f64 / (max_range * 1000.0)) as f32
}

/// Writes `<stem>_depth.pgm` (16-bit millimetres, 0 = invalid),
/// `<stem>_val.pgm` (8-bit, 255 = valid) and `<stem>_seg.pgm` (instance IDs,
/// 8-bit when they fit, 16-bit otherwise).
pub fn export_frame(frame: &DepthFrame, dir: &Path, stem: &str, max_range: f64) -> Result<()> {
    let (h, w) = frame.dims();
    let depth: Vec<u16> = (0..frame.len())
        .map(|i| if frame.is_valid(i) { depth_to_mm(frame.x()[i], max_range) } else { 0 })
        .collect();
    Pgm { width: w, height: h, maxval: 65535, data: depth }.write(&dir.join(format!("{stem}_depth.pgm")))?;
    let val = frame.val().iter().map(|v| if *v == 1 { 255 } else { 0 }).collect();
    Pgm { width: w, height: h, maxval: 255, data: val }.write(&dir.join(format!("{stem}_val.pgm")))?;
    let max_id = frame.seg().iter().copied().max().unwrap_or(0);
    let maxval = if max_id < 256 { 255 } else { 65535 };
    Pgm { width: w, height: h, maxval, data: frame.seg().to_vec() }.write(&dir.join(format!("{stem}_seg.pgm")))?;
    Ok(())
}

/// 8-bit grey image of a depth or reconstruction grid for inspection.
pub fn grid_to_pgm(values: &[f32], h: usize, w: usize) -> Pgm {
    Pgm {
        width: w,
        height: h,
        maxval: 255,
        data: values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u16).collect(),
    }
}
