//! Motion-primitive library: constant reference velocity and steering over
//! the horizon, on a steering x climb x speed grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sim::dynamics::Action;
use crate::sim::episode::primitive_action;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryConfig {
    /// Number of steering angles, evenly spaced over `[-max_steer, max_steer]`.
    pub steering_count: usize,
    pub max_steer: f64,
    /// Number of climb angles, evenly spaced over `[-max_climb, max_climb]`.
    pub climb_count: usize,
    pub max_climb: f64,
    pub speeds: Vec<f64>,
    /// Steps per sequence (`T`).
    pub horizon: usize,
    /// Camera field of view the grid must stay inside (rad).
    pub hfov: f64,
    pub vfov: f64,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        Self {
            steering_count: 9,
            max_steer: 40f64.to_radians(),
            climb_count: 5,
            max_climb: 20f64.to_radians(),
            speeds: vec![1.0],
            horizon: 10,
            hfov: 87f64.to_radians(),
            vfov: 58f64.to_radians(),
        }
    }
}

impl LibraryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steering_count == 0 || self.climb_count == 0 || self.speeds.is_empty() || self.horizon == 0 {
            return Err(invalid("library grids and horizon must be non-empty"));
        }
        if self.steering_count % 2 == 0 || self.climb_count % 2 == 0 {
            return Err(invalid("grid counts must be odd so the straight primitive exists"));
        }
        if self.max_steer < 0.0 || self.max_steer > self.hfov / 2.0 || self.max_climb < 0.0 || self.max_climb > self.vfov / 2.0 {
            return Err(invalid("primitive angles must stay inside half the field of view"));
        }
        if self.speeds.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("speeds must be positive"));
        }
        let mut sorted = self.speeds.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.speeds.len() {
            return Err(invalid("speeds must be distinct"));
        }
        Ok(())
    }
}

fn grid(count: usize, max: f64) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    let half = (count / 2) as f64;
    (0..count).map(|i| max * (i as f64 - half) / half).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub speed: f64,
    pub steer: f64,
    pub climb: f64,
    pub action: Action,
}

impl Primitive {
    /// Horizon-end velocity direction, `R_z(delta) v_r`, normalized.
    pub fn end_direction(&self) -> [f64; 3] {
        let v = self.action.velocity_in_anchor();
        let n = v.norm();
        if n == 0.0 {
            return [0.0; 3];
        }
        [v.x / n, v.y / n, v.z / n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionPrimitiveLibrary {
    pub primitives: Vec<Primitive>,
    pub horizon: usize,
}

impl MotionPrimitiveLibrary {
    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Every primitive as `T` repeated actions in network layout.
    pub fn sequences_f32(&self) -> Vec<Vec<[f32; 4]>> {
        self.primitives.iter().map(|p| vec![p.action.to_f32(); self.horizon]).collect()
    }

    /// Index of the straight-and-level primitive at the lowest speed.
    pub fn straight_index(&self) -> Option<usize> {
        self.primitives.iter().position(|p| p.steer == 0.0 && p.climb == 0.0)
    }
}

/// Speed-major, then climb, then steering order.
pub fn build_library(cfg: &LibraryConfig) -> Result<MotionPrimitiveLibrary> {
    cfg.validate()?;
    let mut primitives = Vec::new();
    for &speed in &cfg.speeds {
        for climb in grid(cfg.climb_count, cfg.max_climb) {
            for steer in grid(cfg.steering_count, cfg.max_steer) {
                primitives.push(Primitive {
                    speed,
                    steer,
                    climb,
                    action: primitive_action(speed, steer, climb),
                });
            }
        }
    }
    Ok(MotionPrimitiveLibrary {
        primitives,
        horizon: cfg.horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_library() {
        let c = LibraryConfig::default();
        let lib = build_library(&c).unwrap();
        assert_eq!(lib.len(), 45);
        assert!(lib.primitives.iter().all(|p| p.steer.abs() <= c.hfov / 2.0 && p.climb.abs() <= c.vfov / 2.0));
        let straight = lib.primitives.iter().filter(|p| p.steer == 0.0 && p.climb == 0.0).count();
        assert_eq!(straight, 1);
        let s = lib.primitives[lib.straight_index().unwrap()];
        assert_eq!(s.end_direction(), [1.0, 0.0, 0.0]);
        assert_eq!(lib.sequences_f32()[0].len(), 10);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = LibraryConfig::default();
        c.steering_count = 0;
        assert!(build_library(&c).is_err());
        let mut c = LibraryConfig::default();
        c.max_steer = 60f64.to_radians();
        assert!(build_library(&c).is_err());
        let mut c = LibraryConfig::default();
        c.speeds = vec![];
        assert!(build_library(&c).is_err());
    }
}
