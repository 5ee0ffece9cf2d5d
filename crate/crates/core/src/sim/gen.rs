//! Three-section procedural worlds: large obstacles, a mixed section, and a
//! thin-rod section, each placed by Poisson-disc sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::poisson::poisson_disc_sample;
use super::world::{Bounds, Obstacle, Rect, World};
use crate::error::{invalid, Result};

/// Obstacle density class with its sampling radii `(r1, r2, r3, r4)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Sparse,
    Medium,
    Dense,
}

impl Environment {
    pub const ALL: [Environment; 3] = [Environment::Sparse, Environment::Medium, Environment::Dense];

    pub fn radii(self) -> [f64; 4] {
        match self {
            Environment::Sparse => [6.5, 6.5, 4.5, 3.5],
            Environment::Medium => [6.25, 6.25, 3.5, 3.0],
            Environment::Dense => [6.0, 6.0, 3.0, 2.5],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Environment::Sparse => "sparse",
            Environment::Medium => "medium",
            Environment::Dense => "dense",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldGenParams {
    /// Unscaled sampling radii for section 1 (large), section 2 (large, thin)
    /// and section 3 (thin).
    pub radii: [f64; 4],
    /// Multiplier applied to every radius.
    pub radius_scale: f64,
    /// Side length of each square section (m).
    pub section_length: f64,
    pub sections: usize,
    /// Footprint range of large obstacles (m).
    pub large_footprint: [f64; 2],
    /// Height range of large obstacles (m).
    pub large_height: [f64; 2],
    /// Thin-rod cross-section (m).
    pub rod_width: f64,
    pub ceiling: f64,
    /// Minimum horizontal gap between a rod and a large obstacle (m).
    pub rod_margin: f64,
}

impl Default for WorldGenParams {
    fn default() -> Self {
        Self::desk(Environment::Sparse)
    }
}

impl WorldGenParams {
    /// Reduced-scale configuration: three 15 m sections.
    pub fn desk(env: Environment) -> Self {
        Self {
            radii: env.radii(),
            radius_scale: 0.35,
            section_length: 15.0,
            sections: 3,
            large_footprint: [0.3, 1.5],
            large_height: [1.0, 4.0],
            rod_width: 0.04,
            ceiling: 4.0,
            rod_margin: 0.2,
        }
    }

    /// Full-scale configuration: three 50 m sections at the unscaled radii.
    pub fn paper(env: Environment) -> Self {
        Self {
            radius_scale: 1.0,
            section_length: 50.0,
            ..Self::desk(env)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.iter().any(|r| !(*r > 0.0)) || !(self.radius_scale > 0.0) {
            return Err(invalid("world radii must be positive"));
        }
        if !(self.section_length > 0.0) || self.sections == 0 {
            return Err(invalid("world needs at least one section of positive length"));
        }
        if !(self.large_footprint[0] > 0.0 && self.large_footprint[1] >= self.large_footprint[0]) {
            return Err(invalid("large footprint range invalid"));
        }
        if !(self.large_height[0] > 0.0 && self.large_height[1] >= self.large_height[0]) {
            return Err(invalid("large height range invalid"));
        }
        if !(self.rod_width > 0.0 && self.ceiling > 0.0) {
            return Err(invalid("rod width and ceiling must be positive"));
        }
        Ok(())
    }

    /// Course length along +x.
    pub fn course_length(&self) -> f64 {
        self.section_length * self.sections as f64
    }

    pub fn section_rect(&self, i: usize) -> Rect {
        let l = self.section_length;
        Rect::new(i as f64 * l, -l / 2.0, (i + 1) as f64 * l, l / 2.0)
    }
}

fn large_obstacle(p: [f64; 2], params: &WorldGenParams, rng: &mut ChaCha8Rng) -> Obstacle {
    let [f0, f1] = params.large_footprint;
    let height = rng.gen_range(params.large_height[0]..=params.large_height[1]);
    if rng.gen_bool(0.5) {
        let d = rng.gen_range(f0..=f1);
        Obstacle::cylinder(p, d / 2.0, 0.0, height)
    } else {
        let half = [rng.gen_range(f0..=f1) / 2.0, rng.gen_range(f0..=f1) / 2.0];
        let yaw = rng.gen_range(0.0..std::f64::consts::PI);
        Obstacle::cuboid(p, half, yaw, 0.0, height)
    }
}

/// Deterministic world for `(params, seed)`. Section `i` spans
/// `x in [i L, (i+1) L]`, `y in [-L/2, L/2]`; section 1 holds large
/// obstacles, section 2 independent large and thin samplings, and every
/// later section thin rods only.
pub fn generate_world(params: &WorldGenParams, seed: u64) -> Result<World> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [r1, r2, r3, r4] = params.radii.map(|r| r * params.radius_scale);
    let mut large = Vec::new();
    let mut thin_pts = Vec::new();
    for i in 0..params.sections {
        let rect = params.section_rect(i);
        match i {
            0 => {
                for p in poisson_disc_sample(rect, r1, &mut rng) {
                    large.push(large_obstacle(p, params, &mut rng));
                }
            }
            1 => {
                for p in poisson_disc_sample(rect, r2, &mut rng) {
                    large.push(large_obstacle(p, params, &mut rng));
                }
                thin_pts.extend(poisson_disc_sample(rect, r3, &mut rng));
            }
            _ => thin_pts.extend(poisson_disc_sample(rect, r4, &mut rng)),
        }
    }
    let rod_r = params.rod_width / 2.0;
    let mut obstacles = large;
    let mut next_id: u16 = 1;
    for p in thin_pts {
        let clear = obstacles
            .iter()
            .all(|o| (o.center[0] - p[0]).hypot(o.center[1] - p[1]) > o.bound_radius() + rod_r + params.rod_margin);
        if !clear {
            continue;
        }
        let mut rod = Obstacle::cylinder(p, rod_r, 0.0, params.ceiling);
        rod.instance = next_id;
        next_id = next_id.checked_add(1).ok_or_else(|| invalid("more than 65535 thin obstacles"))?;
        obstacles.push(rod);
    }
    let sections = (0..params.sections).map(|i| params.section_rect(i)).collect();
    Ok(World::new(
        obstacles,
        Some(Bounds {
            floor: 0.0,
            ceiling: params.ceiling,
        }),
        sections,
    ))
}
