//! Randomized action-sequence rollouts recorded until collision or timeout.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{step_dynamics, wrap_angle, Action, DynamicsParams, PartialState, RobotState};
use super::world::World;
use crate::error::{invalid, Result};
use crate::render::{DepthFrame, SensorConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Duration of one action step (s).
    pub action_dt: f64,
    /// Maximum number of action steps before timeout.
    pub max_steps: usize,
    /// Primitive durations are drawn from
    /// `min_primitive_steps..=max_primitive_steps`.
    pub min_primitive_steps: usize,
    pub max_primitive_steps: usize,
    /// Commanded speed range (m/s).
    pub speed: [f64; 2],
    /// Steering limit (rad), kept inside the horizontal field of view.
    pub max_steer: f64,
    /// Climb-angle limit (rad), kept inside the vertical field of view.
    pub max_climb: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            action_dt: 0.25,
            max_steps: 40,
            min_primitive_steps: 1,
            max_primitive_steps: 10,
            speed: [0.3, 1.5],
            max_steer: 40f64.to_radians(),
            max_climb: 20f64.to_radians(),
        }
    }
}

impl EpisodeConfig {
    /// Integration substeps per action step.
    pub fn substeps(&self, dyn_p: &DynamicsParams) -> usize {
        ((self.action_dt / dyn_p.dt).round() as usize).max(1)
    }
}

/// Primitive with reference `speed` along a direction `climb` above the
/// horizontal, steered by `steer`.
pub fn primitive_action(speed: f64, steer: f64, climb: f64) -> Action {
    Action::new([speed * climb.cos(), 0.0, speed * climb.sin()], steer)
}

pub fn random_action<R: Rng + ?Sized>(cfg: &EpisodeConfig, rng: &mut R) -> Action {
    let speed = rng.gen_range(cfg.speed[0]..=cfg.speed[1]);
    let steer = rng.gen_range(-cfg.max_steer..=cfg.max_steer);
    let climb = rng.gen_range(-cfg.max_climb..=cfg.max_climb);
    primitive_action(speed, steer, climb)
}

/// One recorded action step.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStep {
    /// Clean frame observed before the action.
    pub frame: DepthFrame,
    pub state: PartialState,
    /// Yaw when the frame was taken; used only to re-anchor actions.
    pub yaw: f64,
    /// Executed action with `delta` as an absolute heading.
    pub heading: f64,
    pub v_r: [f64; 3],
}

impl EpisodeStep {
    /// The executed action expressed relative to yaw `anchor`.
    pub fn action_from(&self, anchor: f64) -> Action {
        Action::new(self.v_r, wrap_angle(self.heading - anchor))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollisionEpisode {
    pub steps: Vec<EpisodeStep>,
    /// Index of the action step during which the first collision happened.
    pub collided_at: Option<usize>,
}

/// Executes `action` anchored at `anchor` for `substeps` integration steps;
/// returns true on collision (the state stops at the colliding substep).
pub fn execute_action(
    world: &World,
    state: &mut RobotState,
    action: &Action,
    anchor: f64,
    dyn_p: &DynamicsParams,
    substeps: usize,
) -> bool {
    for _ in 0..substeps {
        step_dynamics(state, action, anchor, dyn_p, dyn_p.dt);
        if world.check_collision(&state.position(), dyn_p.radius) {
            return true;
        }
    }
    false
}

/// Random collision-free start pose inside the world's sections, at least
/// `margin` metres clear of anything.
pub fn random_start<R: Rng + ?Sized>(world: &World, dyn_p: &DynamicsParams, margin: f64, rng: &mut R) -> Result<RobotState> {
    let area = world
        .sections()
        .iter()
        .copied()
        .reduce(|a, b| crate::sim::world::Rect::new(a.x0.min(b.x0), a.y0.min(b.y0), a.x1.max(b.x1), a.y1.max(b.y1)))
        .ok_or_else(|| invalid("world has no sections to sample a start from"))?;
    let (z0, z1) = match world.bounds() {
        Some(b) => (b.floor + dyn_p.radius + margin, (b.ceiling - dyn_p.radius - margin).min(2.5)),
        None => (1.0, 2.5),
    };
    for _ in 0..10_000 {
        let p = Vector3::new(
            rng.gen_range(area.x0..area.x1),
            rng.gen_range(area.y0..area.y1),
            rng.gen_range(z0..z1.max(z0 + 1e-6)),
        );
        if world.clearance(&p, 5.0) > dyn_p.radius + margin {
            let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            return Ok(RobotState::at_rest(p, yaw));
        }
    }
    Err(invalid("no collision-free start found"))
}

/// Executes random primitives from `start` until a collision or
/// `cfg.max_steps` action steps, recording clean frames and partial states.
pub fn rollout_episode<R: Rng + ?Sized>(
    world: &World,
    start: RobotState,
    cfg: &EpisodeConfig,
    sensor: &SensorConfig,
    dyn_p: &DynamicsParams,
    rng: &mut R,
) -> Result<CollisionEpisode> {
    if world.check_collision(&start.position(), dyn_p.radius) {
        return Err(invalid("episode start pose is in collision"));
    }
    let substeps = cfg.substeps(dyn_p);
    let mut state = start;
    let mut steps = Vec::with_capacity(cfg.max_steps);
    let mut remaining = 0usize;
    let mut current = Action::default();
    let mut anchor = state.yaw();
    for k in 0..cfg.max_steps {
        if remaining == 0 {
            current = random_action(cfg, rng);
            anchor = state.yaw();
            remaining = rng.gen_range(cfg.min_primitive_steps.max(1)..=cfg.max_primitive_steps.max(cfg.min_primitive_steps).max(1));
        }
        remaining -= 1;
        steps.push(EpisodeStep {
            frame: sensor.clean(world, &state),
            state: state.partial(),
            yaw: state.yaw(),
            heading: anchor + current.delta,
            v_r: current.v_r,
        });
        if execute_action(world, &mut state, &current, anchor, dyn_p, substeps) {
            return Ok(CollisionEpisode {
                steps,
                collided_at: Some(k),
            });
        }
    }
    Ok(CollisionEpisode {
        steps,
        collided_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::Obstacle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_sensor() -> SensorConfig {
        let mut s = SensorConfig::default();
        s.camera.height = 12;
        s.camera.width = 16;
        s.out_height = 6;
        s.out_width = 8;
        s
    }

    #[test]
    fn empty_world_times_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = EpisodeConfig {
            max_steps: 12,
            ..Default::default()
        };
        let start = RobotState::at_rest(Vector3::new(0.0, 0.0, 1.5), 0.0);
        let ep = rollout_episode(&World::empty(), start, &cfg, &small_sensor(), &DynamicsParams::default(), &mut rng).unwrap();
        assert_eq!(ep.collided_at, None);
        assert_eq!(ep.steps.len(), 12);
    }

    #[test]
    fn start_in_collision_rejected() {
        let w = World::new(vec![Obstacle::cylinder([0.0, 0.0], 0.5, 0.0, 3.0)], None, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = RobotState::at_rest(Vector3::new(0.2, 0.0, 1.5), 0.0);
        assert!(rollout_episode(&w, start, &EpisodeConfig::default(), &small_sensor(), &DynamicsParams::default(), &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_episode() {
        let w = World::new(vec![Obstacle::cylinder([4.0, 0.5], 0.5, 0.0, 3.0)], None, vec![]);
        let start = RobotState::at_rest(Vector3::new(0.0, 0.0, 1.5), 0.0);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rollout_episode(&w, start, &EpisodeConfig::default(), &small_sensor(), &DynamicsParams::default(), &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
    }
}
