//! Simulated vehicle behind the planner's [`Vehicle`] interface, and the
//! ground-truth geometric collision predictor used for oracle-swap runs.

use std::cell::Cell;
use std::rc::Rc;

use nalgebra::{Rotation3, Vector3};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::planner::{
    CollisionPredictor, CycleRecord, GoalVector, MotionPrimitiveLibrary, Observation, Vehicle, VehicleStatus, GAMMA,
};
use crate::render::SensorConfig;
use crate::sim::dynamics::{Action, DynamicsParams, PartialState, RobotState, StateCovariance};
use crate::sim::episode::execute_action;
use crate::sim::world::World;

/// Current ground-truth pose `(position, yaw)`, shared with the oracle.
pub type PoseProbe = Rc<Cell<(Vector3<f64>, f64)>>;

/// Steps (1-based) at whose end the sequence has collided, or `None`.
/// Every step is executed relative to the starting yaw, as the planner
/// intends a constant primitive.
pub fn rollout_first_collision(
    world: &World,
    start: &RobotState,
    action: &Action,
    horizon: usize,
    dyn_p: &DynamicsParams,
    substeps: usize,
) -> Option<usize> {
    let mut s = *start;
    let anchor = start.yaw();
    (0..horizon).find(|_| execute_action(world, &mut s, action, anchor, dyn_p, substeps))
}

/// Ground-truth predictor: rolls every sequence out from the true pose with
/// each queried partial state and scores 1 from the colliding step on.
pub struct OraclePredictor<'a> {
    pub world: &'a World,
    pub dynamics: DynamicsParams,
    pub substeps: usize,
    pub probe: PoseProbe,
}

impl CollisionPredictor for OraclePredictor<'_> {
    fn predict(
        &mut self,
        _obs: &Observation,
        states: &[[f64; GAMMA]],
        library: &MotionPrimitiveLibrary,
    ) -> Result<Vec<Vec<Vec<f32>>>> {
        let (pos, yaw) = self.probe.get();
        Ok(states
            .iter()
            .map(|s| {
                let start = RobotState::from_partial(pos, yaw, &PartialState(*s));
                library
                    .primitives
                    .iter()
                    .map(|p| {
                        let hit = rollout_first_collision(
                            self.world,
                            &start,
                            &p.action,
                            library.horizon,
                            &self.dynamics,
                            self.substeps,
                        );
                        (0..library.horizon)
                            .map(|k| if hit.is_some_and(|h| k >= h) { 1.0 } else { 0.0 })
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }
}

/// Counts decisions that pick a sequence whose ground-truth rollout
/// collides while a non-colliding one exists in the library.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SafetyAudit {
    pub cycles: usize,
    pub violations: usize,
    /// Cycles where every library sequence collides.
    pub doomed: usize,
}

pub struct SimVehicle<'a> {
    pub world: &'a World,
    pub sensor: SensorConfig,
    pub dynamics: DynamicsParams,
    pub substeps: usize,
    pub covariance: StateCovariance,
    /// Goal direction in the world frame.
    pub goal_world: Vector3<f64>,
    /// Arrival when `x` reaches this value.
    pub finish_x: f64,
    pub corrupt: bool,
    pub noise_rng: ChaCha8Rng,
    pub state: RobotState,
    pub path: Vec<Vector3<f64>>,
    pub min_clearance: f64,
    pub probe: PoseProbe,
    /// When set, every decision is audited against ground-truth rollouts.
    pub audit: Option<(SafetyAudit, MotionPrimitiveLibrary)>,
}

impl<'a> SimVehicle<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        world: &'a World,
        sensor: SensorConfig,
        dynamics: DynamicsParams,
        substeps: usize,
        start: RobotState,
        finish_x: f64,
        corrupt: bool,
        noise_rng: ChaCha8Rng,
    ) -> Self {
        let radius = dynamics.radius;
        Self {
            world,
            sensor,
            dynamics,
            substeps,
            covariance: StateCovariance::default(),
            goal_world: Vector3::x(),
            finish_x,
            corrupt,
            noise_rng,
            state: start,
            path: vec![start.position()],
            min_clearance: world.clearance(&start.position(), 10.0) - radius,
            probe: Rc::new(Cell::new((start.position(), start.yaw()))),
            audit: None,
        }
    }

    pub fn distance(&self) -> f64 {
        self.path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

impl Vehicle for SimVehicle<'_> {
    fn observe(&mut self) -> Result<Observation> {
        self.probe.set((self.state.position(), self.state.yaw()));
        let clean = self.sensor.clean(self.world, &self.state);
        let frame = if self.corrupt { self.sensor.noisy(&clean, &mut self.noise_rng) } else { clean };
        let g = Rotation3::from_axis_angle(&Vector3::z_axis(), -self.state.yaw()) * self.goal_world;
        Ok(Observation {
            frame,
            state: self.state.partial(),
            covariance: self.covariance,
            goal: GoalVector::new([g.x, g.y, g.z])?,
        })
    }

    fn on_decision(&mut self, record: &CycleRecord) {
        let Some((audit, library)) = self.audit.as_mut() else {
            return;
        };
        // Rebuilt from the observed pose and partial state, exactly as the
        // oracle sees it, so rounding cannot separate the two rollouts.
        let start = RobotState::from_partial(self.state.position(), self.state.yaw(), &self.state.partial());
        let collides: Vec<bool> = library
            .primitives
            .iter()
            .map(|p| {
                rollout_first_collision(self.world, &start, &p.action, library.horizon, &self.dynamics, self.substeps)
                    .is_some()
            })
            .collect();
        audit.cycles += 1;
        if collides.iter().all(|c| *c) {
            audit.doomed += 1;
        } else if collides[record.selection.index] {
            audit.violations += 1;
        }
    }

    fn execute(&mut self, action: &Action) -> Result<VehicleStatus> {
        let anchor = self.state.yaw();
        let mut collided = false;
        for _ in 0..self.substeps {
            crate::sim::step_dynamics(&mut self.state, action, anchor, &self.dynamics, self.dynamics.dt);
            let p = self.state.position();
            self.path.push(p);
            self.min_clearance = self.min_clearance.min(self.world.clearance(&p, 10.0) - self.dynamics.radius);
            if self.world.check_collision(&p, self.dynamics.radius) {
                collided = true;
                break;
            }
        }
        Ok(if collided {
            VehicleStatus::Collided
        } else if self.state.position().x >= self.finish_x {
            VehicleStatus::Arrived
        } else {
            VehicleStatus::Running
        })
    }
}
