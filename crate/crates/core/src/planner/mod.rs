//! Uncertainty-aware motion-primitive planning in a receding horizon.
//!
//! The planner only ever sees an [`Observation`]: the corrupted frame, the
//! estimated partial state with its covariance, and the goal direction in
//! the vehicle frame. Ground truth stays behind the [`Vehicle`] trait.

pub mod library;
pub mod ut;

use serde::{Deserialize, Serialize};

pub use library::{build_library, LibraryConfig, MotionPrimitiveLibrary, Primitive};
pub use ut::{psd_sqrt, sigma_points, SigmaPointSet, DEFAULT_LAMBDA, GAMMA};

use crate::cpn::Cpn;
use crate::error::{invalid, Result};
use crate::render::DepthFrame;
use crate::sim::dynamics::{Action, PartialState, StateCovariance};
use crate::vae::Vae;

/// Unit goal direction in the vehicle frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalVector([f64; 3]);

impl GoalVector {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(invalid("goal vector must be finite and non-zero"));
        }
        Ok(Self([v[0] / n, v[1] / n, v[2] / n]))
    }

    pub fn get(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, d: [f64; 3]) -> f64 {
        self.0[0] * d[0] + self.0[1] * d[1] + self.0[2] * d[2]
    }
}

/// What the planner is given each cycle.
#[derive(Clone, Debug)]
pub struct Observation {
    /// Corrupted depth frame.
    pub frame: DepthFrame,
    pub state: PartialState,
    pub covariance: StateCovariance,
    pub goal: GoalVector,
}

/// Per-step collision probabilities for every state and every library
/// sequence, indexed `[state][sequence][step]`.
pub trait CollisionPredictor {
    fn predict(
        &mut self,
        obs: &Observation,
        states: &[[f64; GAMMA]],
        library: &MotionPrimitiveLibrary,
    ) -> Result<Vec<Vec<Vec<f32>>>>;
}

fn states_f32(states: &[[f64; GAMMA]]) -> Vec<[f32; 6]> {
    states.iter().map(|s| s.map(|v| v as f32)).collect()
}

/// Frozen VAE encoder feeding a modular CPN.
pub struct ModularPredictor<'a> {
    pub vae: &'a Vae,
    pub cpn: &'a Cpn,
}

impl CollisionPredictor for ModularPredictor<'_> {
    fn predict(
        &mut self,
        obs: &Observation,
        states: &[[f64; GAMMA]],
        library: &MotionPrimitiveLibrary,
    ) -> Result<Vec<Vec<Vec<f32>>>> {
        let mu = self.vae.encode(&obs.frame)?.mu;
        let x = self.cpn.latent_input(&mu)?;
        self.cpn.predict_shared(&x, &states_f32(states), &library.sequences_f32())
    }
}

/// End-to-end CPN on the raw frame.
pub struct EndToEndPredictor<'a> {
    pub cpn: &'a Cpn,
}

impl CollisionPredictor for EndToEndPredictor<'_> {
    fn predict(
        &mut self,
        obs: &Observation,
        states: &[[f64; GAMMA]],
        library: &MotionPrimitiveLibrary,
    ) -> Result<Vec<Vec<Vec<f32>>>> {
        let x = self.cpn.frame_input(&obs.frame)?;
        self.cpn.predict_shared(&x, &states_f32(states), &library.sequences_f32())
    }
}

/// `c_uac` for every library sequence: the normalized-UT-weighted mean of
/// the per-point scores at each step, maximized over the horizon. Identical
/// sigma points are evaluated once.
pub fn uncertainty_aware_scores<P: CollisionPredictor + ?Sized>(
    predictor: &mut P,
    obs: &Observation,
    sigma: &SigmaPointSet,
    library: &MotionPrimitiveLibrary,
) -> Result<Vec<f64>> {
    let unique = sigma.unique_normalized();
    let states: Vec<[f64; GAMMA]> = unique.iter().map(|(p, _)| *p).collect();
    let pred = predictor.predict(obs, &states, library)?;
    if pred.len() != states.len() || pred.iter().any(|p| p.len() != library.len()) {
        return Err(invalid("predictor returned the wrong number of scores"));
    }
    Ok((0..library.len())
        .map(|m| {
            (0..library.horizon)
                .map(|k| unique.iter().zip(&pred).map(|((_, w), p)| w * p[m][k] as f64).sum::<f64>())
                .fold(0.0, f64::max)
                .clamp(0.0, 1.0)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Sequences scoring below this are safe.
    pub threshold: f64,
    /// UT spread parameter.
    pub lambda: f64,
    /// Speed factor applied to the fallback primitive.
    pub fallback_speed_scale: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            threshold: 0.3,
            lambda: DEFAULT_LAMBDA,
            fallback_speed_scale: 0.5,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) || !(self.fallback_speed_scale > 0.0 && self.fallback_speed_scale <= 1.0) {
            return Err(invalid("threshold must be in [0, 1] and fallback speed scale in (0, 1]"));
        }
        if !(GAMMA as f64 + self.lambda > 0.0) {
            return Err(invalid("gamma + lambda must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    /// The safe set was empty and the minimum-score primitive was taken.
    pub unsafe_fallback: bool,
    /// Action to execute (speed-reduced on fallback).
    pub action: Action,
}

/// Among sequences scoring below `threshold`, the one whose end velocity
/// direction best aligns with the goal; ties go to the lower index. With an
/// empty safe set, the minimum-score sequence at reduced speed.
pub fn select_action(
    scores: &[f64],
    library: &MotionPrimitiveLibrary,
    goal: &GoalVector,
    cfg: &PlannerConfig,
) -> Result<Selection> {
    if scores.len() != library.len() || library.is_empty() {
        return Err(invalid(format!("{} scores for {} primitives", scores.len(), library.len())));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (s, p)) in scores.iter().zip(&library.primitives).enumerate() {
        if *s < cfg.threshold {
            let a = goal.dot(p.end_direction());
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((i, a));
            }
        }
    }
    if let Some((index, _)) = best {
        return Ok(Selection {
            index,
            unsafe_fallback: false,
            action: library.primitives[index].action,
        });
    }
    let index = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s < scores[b] { i } else { b });
    let mut action = library.primitives[index].action;
    action.v_r = action.v_r.map(|v| v * cfg.fallback_speed_scale);
    Ok(Selection {
        index,
        unsafe_fallback: true,
        action,
    })
}

/// One planning cycle's decision and diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub selection: Selection,
    pub scores: Vec<f64>,
    pub safe_count: usize,
}

/// Reported by the vehicle after executing an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VehicleStatus {
    Running,
    Collided,
    Arrived,
}

/// The planner's only access to the world.
pub trait Vehicle {
    fn observe(&mut self) -> Result<Observation>;
    /// Executes the first action of the chosen sequence for one planning period.
    fn execute(&mut self, action: &Action) -> Result<VehicleStatus>;
    /// Called with every decision before it is executed.
    fn on_decision(&mut self, _record: &CycleRecord) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissionLog {
    pub outcome: Outcome,
    pub cycles: Vec<CycleRecord>,
}

/// Scores the library for one observation and selects an action.
pub fn plan_cycle<P: CollisionPredictor + ?Sized>(
    predictor: &mut P,
    obs: &Observation,
    library: &MotionPrimitiveLibrary,
    cfg: &PlannerConfig,
) -> Result<(Selection, Vec<f64>)> {
    let sigma = sigma_points(&obs.state.0, &obs.covariance.0, cfg.lambda)?;
    let scores = uncertainty_aware_scores(predictor, obs, &sigma, library)?;
    let selection = select_action(&scores, library, &obs.goal, cfg)?;
    Ok((selection, scores))
}

/// Observe, score, select, execute the first action; repeat until the
/// vehicle reports arrival or collision, or `max_cycles` pass.
pub fn receding_horizon_run<V: Vehicle + ?Sized, P: CollisionPredictor + ?Sized>(
    vehicle: &mut V,
    predictor: &mut P,
    library: &MotionPrimitiveLibrary,
    cfg: &PlannerConfig,
    max_cycles: usize,
) -> Result<MissionLog> {
    cfg.validate()?;
    let mut cycles = Vec::new();
    for cycle in 0..max_cycles {
        let obs = vehicle.observe()?;
        let (selection, scores) = plan_cycle(predictor, &obs, library, cfg)?;
        let record = CycleRecord {
            cycle,
            selection,
            safe_count: scores.iter().filter(|s| **s < cfg.threshold).count(),
            scores,
        };
        vehicle.on_decision(&record);
        let status = vehicle.execute(&record.selection.action)?;
        cycles.push(record);
        match status {
            VehicleStatus::Running => {}
            VehicleStatus::Collided => {
                return Ok(MissionLog {
                    outcome: Outcome::Collision,
                    cycles,
                })
            }
            VehicleStatus::Arrived => {
                return Ok(MissionLog {
                    outcome: Outcome::Success,
                    cycles,
                })
            }
        }
    }
    Ok(MissionLog {
        outcome: Outcome::Timeout,
        cycles,
    })
}
