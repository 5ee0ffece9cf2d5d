//! Velocity-tracking quadrotor model and the planner-facing partial state.

use nalgebra::{Matrix6, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const GRAVITY: f64 = 9.81;

/// Velocity standard deviation used for the default state covariance (m/s).
pub const SIGMA_V: f64 = 0.2;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let mut r = a.rem_euclid(t);
    if r > std::f64::consts::PI {
        r -= t;
    }
    r
}

/// `s_t = [v_x, v_y, v_z, omega, roll, pitch]` with velocity in the
/// yaw-aligned vehicle frame (x forward, y left, z up).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PartialState(pub [f64; 6]);

impl PartialState {
    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn yaw_rate(&self) -> f64 {
        self.0[3]
    }

    pub fn roll(&self) -> f64 {
        self.0[4]
    }

    pub fn pitch(&self) -> f64 {
        self.0[5]
    }

    pub fn to_f32(&self) -> [f32; 6] {
        self.0.map(|v| v as f32)
    }
}

/// 6x6 covariance of the partial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateCovariance(pub Matrix6<f64>);

impl StateCovariance {
    /// `diag(s^2, s^2, s^2, 0, 0, 0)`.
    pub fn velocity_only(sigma_v: f64) -> Self {
        let s2 = sigma_v * sigma_v;
        Self(Matrix6::from_diagonal(&nalgebra::Vector6::new(s2, s2, s2, 0.0, 0.0, 0.0)))
    }

    pub fn zero() -> Self {
        Self(Matrix6::zeros())
    }
}

impl Default for StateCovariance {
    fn default() -> Self {
        Self::velocity_only(SIGMA_V)
    }
}

/// One planner action: reference velocity in the frame rotated by `delta`
/// from the sequence's anchor yaw, plus the steering angle `delta` (rad).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Action {
    pub v_r: [f64; 3],
    pub delta: f64,
}

impl Action {
    pub fn new(v_r: [f64; 3], delta: f64) -> Self {
        Self { v_r, delta }
    }

    /// Reference velocity in the anchor's vehicle frame, `R_z(delta) v_r`.
    pub fn velocity_in_anchor(&self) -> Vector3<f64> {
        let (s, c) = self.delta.sin_cos();
        Vector3::new(c * self.v_r[0] - s * self.v_r[1], s * self.v_r[0] + c * self.v_r[1], self.v_r[2])
    }

    pub fn to_f32(&self) -> [f32; 4] {
        [self.v_r[0] as f32, self.v_r[1] as f32, self.v_r[2] as f32, self.delta as f32]
    }

    pub fn from_f32(a: [f32; 4]) -> Self {
        Self::new([a[0] as f64, a[1] as f64, a[2] as f64], a[3] as f64)
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Self {
        Self::new([self.v_r[0], -self.v_r[1], self.v_r[2]], -self.delta)
    }

    pub fn speed(&self) -> f64 {
        Vector3::from(self.v_r).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsParams {
    /// Velocity time constant (s).
    pub tau_v: f64,
    /// Yaw time constant (s).
    pub tau_yaw: f64,
    /// Yaw-rate limit (rad/s).
    pub max_yaw_rate: f64,
    /// Reference speed limit (m/s).
    pub v_max: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Collision sphere radius (m).
    pub radius: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            tau_v: 0.3,
            tau_yaw: 0.2,
            max_yaw_rate: 2.0,
            v_max: 1.5,
            dt: 0.05,
            radius: 0.3,
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<()> {
        if ![self.tau_v, self.tau_yaw, self.max_yaw_rate, self.v_max, self.dt, self.radius]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
        {
            return Err(invalid("dynamics parameters must be positive and finite"));
        }
        Ok(())
    }
}

/// Ground-truth vehicle state. Only [`RobotState::partial`] is meant for
/// the perception and planning side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    position: Vector3<f64>,
    yaw: f64,
    /// World-frame velocity.
    velocity: Vector3<f64>,
    yaw_rate: f64,
    roll: f64,
    pitch: f64,
}

impl RobotState {
    /// At rest at `position` facing `yaw`.
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
            velocity: Vector3::zeros(),
            yaw_rate: 0.0,
            roll: 0.0,
            pitch: 0.0,
        }
    }

    /// Same pose with a vehicle-frame velocity.
    pub fn with_body_velocity(mut self, v: Vector3<f64>) -> Self {
        self.velocity = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw) * v;
        self
    }

    /// State at `position` and `yaw` whose partial state is `s`.
    pub fn from_partial(position: Vector3<f64>, yaw: f64, s: &PartialState) -> Self {
        let mut out = Self::at_rest(position, yaw).with_body_velocity(s.velocity());
        out.yaw_rate = s.yaw_rate();
        out.roll = s.roll();
        out.pitch = s.pitch();
        out
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn world_velocity(&self) -> Vector3<f64> {
        self.velocity
    }

    /// Body attitude `R_z(yaw) R_y(pitch) R_x(roll)`.
    pub fn attitude(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), self.pitch)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll)
    }

    pub fn partial(&self) -> PartialState {
        let v = Rotation3::from_axis_angle(&Vector3::z_axis(), -self.yaw) * self.velocity;
        PartialState([v.x, v.y, v.z, self.yaw_rate, self.roll, self.pitch])
    }
}

/// Advances `state` by `dt` under `action` anchored at `anchor_yaw`:
/// exact first-order velocity tracking toward `R_z(anchor + delta) v_r`,
/// rate-limited first-order yaw tracking toward `anchor + delta`, roll and
/// pitch from the commanded acceleration, explicit position update.
pub fn step_dynamics(state: &mut RobotState, action: &Action, anchor_yaw: f64, p: &DynamicsParams, dt: f64) {
    let mut v_r = Vector3::from(action.v_r);
    let n = v_r.norm();
    if n > p.v_max {
        v_r *= p.v_max / n;
    }
    let heading = anchor_yaw + action.delta;
    let v_ref = Rotation3::from_axis_angle(&Vector3::z_axis(), heading) * v_r;
    let a_cmd = (v_ref - state.velocity) / p.tau_v;
    let a_body = Rotation3::from_axis_angle(&Vector3::z_axis(), -state.yaw) * a_cmd;

    let old_v = state.velocity;
    state.velocity += (v_ref - state.velocity) * (1.0 - (-dt / p.tau_v).exp());
    state.position += old_v * dt;

    let err = wrap_angle(heading - state.yaw);
    let rate = (err / p.tau_yaw).clamp(-p.max_yaw_rate, p.max_yaw_rate);
    // Never overshoot within one step.
    let turn = if (rate * dt).abs() > err.abs() { err } else { rate * dt };
    state.yaw_rate = if dt > 0.0 { turn / dt } else { 0.0 };
    state.yaw = wrap_angle(state.yaw + turn);
    state.roll = (-a_body.y / GRAVITY).atan();
    state.pitch = (a_body.x / GRAVITY).atan();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_only_moves_position() {
        let p = DynamicsParams::default();
        let mut s = RobotState::at_rest(Vector3::new(0.0, 0.0, 1.5), 0.7).with_body_velocity(Vector3::new(1.0, 0.2, 0.0));
        let before = s;
        step_dynamics(&mut s, &Action::new([1.0, 0.2, 0.0], 0.0), before.yaw(), &p, p.dt);
        assert!((s.partial().velocity() - before.partial().velocity()).norm() < 1e-12);
        assert!((s.yaw() - before.yaw()).abs() < 1e-12);
        assert_eq!(s.partial().roll(), 0.0);
        assert_eq!(s.partial().pitch(), 0.0);
        assert!((s.position() - before.position()).norm() > 0.0);
    }

    #[test]
    fn hover_from_rest_is_fixed() {
        let p = DynamicsParams::default();
        let mut s = RobotState::at_rest(Vector3::new(1.0, 2.0, 1.5), 0.0);
        for _ in 0..20 {
            step_dynamics(&mut s, &Action::default(), 0.0, &p, p.dt);
        }
        assert_eq!(s.position(), Vector3::new(1.0, 2.0, 1.5));
        assert_eq!(s.partial().roll(), 0.0);
        assert_eq!(s.partial().pitch(), 0.0);
    }

    #[test]
    fn step_response_matches_first_order() {
        let p = DynamicsParams::default();
        let mut s = RobotState::at_rest(Vector3::zeros(), 0.0);
        for _ in 0..20 {
            step_dynamics(&mut s, &Action::new([1.0, 0.0, 0.0], 0.0), 0.0, &p, 0.05);
        }
        let v = s.partial().velocity().x;
        let closed = 1.0 - (-1.0f64 / 0.3).exp();
        assert!((v - closed).abs() < 1e-12, "{v}");
        assert!((0.95..=0.97).contains(&v));
    }

    #[test]
    fn zero_reference_decays_speed() {
        let p = DynamicsParams::default();
        let mut s = RobotState::at_rest(Vector3::zeros(), 0.3).with_body_velocity(Vector3::new(1.2, -0.5, 0.3));
        let mut last = s.world_velocity().norm();
        for _ in 0..40 {
            let yaw = s.yaw();
            step_dynamics(&mut s, &Action::default(), yaw, &p, p.dt);
            let n = s.world_velocity().norm();
            assert!(n < last);
            last = n;
        }
    }

    #[test]
    fn forward_acceleration_pitches_nose_down() {
        let p = DynamicsParams::default();
        let mut s = RobotState::at_rest(Vector3::zeros(), 0.0);
        step_dynamics(&mut s, &Action::new([1.0, 0.0, 0.0], 0.0), 0.0, &p, p.dt);
        assert!(s.partial().pitch() > 0.0);
        let mut s = RobotState::at_rest(Vector3::zeros(), 0.0);
        step_dynamics(&mut s, &Action::new([0.0, 1.0, 0.0], 0.0), 0.0, &p, p.dt);
        assert!(s.partial().roll() < 0.0);
    }

    #[test]
    fn yaw_tracks_steering() {
        let p = DynamicsParams::default();
        let mut s = RobotState::at_rest(Vector3::zeros(), 0.0);
        for _ in 0..60 {
            step_dynamics(&mut s, &Action::new([1.0, 0.0, 0.0], 0.5), 0.0, &p, p.dt);
        }
        assert!((s.yaw() - 0.5).abs() < 1e-3);
        let v = s.world_velocity();
        assert!((v.y.atan2(v.x) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-10.0, -3.2, 0.0, 3.2, 7.0] {
            let w = wrap_angle(a);
            assert!(w > -std::f64::consts::PI - 1e-12 && w <= std::f64::consts::PI);
            assert!(((a - w) / std::f64::consts::TAU).fract().abs() < 1e-9 || ((a - w) / std::f64::consts::TAU).fract().abs() > 1.0 - 1e-9);
        }
    }
}
