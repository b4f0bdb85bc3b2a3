//! First-order Nomoto steering with rudder saturation, rudder-rate limit and
//! a first-order speed lag, integrated with forward Euler.
//!
//! The reference tanker is 304.8 m long, 18.46 m draft, 10 kn service speed,
//! 80 rpm shaft speed, with the rudder limited to ±30° at 5°/s.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{knots_to_mps, wrap_2pi, wrap_pi, LocalPoint, Velocity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("time step must satisfy 0 < dt <= 1 s, got {0}")]
    InvalidTimeStep(f64),
    #[error("ship model parameter `{0}` must be positive")]
    NonPositiveParam(&'static str),
}

/// Maneuvering parameters of one hull. Angles in degrees, as in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipModelParams {
    /// m
    pub length: f64,
    /// m
    pub draft: f64,
    /// kn
    pub nominal_speed: f64,
    /// rpm
    pub shaft_speed: f64,
    /// deg
    pub max_rudder_angle: f64,
    /// deg/s
    pub max_rudder_rate: f64,
    /// Nomoto gain K, 1/s
    pub nomoto_gain: f64,
    /// Nomoto time constant T, s
    pub nomoto_time_constant: f64,
    /// s
    pub speed_time_constant: f64,
}

impl Default for ShipModelParams {
    fn default() -> Self {
        Self::tanker()
    }
}

impl ShipModelParams {
    /// Reference tanker. K and T are calibration constants giving a steady
    /// turn rate of 1.2°/s at full rudder.
    pub fn tanker() -> Self {
        Self {
            length: 304.8,
            draft: 18.46,
            nominal_speed: 10.0,
            shaft_speed: 80.0,
            max_rudder_angle: 30.0,
            max_rudder_rate: 5.0,
            nomoto_gain: 0.04,
            nomoto_time_constant: 80.0,
            speed_time_constant: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let fields = [
            ("length", self.length),
            ("draft", self.draft),
            ("nominal_speed", self.nominal_speed),
            ("shaft_speed", self.shaft_speed),
            ("max_rudder_angle", self.max_rudder_angle),
            ("max_rudder_rate", self.max_rudder_rate),
            ("nomoto_gain", self.nomoto_gain),
            ("nomoto_time_constant", self.nomoto_time_constant),
            ("speed_time_constant", self.speed_time_constant),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::NonPositiveParam(name));
            }
        }
        Ok(())
    }

    pub fn max_rudder(&self) -> f64 {
        self.max_rudder_angle.to_radians()
    }

    pub fn max_rudder_rate_rad(&self) -> f64 {
        self.max_rudder_rate.to_radians()
    }
}

/// Kinematic and actuator state of one ship.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShipState {
    pub pos: LocalPoint,
    /// radians `[0, 2π)`
    pub heading: f64,
    /// rad/s, positive turning to starboard
    pub yaw_rate: f64,
    /// m/s
    pub speed: f64,
    /// radians, positive to starboard
    pub rudder: f64,
}

impl ShipState {
    /// Steady state on a straight course.
    pub fn steady(pos: LocalPoint, heading: f64, speed: f64) -> Self {
        Self {
            pos,
            heading: wrap_2pi(heading),
            yaw_rate: 0.0,
            speed: speed.max(0.0),
            rudder: 0.0,
        }
    }

    pub fn velocity(&self) -> Velocity {
        Velocity::new(self.speed, self.heading)
    }

    /// Position after `t` seconds of straight-line motion.
    pub fn extrapolate(&self, t: f64) -> LocalPoint {
        self.pos.offset(self.heading, self.speed * t)
    }
}

/// Actuator orders for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmCommand {
    /// radians; clamped to the rudder limit when applied
    pub rudder_order: f64,
    /// m/s
    pub speed_order: f64,
}

impl HelmCommand {
    /// Holds the current rudder and speed.
    pub fn hold(state: &ShipState) -> Self {
        Self {
            rudder_order: state.rudder,
            speed_order: state.speed,
        }
    }
}

/// Proportional-derivative heading controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CourseKeeperGains {
    /// rad of rudder per rad of heading error
    pub kp: f64,
    /// s
    pub kd: f64,
}

impl Default for CourseKeeperGains {
    fn default() -> Self {
        Self { kp: 1.5, kd: 60.0 }
    }
}

/// Rudder order that steers towards `course_order`.
pub fn course_keeper(
    state: &ShipState,
    course_order: f64,
    params: &ShipModelParams,
    gains: &CourseKeeperGains,
) -> f64 {
    let error = wrap_pi(course_order - state.heading);
    let max = params.max_rudder();
    (gains.kp * error - gains.kd * state.yaw_rate).clamp(-max, max)
}

/// Advances one ship by `dt` seconds.
pub fn step(
    state: &ShipState,
    cmd: &HelmCommand,
    params: &ShipModelParams,
    dt: f64,
) -> Result<ShipState, DynamicsError> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(DynamicsError::InvalidTimeStep(dt));
    }
    Ok(step_unchecked(state, cmd, params, dt))
}

pub(crate) fn step_unchecked(
    state: &ShipState,
    cmd: &HelmCommand,
    params: &ShipModelParams,
    dt: f64,
) -> ShipState {
    let max = params.max_rudder();
    let order = cmd.rudder_order.clamp(-max, max);
    let max_delta = params.max_rudder_rate_rad() * dt;
    let delta = order - state.rudder;
    // snap when within one rate-limited step (absorbs accumulated rounding)
    let rudder = if delta.abs() <= max_delta * (1.0 + 1e-9) {
        order
    } else {
        state.rudder + max_delta.copysign(delta)
    }
    .clamp(-max, max);

    let yaw_accel =
        (params.nomoto_gain * state.rudder - state.yaw_rate) / params.nomoto_time_constant;
    let speed_accel = (cmd.speed_order.max(0.0) - state.speed) / params.speed_time_constant;

    let pos = state.pos.offset(state.heading, state.speed * dt);
    ShipState {
        pos,
        heading: wrap_2pi(state.heading + state.yaw_rate * dt),
        yaw_rate: state.yaw_rate + yaw_accel * dt,
        speed: (state.speed + speed_accel * dt).max(0.0),
        rudder,
    }
}

/// Steers a ship towards a course and speed for one step.
pub fn step_towards(
    state: &ShipState,
    course_order: f64,
    speed_order: f64,
    params: &ShipModelParams,
    gains: &CourseKeeperGains,
    dt: f64,
) -> ShipState {
    let rudder_order = course_keeper(state, course_order, params, gains);
    step_unchecked(
        state,
        &HelmCommand {
            rudder_order,
            speed_order,
        },
        params,
        dt,
    )
}

/// Convenience for tests and fixtures: a ship at `speed_kn` on `course_deg`.
pub fn state_from_nav(pos: LocalPoint, course_deg: f64, speed_kn: f64) -> ShipState {
    ShipState::steady(pos, course_deg.to_radians(), knots_to_mps(speed_kn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::wrap_180;

    fn params() -> ShipModelParams {
        ShipModelParams::tanker()
    }

    #[test]
    fn rejects_bad_dt() {
        let s = state_from_nav(LocalPoint::default(), 0.0, 10.0);
        let cmd = HelmCommand::hold(&s);
        assert!(step(&s, &cmd, &params(), 0.0).is_err());
        assert!(step(&s, &cmd, &params(), 1.5).is_err());
        assert!(step(&s, &cmd, &params(), -0.5).is_err());
    }

    #[test]
    fn zero_rudder_keeps_heading() {
        let mut s = state_from_nav(LocalPoint::default(), 37.0, 10.0);
        let cmd = HelmCommand {
            rudder_order: 0.0,
            speed_order: s.speed,
        };
        for _ in 0..7200 {
            s = step(&s, &cmd, &params(), 0.5).unwrap();
        }
        assert_eq!(s.heading, 37f64.to_radians());
        assert_eq!(s.yaw_rate, 0.0);
        assert_eq!(s.rudder, 0.0);
        assert_eq!(s.speed, knots_to_mps(10.0));
        let expected = 3600.0 * knots_to_mps(10.0);
        assert!((s.pos.distance(&LocalPoint::default()) - expected).abs() < 1e-6);
    }

    #[test]
    fn rudder_saturates_after_six_seconds() {
        let p = params();
        let mut s = state_from_nav(LocalPoint::default(), 0.0, 10.0);
        let cmd = HelmCommand {
            rudder_order: 30f64.to_radians(),
            speed_order: s.speed,
        };
        for i in 1..=12 {
            s = step(&s, &cmd, &p, 0.5).unwrap();
            if i < 12 {
                assert!(s.rudder < p.max_rudder(), "saturated early at step {i}");
            }
        }
        assert_eq!(s.rudder, p.max_rudder());
    }

    #[test]
    fn rudder_rate_and_angle_limits_hold() {
        let p = params();
        let mut s = state_from_nav(LocalPoint::default(), 0.0, 10.0);
        let orders = [1.0, -2.0, 0.3, -0.1, 0.9];
        for k in 0..2000 {
            let cmd = HelmCommand {
                rudder_order: orders[(k / 37) % orders.len()],
                speed_order: 3.0,
            };
            let next = step(&s, &cmd, &p, 0.5).unwrap();
            assert!(next.rudder.abs() <= p.max_rudder() + 1e-15);
            assert!((next.rudder - s.rudder).abs() <= p.max_rudder_rate_rad() * 0.5 * (1.0 + 1e-9));
            assert!(next.speed >= 0.0);
            assert!((0.0..std::f64::consts::TAU).contains(&next.heading));
            s = next;
        }
    }

    #[test]
    fn steady_turn_rate_matches_nomoto() {
        let p = params();
        let delta = std::f64::consts::PI / 6.0;
        let expected = p.nomoto_gain * delta;
        let mut s = state_from_nav(LocalPoint::default(), 0.0, 10.0);
        let cmd = HelmCommand {
            rudder_order: delta,
            speed_order: s.speed,
        };
        for _ in 0..4000 {
            s = step(&s, &cmd, &p, 0.5).unwrap();
        }
        assert!(((s.yaw_rate - expected) / expected).abs() < 1e-3);
        // roughly 1.2 deg/s for the reference hull
        assert!((s.yaw_rate.to_degrees() - 1.2).abs() < 0.01);
    }

    #[test]
    fn course_keeper_signs() {
        let p = params();
        let g = CourseKeeperGains::default();
        let s = state_from_nav(LocalPoint::default(), 10.0, 10.0);
        assert_eq!(course_keeper(&s, 10f64.to_radians(), &p, &g), 0.0);
        assert!(course_keeper(&s, 30f64.to_radians(), &p, &g) > 0.0);
        assert!(course_keeper(&s, 350f64.to_radians(), &p, &g) < 0.0);
    }

    #[test]
    fn course_keeper_settles_without_large_overshoot() {
        let p = params();
        let g = CourseKeeperGains::default();
        let target = 30f64.to_radians();
        let mut s = state_from_nav(LocalPoint::default(), 0.0, 10.0);
        let mut peak: f64 = 0.0;
        for _ in 0..2400 {
            s = step_towards(&s, target, s.speed, &p, &g, 0.5);
            peak = peak.max(wrap_180(s.heading.to_degrees()));
        }
        let err = wrap_180(s.heading.to_degrees() - 30.0);
        assert!(err.abs() < 1.0, "final error {err}");
        let overshoot = (peak - 30.0) / 30.0;
        assert!(overshoot <= 0.2, "overshoot {overshoot}");
    }
}
