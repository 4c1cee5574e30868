//! Rigid-body quadrotor dynamics with a collective-thrust / body-rate (CTBR)
//! command interface.
//!
//! The simulator is a set of pure functions over value types. An episode owns
//! its [`QuadState`], a [`DelayBuffer`] and the [`MismatchConfig`] drawn at
//! reset; nothing here holds shared mutable state.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pitch magnitude at which the ZYX rate map is treated as singular.
pub const PITCH_LIMIT: f64 = PI / 2.0 - 1e-3;

/// Full 12-dimensional rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    /// Roll, pitch, yaw (ZYX convention).
    pub euler: Vector3<f64>,
    /// Body rates.
    pub omega: Vector3<f64>,
}

impl QuadState {
    pub fn at_rest(p: Vector3<f64>) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            euler: Vector3::zeros(),
            omega: Vector3::zeros(),
        }
    }

    /// Flat layout `[p, v, euler, omega]`.
    pub fn to_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[0..3].copy_from_slice(self.p.as_slice());
        out[3..6].copy_from_slice(self.v.as_slice());
        out[6..9].copy_from_slice(self.euler.as_slice());
        out[9..12].copy_from_slice(self.omega.as_slice());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Normalized CTBR command: `[thrust, roll rate, pitch rate, yaw rate]`, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput(pub [f64; 4]);

impl ControlInput {
    pub fn new(u: [f64; 4]) -> Self {
        Self(u).clamped()
    }

    pub fn clamped(self) -> Self {
        Self(
            self.0
                .map(|x| if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) }),
        )
    }

    /// The command that produces exactly `m0 * |g|` of thrust with zero rate demand.
    pub fn hover(params: &PhysicalParams) -> Self {
        Self([params.hover_thrust_command(), 0.0, 0.0, 0.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub gravity: f64,
    pub inertia: [f64; 3],
    pub drag_coeff: f64,
    pub max_thrust: f64,
    pub max_rate: f64,
    pub rate_gain: f64,
    pub max_torque: f64,
    pub dt: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        let mass = 1.0;
        let gravity = 9.81;
        Self {
            mass,
            gravity,
            inertia: [0.01, 0.01, 0.02],
            drag_coeff: 0.1,
            // 1.5x hover: mass +50% sits exactly on the thrust ceiling.
            max_thrust: 1.5 * mass * gravity,
            max_rate: 3.0,
            rate_gain: 20.0,
            max_torque: 0.5,
            dt: 0.02,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::config("mass must be positive"));
        }
        if !(self.max_thrust > self.mass * self.gravity) {
            return Err(Error::config("max thrust must exceed nominal weight"));
        }
        if !(self.dt > 0.0) || self.inertia.iter().any(|&i| !(i > 0.0)) {
            return Err(Error::config("dt and inertia must be positive"));
        }
        Ok(())
    }

    pub fn hover_thrust_command(&self) -> f64 {
        2.0 * self.mass * self.gravity / self.max_thrust - 1.0
    }

    pub fn gravity_vec(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.gravity)
    }
}

/// Deviation of the deployed dynamics from the nominal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchConfig {
    pub mass_scale: f64,
    pub drag_scale: f64,
    pub delay_steps: usize,
    /// Constant world-frame force, N.
    pub wind: [f64; 3],
}

impl Default for MismatchConfig {
    fn default() -> Self {
        Self::nominal()
    }
}

impl MismatchConfig {
    pub const fn nominal() -> Self {
        Self {
            mass_scale: 1.0,
            drag_scale: 1.0,
            delay_steps: 0,
            wind: [0.0; 3],
        }
    }

    const fn new(mass_scale: f64, drag_scale: f64, delay_steps: usize, wind: [f64; 3]) -> Self {
        Self {
            mass_scale,
            drag_scale,
            delay_steps,
            wind,
        }
    }

    pub fn effective_mass(&self, params: &PhysicalParams) -> f64 {
        self.mass_scale * params.mass
    }

    pub fn effective_drag(&self, params: &PhysicalParams) -> f64 {
        self.drag_scale * params.drag_coeff
    }
}

/// Stable identifiers of the evaluation conditions, in report order.
pub const CONDITION_NAMES: [&str; 13] = [
    "nominal",
    "mass-20",
    "mass+20",
    "mass+30",
    "mass+40",
    "drag+100",
    "delay2",
    "delay5",
    "wind-med",
    "wind-strong",
    "combined-mild",
    "combined-hard",
    "combined-ood",
];

/// Opt-in condition used for the thrust-ceiling check; not part of the suite.
pub const MASS_PLUS_50: &str = "mass+50";

/// Looks up a named mismatch condition.
pub fn mismatch_condition(name: &str) -> Result<MismatchConfig> {
    let cfg = match name {
        "nominal" => MismatchConfig::nominal(),
        "mass-20" => MismatchConfig::new(0.8, 1.0, 0, [0.0; 3]),
        "mass+20" => MismatchConfig::new(1.2, 1.0, 0, [0.0; 3]),
        "mass+30" => MismatchConfig::new(1.3, 1.0, 0, [0.0; 3]),
        "mass+40" => MismatchConfig::new(1.4, 1.0, 0, [0.0; 3]),
        "mass+50" => MismatchConfig::new(1.5, 1.0, 0, [0.0; 3]),
        "drag+100" => MismatchConfig::new(1.0, 2.0, 0, [0.0; 3]),
        "delay2" => MismatchConfig::new(1.0, 1.0, 2, [0.0; 3]),
        "delay5" => MismatchConfig::new(1.0, 1.0, 5, [0.0; 3]),
        "wind-med" => MismatchConfig::new(1.0, 1.0, 0, [1.0, 0.5, 0.0]),
        "wind-strong" => MismatchConfig::new(1.0, 1.0, 0, [2.0, 1.0, 0.3]),
        "combined-mild" => MismatchConfig::new(1.1, 1.3, 1, [0.3, 0.1, 0.0]),
        "combined-hard" => MismatchConfig::new(1.2, 1.5, 3, [1.0, 0.5, 0.0]),
        "combined-ood" => MismatchConfig::new(1.4, 1.8, 3, [1.5, 0.8, 0.2]),
        other => {
            return Err(Error::config(format!(
                "unknown mismatch condition `{other}`"
            )))
        }
    };
    Ok(cfg)
}

/// Per-episode randomization ranges for mass and drag scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrRanges {
    pub mass: (f64, f64),
    pub drag: (f64, f64),
}

impl DrRanges {
    pub const OFF: DrRanges = DrRanges {
        mass: (1.0, 1.0),
        drag: (1.0, 1.0),
    };
    pub const NARROW: DrRanges = DrRanges {
        mass: (0.9, 1.1),
        drag: (0.8, 1.2),
    };
    pub const WIDE: DrRanges = DrRanges {
        mass: (0.8, 1.3),
        drag: (0.5, 2.0),
    };

    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi;
        if ok(self.mass) && ok(self.drag) {
            Ok(())
        } else {
            Err(Error::config(
                "randomization range must satisfy 0 <= lo <= hi",
            ))
        }
    }
}

/// Named randomization preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrPreset {
    Off,
    Narrow,
    Wide,
}

impl DrPreset {
    pub fn ranges(self) -> DrRanges {
        match self {
            DrPreset::Off => DrRanges::OFF,
            DrPreset::Narrow => DrRanges::NARROW,
            DrPreset::Wide => DrRanges::WIDE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DrPreset::Off => "off",
            DrPreset::Narrow => "narrow",
            DrPreset::Wide => "wide",
        }
    }
}

impl std::str::FromStr for DrPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(DrPreset::Off),
            "narrow" => Ok(DrPreset::Narrow),
            "wide" => Ok(DrPreset::Wide),
            other => Err(Error::config(format!(
                "unknown DR preset `{other}` (expected narrow, wide or off)"
            ))),
        }
    }
}

/// Draws an episode's dynamics. Delay and wind are never randomized.
pub fn sample_dr<R: Rng + ?Sized>(ranges: &DrRanges, rng: &mut R) -> MismatchConfig {
    let draw = |(lo, hi): (f64, f64), rng: &mut R| {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };
    let mass_scale = draw(ranges.mass, rng);
    let drag_scale = draw(ranges.drag, rng);
    MismatchConfig {
        mass_scale,
        drag_scale,
        delay_steps: 0,
        wind: [0.0; 3],
    }
}

/// FIFO that releases each command `delay_steps` control cycles after it was issued.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    delay: usize,
    queue: VecDeque<ControlInput>,
    neutral: ControlInput,
}

impl DelayBuffer {
    pub fn new(delay: usize, params: &PhysicalParams) -> Self {
        Self {
            delay,
            queue: VecDeque::with_capacity(delay + 1),
            neutral: ControlInput::hover(params),
        }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Enqueues this cycle's command and returns the one to apply now.
    /// Until the buffer has filled, the hover-neutral command is applied.
    pub fn push(&mut self, u: ControlInput) -> ControlInput {
        if self.delay == 0 {
            return u;
        }
        self.queue.push_back(u);
        if self.queue.len() > self.delay {
            self.queue.pop_front().unwrap_or(self.neutral)
        } else {
            self.neutral
        }
    }

    pub fn clear(&mut self) {
        self.queue.clear();
    }
}

/// Maps a normalized command to collective thrust (N) and commanded body rates (rad/s).
pub fn map_action(u: ControlInput, params: &PhysicalParams) -> (f64, Vector3<f64>) {
    let u = u.clamped().0;
    let thrust = (u[0] + 1.0) * 0.5 * params.max_thrust;
    let rates = Vector3::new(u[1], u[2], u[3]) * params.max_rate;
    (thrust, rates)
}

/// Body-to-world rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rotation_matrix(euler: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = euler.x.sin_cos();
    let (sp, cp) = euler.y.sin_cos();
    let (sy, cy) = euler.z.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// ZYX Euler-angle rates from body rates. `None` near the pitch singularity.
pub fn euler_rates(euler: &Vector3<f64>, omega: &Vector3<f64>) -> Option<Vector3<f64>> {
    if !(euler.y.abs() < PITCH_LIMIT) {
        return None;
    }
    let (sr, cr) = euler.x.sin_cos();
    let (sp, cp) = euler.y.sin_cos();
    let tp = sp / cp;
    let (p, q, r) = (omega.x, omega.y, omega.z);
    Some(Vector3::new(
        p + sr * tp * q + cr * tp * r,
        cr * q - sr * r,
        (sr * q + cr * r) / cp,
    ))
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Translational acceleration for the given state and (already delayed) command.
pub fn linear_acceleration(
    state: &QuadState,
    thrust: f64,
    params: &PhysicalParams,
    mismatch: &MismatchConfig,
) -> Vector3<f64> {
    let m = mismatch.effective_mass(params);
    let body_thrust = rotation_matrix(&state.euler) * Vector3::new(0.0, 0.0, thrust);
    let drag = -mismatch.effective_drag(params) * state.v;
    let wind = Vector3::from(mismatch.wind);
    (body_thrust - m * params.gravity_vec() + drag + wind) / m
}

/// One semi-implicit Euler step of length `params.dt`.
///
/// Rates are integrated first; translation uses the pre-step attitude and the
/// position update uses the freshly updated velocity.
pub fn step(
    state: &QuadState,
    u: ControlInput,
    params: &PhysicalParams,
    mismatch: &MismatchConfig,
) -> Result<QuadState> {
    let dt = params.dt;
    let (thrust, rate_cmd) = map_action(u, params);

    let inertia = Vector3::from(params.inertia);
    let torque = (inertia.component_mul(&(rate_cmd - state.omega)) * params.rate_gain)
        .map(|t| t.clamp(-params.max_torque, params.max_torque));
    let gyro = state.omega.cross(&inertia.component_mul(&state.omega));
    let omega = state.omega + (torque - gyro).component_div(&inertia) * dt;

    let accel = linear_acceleration(state, thrust, params, mismatch);
    let v = state.v + accel * dt;
    let p = state.p + v * dt;

    let rates = euler_rates(&state.euler, &omega).ok_or(Error::Singular)?;
    let mut euler = state.euler + rates * dt;
    euler.z = wrap_angle(euler.z);

    let next = QuadState { p, v, euler, omega };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite("simulator state".into()))
    }
}
