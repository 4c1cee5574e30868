//! The five language-conditioned flight tasks: episode setup, observation
//! layout, shaped reward, termination, and the goal-distance curriculum.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{ControlInput, QuadState, PITCH_LIMIT};

pub const OBS_DIM: usize = 32;
pub const MAX_STEPS: usize = 500;
pub const HOVER_HOLD_STEPS: usize = 50;
pub const BODY_RADIUS: f64 = 0.15;
pub const OBSTACLE_RADIUS: f64 = 0.5;
pub const START_POSITION: [f64; 3] = [0.0, 0.0, 1.5];

pub const CURRICULUM_MIN: f64 = 2.0;
pub const CURRICULUM_MAX: f64 = 7.0;
pub const CURRICULUM_STEP: f64 = 0.15;
pub const CURRICULUM_GATE: f64 = 0.25;
pub const CURRICULUM_HORIZON: f64 = 10.0;
/// The hover task's curriculum starts at this fraction of the navigation distance.
pub const HOVER_CURRICULUM_FRACTION: f64 = 0.4;

pub const SUCCESS_BONUS: f64 = 500.0;
pub const CRASH_PENALTY: f64 = -100.0;

const ARENA_RADIUS: f64 = 15.0;
const CEILING: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Navigate,
    Avoid,
    FlyLow,
    Hover,
    Waypoints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub max_dist: f64,
    pub max_speed: f64,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Navigate,
        Task::Avoid,
        Task::FlyLow,
        Task::Hover,
        Task::Waypoints,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Task> {
        Task::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::config(format!("task id {i} out of range 0..4")))
    }

    /// Canonical command string.
    pub fn command(self) -> &'static str {
        match self {
            Task::Navigate => "Go to the target position",
            Task::Avoid => "Avoid obstacle, reach target",
            Task::FlyLow => "Fly low and reach target",
            Task::Hover => "Hover at the designated pose",
            Task::Waypoints => "Fly through waypoints in order",
        }
    }

    pub fn thresholds(self) -> Thresholds {
        match self {
            Task::Hover => Thresholds {
                max_dist: 0.5,
                max_speed: 0.3,
            },
            _ => Thresholds {
                max_dist: 1.0,
                max_speed: 2.0,
            },
        }
    }

    /// Lower end of this task's curriculum.
    pub fn curriculum_start(self) -> f64 {
        match self {
            Task::Hover => HOVER_CURRICULUM_FRACTION * CURRICULUM_MIN,
            _ => CURRICULUM_MIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task: Task,
    /// Final target (the last waypoint for the waypoint task).
    pub goal: Vector3<f64>,
    /// Three ordered waypoints for [`Task::Waypoints`], empty otherwise.
    pub waypoints: Vec<Vector3<f64>>,
    pub obstacle: Option<Obstacle>,
}

impl TaskSpec {
    /// The position the vehicle should currently be heading to.
    pub fn target(&self, ep: &EpisodeState) -> Vector3<f64> {
        if self.waypoints.is_empty() {
            self.goal
        } else {
            self.waypoints[ep.active_waypoint.min(self.waypoints.len() - 1)]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Running,
    Success,
    Crash,
    Timeout,
}

impl Outcome {
    pub fn is_done(self) -> bool {
        self != Outcome::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Success => "success",
            Outcome::Crash => "crash",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub step: usize,
    pub active_waypoint: usize,
    pub collided: bool,
    pub hover_hold: usize,
    pub prev_action: ControlInput,
    pub outcome: Outcome,
}

impl Default for EpisodeState {
    fn default() -> Self {
        Self {
            step: 0,
            active_waypoint: 0,
            collided: false,
            hover_hold: 0,
            prev_action: ControlInput::default(),
            outcome: Outcome::Running,
        }
    }
}

/// Goal-distance schedule driven by an EMA of per-iteration success rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub distance: f64,
    pub sr_ema: f64,
}

impl Curriculum {
    pub fn new(distance: f64) -> Self {
        Self {
            distance: distance.min(CURRICULUM_MAX),
            sr_ema: 0.0,
        }
    }

    pub fn for_task(task: Task) -> Self {
        Self::new(task.curriculum_start())
    }

    pub fn update(&mut self, iteration_sr: f64) {
        let sr = iteration_sr.clamp(0.0, 1.0);
        self.sr_ema += (2.0 / (CURRICULUM_HORIZON + 1.0)) * (sr - self.sr_ema);
        if self.sr_ema > CURRICULUM_GATE {
            self.distance = (self.distance + CURRICULUM_STEP).min(CURRICULUM_MAX);
        }
    }
}

fn unit_heading(angle: f64) -> (Vector2<f64>, Vector2<f64>) {
    let dir = Vector2::new(angle.cos(), angle.sin());
    let perp = Vector2::new(-dir.y, dir.x);
    (dir, perp)
}

/// Samples a fresh episode at the given goal distance.
pub fn reset_episode<R: Rng + ?Sized>(
    task: Task,
    distance: f64,
    rng: &mut R,
) -> (QuadState, TaskSpec, EpisodeState) {
    let start = Vector3::from(START_POSITION);
    let state = QuadState::at_rest(start);
    let (dir, perp) = unit_heading(rng.gen_range(0.0..2.0 * PI));
    let altitude = match task {
        Task::FlyLow => rng.gen_range(0.5..0.9),
        _ => rng.gen_range(1.0..3.0),
    };
    let xy = dir * distance;
    let goal = Vector3::new(xy.x, xy.y, altitude);

    let mut spec = TaskSpec {
        task,
        goal,
        waypoints: Vec::new(),
        obstacle: None,
    };
    match task {
        Task::Avoid => {
            let jitter = rng.gen_range(-0.5..0.5);
            let mid = (start + goal) * 0.5;
            let offset = perp * jitter;
            spec.obstacle = Some(Obstacle {
                center: Vector3::new(mid.x + offset.x, mid.y + offset.y, mid.z),
                radius: OBSTACLE_RADIUS,
            });
        }
        Task::Waypoints => {
            let waypoints: Vec<Vector3<f64>> = [0.4, 0.7, 1.0]
                .iter()
                .map(|frac| {
                    let lateral = rng.gen_range(-1.0..1.0);
                    let xy = dir * (frac * distance) + perp * lateral;
                    Vector3::new(xy.x, xy.y, rng.gen_range(1.0..3.0))
                })
                .collect();
            spec.goal = waypoints[2];
            spec.waypoints = waypoints;
        }
        _ => {}
    }
    (state, spec, EpisodeState::default())
}

/// Fixed 32-entry observation:
///
/// | indices | content |
/// |---|---|
/// | 0..12 | position, velocity, Euler angles, body rates |
/// | 12..15 | current target minus position |
/// | 15..20 | command one-hot |
/// | 20..24 | obstacle center minus position, obstacle radius (zeros if none) |
/// | 24..27 | active-waypoint one-hot (zeros unless waypoint task) |
/// | 27..31 | previous action |
/// | 31 | fraction of the step budget remaining |
pub fn build_observation(
    state: &QuadState,
    spec: &TaskSpec,
    ep: &EpisodeState,
    command: Task,
) -> [f32; OBS_DIM] {
    let mut obs = [0.0f32; OBS_DIM];
    for (o, x) in obs[0..12].iter_mut().zip(state.to_array()) {
        *o = x as f32;
    }
    let rel = spec.target(ep) - state.p;
    for i in 0..3 {
        obs[12 + i] = rel[i] as f32;
    }
    obs[15 + command.index()] = 1.0;
    if let Some(obstacle) = &spec.obstacle {
        let rel = obstacle.center - state.p;
        for i in 0..3 {
            obs[20 + i] = rel[i] as f32;
        }
        obs[23] = obstacle.radius as f32;
    }
    if !spec.waypoints.is_empty() {
        obs[24 + ep.active_waypoint.min(2)] = 1.0;
    }
    for i in 0..4 {
        obs[27 + i] = ep.prev_action.0[i] as f32;
    }
    obs[31] = (1.0 - ep.step as f64 / MAX_STEPS as f64) as f32;
    obs
}

/// Desired approach speed at distance `d`.
pub fn target_speed(d: f64) -> f64 {
    (1.5 * d.max(0.0).sqrt()).min(3.5)
}

/// Per-step reward after the dynamics step and termination check have run.
///
/// The speed-tracking penalty saturates at the speed cap so the shaped part
/// stays bounded; terminal bonuses are added from `ep.outcome`.
pub fn reward(state: &QuadState, u: &ControlInput, spec: &TaskSpec, ep: &EpisodeState) -> f64 {
    let to_target = spec.target(ep) - state.p;
    let d = to_target.norm();
    let v_toward = if d < 1e-6 {
        0.0
    } else {
        state.v.dot(&to_target) / d
    };
    let tracking = (v_toward - target_speed(d)).abs().min(3.5);
    let u_sq: f64 = u.0.iter().map(|x| x * x).sum();
    let mut r = 2.0 - tracking - 0.05 * state.omega.norm() - 0.01 * u_sq;
    match ep.outcome {
        Outcome::Success => r += SUCCESS_BONUS,
        Outcome::Crash => r += CRASH_PENALTY,
        _ => {}
    }
    r
}

fn within(state: &QuadState, target: &Vector3<f64>, th: Thresholds) -> bool {
    (target - state.p).norm() < th.max_dist && state.v.norm() < th.max_speed
}

/// Updates the per-episode counters for the post-step `state` and returns the outcome.
/// Expects `ep.step` to already count the step just taken.
pub fn check_termination(state: &QuadState, spec: &TaskSpec, ep: &mut EpisodeState) -> Outcome {
    if ep.outcome.is_done() {
        return ep.outcome;
    }
    let outcome = classify(state, spec, ep);
    ep.outcome = outcome;
    outcome
}

fn classify(state: &QuadState, spec: &TaskSpec, ep: &mut EpisodeState) -> Outcome {
    if !state.is_finite() {
        return Outcome::Crash;
    }
    let p = state.p;
    let out_of_bounds = p.z <= 0.0 || p.z > CEILING || p.xy().norm() > ARENA_RADIUS;
    let tipped = state.euler.x.abs() >= PITCH_LIMIT || state.euler.y.abs() >= PITCH_LIMIT;
    if let Some(obstacle) = &spec.obstacle {
        if (p - obstacle.center).norm() < obstacle.radius + BODY_RADIUS {
            ep.collided = true;
        }
    }
    if out_of_bounds || tipped || ep.collided {
        return Outcome::Crash;
    }

    let th = spec.task.thresholds();
    let success = match spec.task {
        Task::Navigate | Task::Avoid => within(state, &spec.goal, th),
        Task::FlyLow => within(state, &spec.goal, th) && p.z < 1.0,
        Task::Hover => {
            if within(state, &spec.goal, th) {
                ep.hover_hold += 1;
            } else {
                ep.hover_hold = 0;
            }
            ep.hover_hold >= HOVER_HOLD_STEPS
        }
        Task::Waypoints => {
            if within(state, &spec.target(ep), th) {
                ep.active_waypoint += 1;
            }
            ep.active_waypoint >= spec.waypoints.len()
        }
    };
    if success {
        Outcome::Success
    } else if ep.step >= MAX_STEPS {
        Outcome::Timeout
    } else {
        Outcome::Running
    }
}
