//! A single simulated episode: dynamics, actuator delay, and task bookkeeping.

use rand::Rng;

use crate::sim::{self, ControlInput, DelayBuffer, MismatchConfig, PhysicalParams, QuadState};
use crate::task::{self, EpisodeState, Outcome, Task, TaskSpec, OBS_DIM};

/// Observed transition handed to the adaptation head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; 12],
    pub action: ControlInput,
    pub next_state: [f64; 12],
}

#[derive(Debug, Clone, Copy)]
pub struct StepResult {
    pub reward: f64,
    pub outcome: Outcome,
    pub transition: Transition,
}

#[derive(Debug, Clone)]
pub struct QuadEnv {
    pub params: PhysicalParams,
    pub mismatch: MismatchConfig,
    pub state: QuadState,
    pub spec: TaskSpec,
    pub episode: EpisodeState,
    /// Command the vehicle is told to execute (one-hot slot of the observation).
    pub command: Task,
    delay: DelayBuffer,
}

impl QuadEnv {
    pub fn new<R: Rng + ?Sized>(
        params: PhysicalParams,
        mismatch: MismatchConfig,
        task: Task,
        distance: f64,
        rng: &mut R,
    ) -> Self {
        let (state, spec, episode) = task::reset_episode(task, distance, rng);
        Self {
            params,
            mismatch,
            state,
            spec,
            episode,
            command: task,
            delay: DelayBuffer::new(mismatch.delay_steps, &params),
        }
    }

    /// Starts a new episode with the given dynamics.
    pub fn reset<R: Rng + ?Sized>(&mut self, mismatch: MismatchConfig, distance: f64, rng: &mut R) {
        let (state, spec, episode) = task::reset_episode(self.spec.task, distance, rng);
        self.mismatch = mismatch;
        self.state = state;
        self.spec = spec;
        self.episode = episode;
        self.delay = DelayBuffer::new(mismatch.delay_steps, &self.params);
    }

    pub fn observation(&self) -> [f32; OBS_DIM] {
        task::build_observation(&self.state, &self.spec, &self.episode, self.command)
    }

    pub fn distance_to_target(&self) -> f64 {
        (self.spec.target(&self.episode) - self.state.p).norm()
    }

    pub fn distance_to_goal(&self) -> f64 {
        (self.spec.goal - self.state.p).norm()
    }

    pub fn is_done(&self) -> bool {
        self.episode.outcome.is_done()
    }

    /// Advances one control cycle with the commanded action.
    pub fn step(&mut self, command: ControlInput) -> StepResult {
        let u = command.clamped();
        let applied = self.delay.push(u);
        let before = self.state;
        let next = sim::step(&before, applied, &self.params, &self.mismatch);
        self.episode.step += 1;
        self.episode.prev_action = u;
        let outcome = match next {
            Ok(s) => {
                self.state = s;
                task::check_termination(&self.state, &self.spec, &mut self.episode)
            }
            Err(_) => {
                self.episode.outcome = Outcome::Crash;
                Outcome::Crash
            }
        };
        let reward = task::reward(&self.state, &u, &self.spec, &self.episode);
        StepResult {
            reward,
            outcome,
            transition: Transition {
                state: before.to_array(),
                action: u,
                next_state: self.state.to_array(),
            },
        }
    }
}
