use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::buffer::{RolloutBuffer, StepRecord};
use super::config::PpoConfig;
use crate::env::{QuadEnv, StepResult};
use crate::error::{Error, Result};
use crate::nets::agent::{Agent, STATE_DIM, TRANSITION_DIM};
use crate::nets::gaussian::{sample_action, ActionSample};
use crate::sim::{sample_dr, DrRanges, PhysicalParams};
use crate::task::{Outcome, Task, OBS_DIM};
use crate::tta::{transition_features, LatentState};

/// One env with its private RNG and latent bookkeeping.
#[derive(Debug, Clone)]
pub struct EnvSlot {
    pub env: QuadEnv,
    pub rng: ChaCha8Rng,
    pub latent: LatentState,
    /// Latent before the last transition was folded in.
    z_base: Vec<f32>,
    features: [f32; TRANSITION_DIM],
    has_transition: bool,
    ep_return: f64,
}

impl EnvSlot {
    fn reset(&mut self, dr: &DrRanges, distance: f64) {
        let mismatch = sample_dr(dr, &mut self.rng);
        self.env.reset(mismatch, distance, &mut self.rng);
        self.latent.clear();
        self.z_base.iter_mut().for_each(|x| *x = 0.0);
        self.features = [0.0; TRANSITION_DIM];
        self.has_transition = false;
        self.ep_return = 0.0;
    }
}

/// Parallel training envs. Env `i` runs `tasks[i % tasks.len()]` and draws
/// from RNG stream `i` of the seed, so results do not depend on how the envs
/// are split across workers.
#[derive(Debug, Clone)]
pub struct VecEnv {
    pub slots: Vec<EnvSlot>,
    pub dr: DrRanges,
}

impl VecEnv {
    pub fn new(
        n_envs: usize,
        tasks: &[Task],
        dr: DrRanges,
        distances: &[f64; 5],
        alpha: f64,
        latent_dim: usize,
        seed: u64,
    ) -> Self {
        assert!(!tasks.is_empty(), "at least one task");
        let slots = (0..n_envs)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2 + i as u64);
                let task = tasks[i % tasks.len()];
                let mismatch = sample_dr(&dr, &mut rng);
                let env = QuadEnv::new(
                    PhysicalParams::default(),
                    mismatch,
                    task,
                    distances[task.index()],
                    &mut rng,
                );
                EnvSlot {
                    env,
                    rng,
                    latent: LatentState::reset(latent_dim, alpha),
                    z_base: vec![0.0; latent_dim],
                    features: [0.0; TRANSITION_DIM],
                    has_transition: false,
                    ep_return: 0.0,
                }
            })
            .collect();
        Self { slots, dr }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Finished-episode bookkeeping for one iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutStats {
    pub steps: usize,
    pub episodes: usize,
    pub successes: usize,
    pub crashes: usize,
    pub total_episode_len: usize,
    pub total_reward: f64,
    /// `(episodes, successes)` per task.
    pub per_task: [(usize, usize); 5],
}

impl RolloutStats {
    pub fn success_rate(&self) -> Option<f64> {
        (self.episodes > 0).then(|| self.successes as f64 / self.episodes as f64)
    }

    pub fn task_success_rate(&self, task: Task) -> Option<f64> {
        let (n, k) = self.per_task[task.index()];
        (n > 0).then(|| k as f64 / n as f64)
    }

    pub fn mean_episode_len(&self) -> Option<f64> {
        (self.episodes > 0).then(|| self.total_episode_len as f64 / self.episodes as f64)
    }

    /// Mean unscaled per-step reward.
    pub fn mean_reward(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_reward / self.steps as f64
        }
    }
}

pub(crate) fn rows_f32(
    rows: impl Iterator<Item = impl AsRef<[f32]>>,
    n: usize,
    width: usize,
) -> Array2<f32> {
    let mut data = Vec::with_capacity(n * width);
    for r in rows {
        data.extend_from_slice(r.as_ref());
    }
    Array2::from_shape_vec((n, width), data).expect("row widths")
}

fn step_all(slots: &mut [EnvSlot], actions: &[ActionSample], workers: usize) -> Vec<StepResult> {
    if workers <= 1 || slots.len() < 2 {
        return slots
            .iter_mut()
            .zip(actions)
            .map(|(s, a)| s.env.step(a.control))
            .collect();
    }
    let chunk = slots.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = slots
            .chunks_mut(chunk)
            .zip(actions.chunks(chunk))
            .map(|(ss, aa)| {
                scope.spawn(move || {
                    ss.iter_mut()
                        .zip(aa)
                        .map(|(s, a)| s.env.step(a.control))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("env worker panicked"))
            .collect()
    })
}

/// Runs `cfg.steps_per_env()` steps in every env and fills a buffer.
///
/// `distances[task]` is the goal distance used when an env of that task
/// resets. `workers > 1` fans env stepping out over threads; the result is
/// identical either way.
pub fn collect_rollout(
    agent: &Agent<f32>,
    venv: &mut VecEnv,
    distances: &[f64; 5],
    cfg: &PpoConfig,
    workers: usize,
) -> Result<(RolloutBuffer, RolloutStats)> {
    let n = venv.len();
    let latent_dim = agent.arch.latent_dim;
    let steps = cfg.steps_per_env();
    let dt = PhysicalParams::default().dt;
    let log_std: Vec<f32> = agent.log_std.to_vec();
    let mut buf = RolloutBuffer::new(n, steps, latent_dim);
    let mut stats = RolloutStats::default();

    for _ in 0..steps {
        let observations: Vec<[f32; OBS_DIM]> =
            venv.slots.iter().map(|s| s.env.observation()).collect();
        let obs = rows_f32(observations.iter(), n, OBS_DIM);
        let task_ids: Vec<usize> = venv.slots.iter().map(|s| s.env.command.index()).collect();
        let z = rows_f32(venv.slots.iter().map(|s| &s.latent.z), n, latent_dim);
        let g = agent.subgoal(&task_ids, obs.view());
        let mean = agent.policy_mean(obs.slice(s![.., 0..STATE_DIM]), g.view(), z.view());
        let values = agent.value_of(obs.view());
        if !mean.iter().chain(values.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite(
                "policy or value output during rollout".into(),
            ));
        }

        let mut actions = Vec::with_capacity(n);
        for (e, slot) in venv.slots.iter_mut().enumerate() {
            let sample = sample_action(
                mean.row(e).as_slice().expect("row"),
                &log_std,
                &mut slot.rng,
            );
            buf.push(StepRecord {
                obs: &observations[e],
                task_id: task_ids[e],
                features: &slot.features,
                z_base: &slot.z_base,
                has_transition: slot.has_transition,
                z: &slot.latent.z,
                action: &sample.raw,
                log_prob: sample.log_prob,
                value: f64::from(values[e]),
            });
            actions.push(sample);
        }

        let results = step_all(&mut venv.slots, &actions, workers);
        let feats: Vec<[f32; TRANSITION_DIM]> = results
            .iter()
            .map(|r| transition_features(&r.transition, dt))
            .collect();
        let deltas = agent.tta_delta(rows_f32(feats.iter(), n, TRANSITION_DIM).view());

        // Time-limit truncation: fold the value of the final observation into the reward.
        let truncated: Vec<usize> = (0..n)
            .filter(|&e| results[e].outcome == Outcome::Timeout)
            .collect();
        let mut tail_values = vec![0.0f64; n];
        if !truncated.is_empty() {
            let obs_t = rows_f32(
                truncated.iter().map(|&e| venv.slots[e].env.observation()),
                truncated.len(),
                OBS_DIM,
            );
            for (k, v) in agent.value_of(obs_t.view()).iter().enumerate() {
                tail_values[truncated[k]] = f64::from(*v);
            }
        }

        for (e, slot) in venv.slots.iter_mut().enumerate() {
            let res = &results[e];
            stats.steps += 1;
            stats.total_reward += res.reward;
            slot.ep_return += res.reward;
            let done = res.outcome.is_done();
            let reward = res.reward * cfg.reward_scale + cfg.gamma * tail_values[e];
            buf.set_outcome(e, reward, done);
            if done {
                let task = slot.env.spec.task.index();
                stats.episodes += 1;
                stats.total_episode_len += slot.env.episode.step;
                stats.per_task[task].0 += 1;
                match res.outcome {
                    Outcome::Success => {
                        stats.successes += 1;
                        stats.per_task[task].1 += 1;
                    }
                    Outcome::Crash => stats.crashes += 1,
                    _ => {}
                }
                let dr = venv.dr;
                slot.reset(&dr, distances[task]);
            } else {
                slot.z_base.copy_from_slice(&slot.latent.z);
                slot.latent
                    .apply_delta(deltas.row(e).as_slice().expect("row"));
                slot.features = feats[e];
                slot.has_transition = true;
            }
        }
    }

    let obs = rows_f32(venv.slots.iter().map(|s| s.env.observation()), n, OBS_DIM);
    buf.bootstrap = agent
        .value_of(obs.view())
        .iter()
        .map(|&v| f64::from(v))
        .collect();
    Ok((buf, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::AgentArch;

    fn setup(workers: usize) -> (RolloutBuffer, RolloutStats, VecEnv) {
        let cfg = PpoConfig {
            n_envs: 4,
            rollout_steps_total: 4 * 40,
            arch: AgentArch::small(8, 4),
            ..PpoConfig::smoke()
        };
        let agent = Agent::new(cfg.arch.clone(), &mut ChaCha8Rng::seed_from_u64(0));
        let mut venv = VecEnv::new(
            4,
            &[Task::Navigate, Task::Hover],
            DrRanges::NARROW,
            &[2.0; 5],
            0.1,
            4,
            7,
        );
        let (buf, stats) = collect_rollout(&agent, &mut venv, &[2.0; 5], &cfg, workers).unwrap();
        (buf, stats, venv)
    }

    #[test]
    fn fills_buffer_and_is_reproducible() {
        let (a, sa, _) = setup(1);
        let (b, sb, _) = setup(1);
        assert!(a.is_full());
        assert_eq!(a.len(), 160);
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(sa.steps, 160);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let (a, _, _) = setup(1);
        let (b, _, _) = setup(3);
        assert_eq!(a, b);
    }

    #[test]
    fn tasks_round_robin_and_latent_starts_at_zero() {
        let (buf, _, venv) = setup(1);
        assert_eq!(&buf.task_ids[0..4], &[0, 3, 0, 3]);
        assert!(buf.z[0..16].iter().all(|&z| z == 0.0));
        assert!(buf.trans_mask[0..4].iter().all(|&m| m == 0.0));
        assert!(buf.trans_mask[4..8].iter().all(|&m| m == 1.0));
        assert_eq!(venv.slots[1].env.command, Task::Hover);
    }

    #[test]
    fn degenerate_ranges_pin_mass() {
        let venv = VecEnv::new(6, &[Task::Navigate], DrRanges::OFF, &[2.0; 5], 0.1, 4, 1);
        assert!(venv.slots.iter().all(|s| s.env.mismatch.mass_scale == 1.0));
    }

    #[test]
    fn stored_latent_rebuilds_from_base() {
        let (mut buf, _, _) = setup(1);
        buf.finish(0.99, 0.95, true);
        let cfg_alpha = 0.1f32;
        let agent = Agent::<f32>::new(AgentArch::small(8, 4), &mut ChaCha8Rng::seed_from_u64(0));
        let rows: Vec<usize> = (0..buf.len()).collect();
        let mb = buf.minibatch(&rows);
        let d = agent.tta_delta(mb.features.view());
        for r in 0..buf.len() {
            for c in 0..4 {
                let z = (mb.z_base[(r, c)] + cfg_alpha * mb.trans_mask[r] * d[(r, c)])
                    .clamp(-10.0, 10.0);
                assert!((z - buf.z[r * 4 + c]).abs() < 1e-6);
            }
        }
    }
}
