use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::rollout::{collect_rollout, RolloutStats, VecEnv};
use super::update::{ppo_update, UpdateStats};
use crate::error::{Error, Result};
use crate::nets::optim::Adam;
use crate::nets::{save_checkpoint, Agent, CheckpointMeta};
use crate::run::{config_digest, fmt_f, CsvWriter};
use crate::sim::DrPreset;
use crate::task::{Curriculum, Task};

pub const TRAIN_LOG_HEADER: &str =
    "iteration,steps,sr,sr_ema,curriculum_m,mean_ep_len,mean_reward,loss_pi,loss_v,entropy,lr";
pub const TASK_LOG_HEADER: &str = "iteration,task,episodes,sr,sr_ema,curriculum_m";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskSelection {
    Single(Task),
    /// All five tasks, envs assigned round-robin.
    Multi,
}

impl TaskSelection {
    pub fn tasks(self) -> Vec<Task> {
        match self {
            TaskSelection::Single(t) => vec![t],
            TaskSelection::Multi => Task::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub tasks: TaskSelection,
    pub dr: DrPreset,
    pub seed: u64,
    /// Pins the goal distance; the curriculum EMA is still tracked.
    pub fixed_distance: Option<f64>,
    /// Write a checkpoint every this many iterations (0: final only).
    pub checkpoint_every: usize,
    /// End training early once the success-rate EMA reaches this value.
    pub stop_at_sr_ema: Option<f64>,
    /// Env-stepping threads. Does not change results, so it is left out of
    /// the config digest.
    #[serde(skip, default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl TrainConfig {
    pub fn single(task: Task, ppo: PpoConfig, dr: DrPreset, seed: u64) -> Self {
        Self {
            ppo,
            tasks: TaskSelection::Single(task),
            dr,
            seed,
            fixed_distance: None,
            checkpoint_every: 0,
            stop_at_sr_ema: None,
            workers: 1,
        }
    }

    pub fn multitask(ppo: PpoConfig, dr: DrPreset, seed: u64) -> Self {
        Self {
            tasks: TaskSelection::Multi,
            ..Self::single(Task::Navigate, ppo, dr, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.dr.ranges().validate()?;
        if let Some(d) = self.fixed_distance {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::config(format!(
                    "fixed distance must be positive, got {d}"
                )));
            }
        }
        if self.tasks == TaskSelection::Multi && self.ppo.n_envs % Task::ALL.len() != 0 {
            return Err(Error::config(format!(
                "multi-task training needs n_envs divisible by 5, got {}",
                self.ppo.n_envs
            )));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        config_digest(self)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Cumulative environment steps.
    pub steps: u64,
    /// Success rate over episodes that ended this iteration (NaN if none did).
    pub sr: f64,
    pub sr_ema: f64,
    pub curriculum_m: f64,
    pub mean_ep_len: f64,
    pub mean_reward: f64,
    pub update: UpdateStats,
    pub rollout_episodes: usize,
}

impl IterationLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:e}",
            self.iteration,
            self.steps,
            fmt_f(self.sr),
            fmt_f(self.sr_ema),
            fmt_f(self.curriculum_m),
            fmt_f(self.mean_ep_len),
            fmt_f(self.mean_reward),
            fmt_f(self.update.loss.policy),
            fmt_f(self.update.loss.value),
            fmt_f(self.update.loss.entropy),
            self.update.lr
        )
    }
}

/// Drives collect -> curriculum -> update, one iteration per [`Trainer::step`].
pub struct Trainer {
    cfg: TrainConfig,
    digest: String,
    agent: Agent<f32>,
    adam: Adam<f32>,
    venv: VecEnv,
    curricula: [Curriculum; 5],
    tasks: Vec<Task>,
    shuffle_rng: ChaCha8Rng,
    iteration: usize,
    env_steps: u64,
    last_stats: RolloutStats,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let agent = Agent::new(cfg.ppo.arch.clone(), &mut init_rng);
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle_rng.set_stream(1);
        let mut curricula = Task::ALL.map(Curriculum::for_task);
        if let Some(d) = cfg.fixed_distance {
            curricula.iter_mut().for_each(|c| c.distance = d);
        }
        let tasks = cfg.tasks.tasks();
        let distances = curricula.map(|c| c.distance);
        let venv = VecEnv::new(
            cfg.ppo.n_envs,
            &tasks,
            cfg.dr.ranges(),
            &distances,
            cfg.ppo.alpha,
            cfg.ppo.arch.latent_dim,
            cfg.seed,
        );
        Ok(Self {
            digest: cfg.digest(),
            adam: Adam::new(&agent),
            agent,
            venv,
            curricula,
            tasks,
            shuffle_rng,
            iteration: 0,
            env_steps: 0,
            last_stats: RolloutStats::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn agent(&self) -> &Agent<f32> {
        &self.agent
    }

    pub fn into_agent(self) -> Agent<f32> {
        self.agent
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn curriculum(&self, task: Task) -> Curriculum {
        self.curricula[task.index()]
    }

    pub fn last_rollout(&self) -> &RolloutStats {
        &self.last_stats
    }

    /// Mean success-rate EMA over the trained tasks.
    pub fn sr_ema(&self) -> f64 {
        self.tasks
            .iter()
            .map(|t| self.curricula[t.index()].sr_ema)
            .sum::<f64>()
            / self.tasks.len() as f64
    }

    pub fn is_finished(&self) -> bool {
        if self.iteration >= self.cfg.ppo.total_iterations {
            return true;
        }
        matches!(self.cfg.stop_at_sr_ema, Some(target) if self.iteration > 0 && self.sr_ema() >= target)
    }

    pub fn checkpoint_meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            config_digest: self.digest.clone(),
            iteration: self.iteration as u64,
            seed: self.cfg.seed,
        }
    }

    pub fn step(&mut self) -> Result<IterationLog> {
        let distances = self.curricula.map(|c| c.distance);
        let (mut buf, stats) = collect_rollout(
            &self.agent,
            &mut self.venv,
            &distances,
            &self.cfg.ppo,
            self.cfg.workers,
        )?;
        self.env_steps += stats.steps as u64;

        for &task in &self.tasks {
            if let Some(sr) = stats.task_success_rate(task) {
                let c = &mut self.curricula[task.index()];
                c.update(sr);
                if let Some(d) = self.cfg.fixed_distance {
                    c.distance = d;
                }
            }
        }

        let p = &self.cfg.ppo;
        buf.finish(p.gamma, p.gae_lambda, p.normalize_advantages);
        let update = ppo_update(
            &mut self.agent,
            &mut self.adam,
            &buf,
            p,
            self.iteration,
            &mut self.shuffle_rng,
        )?;

        let lead = self.tasks[0];
        let log = IterationLog {
            iteration: self.iteration,
            steps: self.env_steps,
            sr: stats.success_rate().unwrap_or(f64::NAN),
            sr_ema: self.sr_ema(),
            curriculum_m: self.curricula[lead.index()].distance,
            mean_ep_len: stats.mean_episode_len().unwrap_or(f64::NAN),
            mean_reward: stats.mean_reward(),
            update,
            rollout_episodes: stats.episodes,
        };
        self.last_stats = stats;
        self.iteration += 1;
        Ok(log)
    }

    /// Trains to completion, writing the log and checkpoints under `out_dir`
    /// when given. `on_iteration` sees every log row as it is produced.
    pub fn run(
        mut self,
        out_dir: Option<&Path>,
        mut on_iteration: impl FnMut(&IterationLog),
    ) -> Result<TrainOutcome> {
        let seed = self.cfg.seed;
        let mut log_csv = match out_dir {
            Some(dir) => Some(CsvWriter::create(
                dir.join("train_log.csv"),
                &self.digest,
                seed,
                TRAIN_LOG_HEADER,
            )?),
            None => None,
        };
        let mut task_csv = match (out_dir, self.cfg.tasks) {
            (Some(dir), TaskSelection::Multi) => Some(CsvWriter::create(
                dir.join("task_curricula.csv"),
                &self.digest,
                seed,
                TASK_LOG_HEADER,
            )?),
            _ => None,
        };
        let mut logs = Vec::new();
        let mut checkpoints = Vec::new();
        while !self.is_finished() {
            let log = self.step()?;
            if let Some(w) = log_csv.as_mut() {
                w.row(&log.csv_row())?;
                w.flush()?;
            }
            if let Some(w) = task_csv.as_mut() {
                for &task in &self.tasks {
                    let c = self.curricula[task.index()];
                    let sr = self.last_stats.task_success_rate(task).unwrap_or(f64::NAN);
                    w.row(&format!(
                        "{},{},{},{},{},{}",
                        log.iteration,
                        task.index(),
                        self.last_stats.per_task[task.index()].0,
                        fmt_f(sr),
                        fmt_f(c.sr_ema),
                        fmt_f(c.distance)
                    ))?;
                }
                w.flush()?;
            }
            on_iteration(&log);
            logs.push(log);
            let every = self.cfg.checkpoint_every;
            if let Some(dir) = out_dir {
                if every > 0 && self.iteration % every == 0 && !self.is_finished() {
                    let path = dir.join(format!("checkpoint_{:05}.abtt", self.iteration));
                    save_checkpoint(&self.agent, &self.checkpoint_meta(), &path)?;
                    checkpoints.push(path);
                }
            }
        }
        if let Some(dir) = out_dir {
            let path = dir.join("final.abtt");
            save_checkpoint(&self.agent, &self.checkpoint_meta(), &path)?;
            checkpoints.push(path);
        }
        Ok(TrainOutcome {
            digest: self.digest.clone(),
            curricula: self.curricula,
            env_steps: self.env_steps,
            logs,
            checkpoints,
            agent: self.agent,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent<f32>,
    pub logs: Vec<IterationLog>,
    pub curricula: [Curriculum; 5],
    pub env_steps: u64,
    pub digest: String,
    pub checkpoints: Vec<PathBuf>,
}

pub fn train(cfg: TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    Trainer::new(cfg)?.run(out_dir, |_| {})
}
