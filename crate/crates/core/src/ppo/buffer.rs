use ndarray::{Array1, Array2};

use super::gae::{compute_gae, normalize};
use super::loss::Minibatch;
use crate::nets::agent::{ACTION_DIM, TRANSITION_DIM};
use crate::task::OBS_DIM;

/// Fixed-capacity, time-major storage for one iteration (`index = t * n_envs + env`).
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub steps: usize,
    pub latent_dim: usize,
    pub obs: Vec<f32>,
    pub task_ids: Vec<usize>,
    pub features: Vec<f32>,
    pub z_base: Vec<f32>,
    pub trans_mask: Vec<f32>,
    /// Latent the policy actually saw.
    pub z: Vec<f32>,
    pub actions: Vec<f32>,
    pub log_probs: Vec<f32>,
    /// Scaled rewards, with the value of the final observation folded in on
    /// time-limit truncations.
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// One step of one env, as handed to [`RolloutBuffer::push`].
pub struct StepRecord<'a> {
    pub obs: &'a [f32],
    pub task_id: usize,
    pub features: &'a [f32],
    pub z_base: &'a [f32],
    pub has_transition: bool,
    pub z: &'a [f32],
    pub action: &'a [f32],
    pub log_prob: f32,
    pub value: f64,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, steps: usize, latent_dim: usize) -> Self {
        let cap = n_envs * steps;
        Self {
            n_envs,
            steps,
            latent_dim,
            obs: Vec::with_capacity(cap * OBS_DIM),
            task_ids: Vec::with_capacity(cap),
            features: Vec::with_capacity(cap * TRANSITION_DIM),
            z_base: Vec::with_capacity(cap * latent_dim),
            trans_mask: Vec::with_capacity(cap),
            z: Vec::with_capacity(cap * latent_dim),
            actions: Vec::with_capacity(cap * ACTION_DIM),
            log_probs: Vec::with_capacity(cap),
            rewards: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            dones: Vec::with_capacity(cap),
            bootstrap: vec![0.0; n_envs],
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.n_envs * self.steps
    }

    pub fn len(&self) -> usize {
        self.task_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity()
    }

    pub fn push(&mut self, rec: StepRecord<'_>) {
        assert!(!self.is_full(), "rollout buffer overflow");
        self.obs.extend_from_slice(rec.obs);
        self.task_ids.push(rec.task_id);
        self.features.extend_from_slice(rec.features);
        self.z_base.extend_from_slice(rec.z_base);
        self.trans_mask
            .push(if rec.has_transition { 1.0 } else { 0.0 });
        self.z.extend_from_slice(rec.z);
        self.actions.extend_from_slice(rec.action);
        self.log_probs.push(rec.log_prob);
        self.values.push(rec.value);
        self.rewards.push(0.0);
        self.dones.push(false);
    }

    /// Sets the outcome of the most recent step of `env`.
    pub fn set_outcome(&mut self, env: usize, reward: f64, done: bool) {
        let t = (self.len() - 1) / self.n_envs;
        let i = t * self.n_envs + env;
        self.rewards[i] = reward;
        self.dones[i] = done;
    }

    /// Runs GAE per env and, optionally, normalizes advantages over the whole batch.
    pub fn finish(&mut self, gamma: f64, lam: f64, normalize_advantages: bool) {
        assert!(self.is_full(), "finish called on a partial buffer");
        let n = self.capacity();
        self.advantages = vec![0.0; n];
        self.returns = vec![0.0; n];
        for e in 0..self.n_envs {
            let idx: Vec<usize> = (0..self.steps).map(|t| t * self.n_envs + e).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (a, ret) = compute_gae(&r, &v, &d, self.bootstrap[e], gamma, lam);
            for (k, &i) in idx.iter().enumerate() {
                self.advantages[i] = a[k];
                self.returns[i] = ret[k];
            }
        }
        if normalize_advantages {
            normalize(&mut self.advantages);
        }
    }

    pub fn minibatch(&self, rows: &[usize]) -> Minibatch<f32> {
        assert_eq!(
            self.advantages.len(),
            self.len(),
            "minibatch drawn before finish"
        );
        let b = rows.len();
        let l = self.latent_dim;
        let gather = |src: &[f32], width: usize| {
            Array2::from_shape_fn((b, width), |(r, c)| src[rows[r] * width + c])
        };
        Minibatch {
            obs: gather(&self.obs, OBS_DIM),
            task_ids: rows.iter().map(|&i| self.task_ids[i]).collect(),
            features: gather(&self.features, TRANSITION_DIM),
            z_base: gather(&self.z_base, l),
            trans_mask: Array1::from_shape_fn(b, |r| self.trans_mask[rows[r]]),
            actions: gather(&self.actions, ACTION_DIM),
            old_log_prob: Array1::from_shape_fn(b, |r| self.log_probs[rows[r]]),
            advantages: Array1::from_shape_fn(b, |r| self.advantages[rows[r]] as f32),
            returns: Array1::from_shape_fn(b, |r| self.returns[rows[r]] as f32),
        }
    }
}
