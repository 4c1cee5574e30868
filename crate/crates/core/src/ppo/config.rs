use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::AgentArch;
use crate::tta::DEFAULT_ALPHA;

/// PPO hyperparameters plus the rollout shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    /// Initial learning rate; decays linearly to zero over `total_iterations`.
    pub lr0: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub n_envs: usize,
    /// Environment steps per iteration summed over all envs.
    pub rollout_steps_total: usize,
    pub epochs: usize,
    pub minibatches: usize,
    pub max_grad_norm: f64,
    pub total_iterations: usize,
    /// Multiplies environment rewards before they reach the value targets.
    pub reward_scale: f64,
    pub normalize_advantages: bool,
    /// Latent step size used inside rollouts.
    pub alpha: f64,
    pub arch: AgentArch,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self::smoke()
    }
}

impl PpoConfig {
    /// 32 envs x 128 steps = 4096 steps per iteration.
    pub fn smoke() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            lr0: 3e-4,
            entropy_coef: 1e-3,
            value_coef: 0.5,
            n_envs: 32,
            rollout_steps_total: 4096,
            epochs: 4,
            minibatches: 8,
            max_grad_norm: 0.5,
            total_iterations: 250,
            reward_scale: 0.01,
            normalize_advantages: true,
            alpha: DEFAULT_ALPHA,
            arch: AgentArch::default(),
        }
    }

    /// 32 envs x 4096 steps = 131,072 steps per iteration; 50 iterations is
    /// about 6.5M steps.
    pub fn full() -> Self {
        Self {
            rollout_steps_total: 4096 * 32,
            total_iterations: 50,
            ..Self::smoke()
        }
    }

    /// 40 envs, 8 per task.
    pub fn multitask() -> Self {
        Self {
            n_envs: 40,
            rollout_steps_total: 4000,
            ..Self::smoke()
        }
    }

    pub fn steps_per_env(&self) -> usize {
        self.rollout_steps_total / self.n_envs
    }

    pub fn minibatch_size(&self) -> usize {
        self.rollout_steps_total / self.minibatches
    }

    /// Learning rate for the 0-based `iteration`; reaches zero at `total_iterations`.
    pub fn lr_at(&self, iteration: usize) -> f64 {
        let frac = iteration as f64 / self.total_iterations.max(1) as f64;
        self.lr0 * (1.0 - frac).max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: usize, name: &str| {
            if v == 0 {
                Err(Error::config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive(self.n_envs, "n_envs")?;
        positive(self.rollout_steps_total, "rollout_steps_total")?;
        positive(self.epochs, "epochs")?;
        positive(self.minibatches, "minibatches")?;
        positive(self.total_iterations, "total_iterations")?;
        if self.rollout_steps_total % self.n_envs != 0 {
            return Err(Error::config(format!(
                "rollout_steps_total {} is not divisible by n_envs {}",
                self.rollout_steps_total, self.n_envs
            )));
        }
        if self.rollout_steps_total % self.minibatches != 0 {
            return Err(Error::config(format!(
                "rollout_steps_total {} is not divisible by minibatches {}",
                self.rollout_steps_total, self.minibatches
            )));
        }
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit(self.gamma, "gamma")?;
        unit(self.gae_lambda, "gae_lambda")?;
        for (v, name) in [
            (self.clip, "clip"),
            (self.lr0, "lr0"),
            (self.entropy_coef, "entropy_coef"),
            (self.value_coef, "value_coef"),
            (self.max_grad_norm, "max_grad_norm"),
            (self.reward_scale, "reward_scale"),
            (self.alpha, "alpha"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.arch.latent_dim == 0 || self.arch.embed_dim == 0 {
            return Err(Error::config(
                "latent and embedding widths must be positive",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for c in [
            PpoConfig::smoke(),
            PpoConfig::full(),
            PpoConfig::multitask(),
        ] {
            c.validate().unwrap();
        }
        assert_eq!(PpoConfig::smoke().steps_per_env(), 128);
        assert_eq!(PpoConfig::full().steps_per_env(), 4096);
        assert_eq!(PpoConfig::full().rollout_steps_total, 131_072);
        assert_eq!(PpoConfig::multitask().n_envs, 40);
    }

    #[test]
    fn divisibility_is_enforced() {
        let c = PpoConfig {
            n_envs: 30,
            ..PpoConfig::smoke()
        };
        assert!(c.validate().is_err());
        let c = PpoConfig {
            minibatches: 7,
            ..PpoConfig::smoke()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn lr_schedule_is_linear() {
        let c = PpoConfig {
            total_iterations: 100,
            ..PpoConfig::smoke()
        };
        assert_eq!(c.lr_at(0), 3e-4);
        assert!((c.lr_at(50) - 1.5e-4).abs() < 1e-15);
        assert!(c.lr_at(100).abs() < 1e-18);
        for i in 0..100 {
            assert!(c.lr_at(i + 1) < c.lr_at(i));
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: PpoConfig = serde_json::from_str(r#"{"n_envs": 16, "clip": 0.1}"#).unwrap();
        assert_eq!(c.n_envs, 16);
        assert_eq!(c.clip, 0.1);
        assert_eq!(c.gamma, 0.99);
    }
}
