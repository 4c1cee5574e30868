use rand::seq::SliceRandom;
use rand::Rng;

use super::buffer::RolloutBuffer;
use super::config::PpoConfig;
use super::loss::{ppo_loss_and_grad, LossCoefs, LossStats};
use crate::error::{Error, Result};
use crate::nets::optim::{clip_grad_norm, Adam};
use crate::nets::Agent;
use crate::tta::CLAMP_BOUND;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub grad_norm: f64,
    pub lr: f64,
}

pub fn loss_coefs(cfg: &PpoConfig) -> LossCoefs {
    LossCoefs {
        clip: cfg.clip,
        entropy_coef: cfg.entropy_coef,
        value_coef: cfg.value_coef,
        alpha: cfg.alpha,
        clamp_bound: CLAMP_BOUND,
    }
}

/// `epochs` passes of shuffled minibatches over a finished buffer. Returns
/// losses averaged over every minibatch.
pub fn ppo_update<R: Rng + ?Sized>(
    agent: &mut Agent<f32>,
    adam: &mut Adam<f32>,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    iteration: usize,
    rng: &mut R,
) -> Result<UpdateStats> {
    assert_eq!(
        buf.advantages.len(),
        buf.len(),
        "buffer must be finished before the update"
    );
    let lr = cfg.lr_at(iteration);
    let coefs = loss_coefs(cfg);
    let mb_size = buf.len() / cfg.minibatches;
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut acc = UpdateStats {
        lr,
        ..Default::default()
    };
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for rows in order.chunks(mb_size) {
            let mb = buf.minibatch(rows);
            let (stats, mut grads) = ppo_loss_and_grad(agent, &mb, &coefs);
            if !stats.total.is_finite() || !grads.all_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at iteration {iteration}: policy={} value={} entropy={} kl={} grad_finite={}",
                    stats.policy,
                    stats.value,
                    stats.entropy,
                    stats.approx_kl,
                    grads.all_finite()
                )));
            }
            let norm = clip_grad_norm(&mut grads, cfg.max_grad_norm);
            adam.step(agent, &grads, lr);
            acc.loss.total += stats.total;
            acc.loss.policy += stats.policy;
            acc.loss.value += stats.value;
            acc.loss.entropy += stats.entropy;
            acc.loss.approx_kl += stats.approx_kl;
            acc.loss.clip_fraction += stats.clip_fraction;
            acc.grad_norm += norm;
            count += 1.0;
        }
    }
    acc.loss.total /= count;
    acc.loss.policy /= count;
    acc.loss.value /= count;
    acc.loss.entropy /= count;
    acc.loss.approx_kl /= count;
    acc.loss.clip_fraction /= count;
    acc.grad_norm /= count;
    Ok(acc)
}
