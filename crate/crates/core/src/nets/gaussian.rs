//! Diagonal Gaussian action head.

use rand::Rng;
use rand_distr::StandardNormal;

use super::scalar::Real;
use crate::sim::ControlInput;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log-density of `u` under `N(mean, diag(exp(2 * log_std)))`.
pub fn log_prob<F: Real>(u: &[F], mean: &[F], log_std: &[F]) -> F {
    let half = F::from_f64(0.5);
    let c = F::from_f64(0.5 * LN_2PI);
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&u, &m), &ls)| {
            let z = (u - m) / ls.exp();
            -half * z * z - ls - c
        })
        .sum()
}

pub fn entropy<F: Real>(log_std: &[F]) -> F {
    let c = F::from_f64(0.5 * (1.0 + LN_2PI));
    log_std.iter().map(|&ls| ls + c).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    /// Clamped command sent to the vehicle.
    pub control: ControlInput,
    /// Unclamped Gaussian draw; the density is evaluated here.
    pub raw: [f32; 4],
    pub log_prob: f32,
}

/// Draws `u ~ N(mean, std^2)` and clamps it to the command box.
pub fn sample_action<R: Rng + ?Sized>(mean: &[f32], log_std: &[f32], rng: &mut R) -> ActionSample {
    let mut raw = [0.0f32; 4];
    for i in 0..4 {
        let eps: f64 = rng.sample(StandardNormal);
        raw[i] = mean[i] + log_std[i].exp() * eps as f32;
    }
    finish(raw, mean, log_std)
}

/// The distribution mode, used for evaluation.
pub fn deterministic_action(mean: &[f32], log_std: &[f32]) -> ActionSample {
    let mut raw = [0.0f32; 4];
    raw.copy_from_slice(&mean[..4]);
    finish(raw, mean, log_std)
}

fn finish(raw: [f32; 4], mean: &[f32], log_std: &[f32]) -> ActionSample {
    ActionSample {
        control: ControlInput::new(raw.map(f64::from)),
        raw,
        log_prob: log_prob(&raw, &mean[..4], &log_std[..4]),
    }
}
