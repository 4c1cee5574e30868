//! Clipped-surrogate loss and its analytic gradient through every head.
//!
//! The latent used at step `t` is rebuilt from the stored previous latent and
//! the stored previous transition, so the adaptation head receives gradient
//! for its one-step contribution; earlier steps are treated as constants.

use ndarray::{s, Array1, Array2, Axis};

use crate::nets::agent::{Agent, ACTION_DIM, STATE_DIM, SUBGOAL_DIM, SUBGOAL_SCALE};
use crate::nets::gaussian;
use crate::nets::Real;

/// Rows sampled from a rollout, ready for one gradient step.
#[derive(Debug, Clone)]
pub struct Minibatch<F> {
    pub obs: Array2<F>,
    pub task_ids: Vec<usize>,
    /// Features of the transition that produced this step's latent.
    pub features: Array2<F>,
    /// Latent before that transition was folded in.
    pub z_base: Array2<F>,
    /// 1 where a transition exists (0 on the first step of an episode).
    pub trans_mask: Array1<F>,
    /// Unclamped sampled actions.
    pub actions: Array2<F>,
    pub old_log_prob: Array1<F>,
    pub advantages: Array1<F>,
    pub returns: Array1<F>,
}

impl<F: Real> Minibatch<F> {
    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<G: Real>(&self) -> Minibatch<G> {
        let c2 = |a: &Array2<F>| a.mapv(|x| G::from_f64(x.as_f64()));
        let c1 = |a: &Array1<F>| a.mapv(|x| G::from_f64(x.as_f64()));
        Minibatch {
            obs: c2(&self.obs),
            task_ids: self.task_ids.clone(),
            features: c2(&self.features),
            z_base: c2(&self.z_base),
            trans_mask: c1(&self.trans_mask),
            actions: c2(&self.actions),
            old_log_prob: c1(&self.old_log_prob),
            advantages: c1(&self.advantages),
            returns: c1(&self.returns),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub alpha: f64,
    pub clamp_bound: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Rebuilds the step latents; returns `(z, pass)` where `pass` is 1 where the
/// clamp is inactive.
fn rebuild_latent<F: Real>(
    mb: &Minibatch<F>,
    delta: &Array2<F>,
    alpha: F,
    bound: F,
) -> (Array2<F>, Array2<F>) {
    let mut z = mb.z_base.clone();
    let mut pass = Array2::zeros(z.raw_dim());
    for ((r, c), zi) in z.indexed_iter_mut() {
        let pre = *zi + alpha * mb.trans_mask[r] * delta[(r, c)];
        if pre.abs() < bound {
            pass[(r, c)] = F::one();
        }
        *zi = pre.max(-bound).min(bound);
    }
    (z, pass)
}

/// `total = policy + value_coef * value - entropy_coef * entropy` and its
/// gradient with respect to every parameter of `agent`.
pub fn ppo_loss_and_grad<F: Real>(
    agent: &Agent<F>,
    mb: &Minibatch<F>,
    coefs: &LossCoefs,
) -> (LossStats, Agent<F>) {
    let b = mb.len();
    assert!(b > 0, "empty minibatch");
    let bf = F::from_f64(b as f64);
    let alpha = F::from_f64(coefs.alpha);
    let scale = F::from_f64(SUBGOAL_SCALE);
    let latent = agent.arch.latent_dim;
    let mut grads = agent.zeros_like();

    // Forward.
    let tta_cache = agent.tta.forward_cached(mb.features.view());
    let (z, z_pass) = rebuild_latent(
        mb,
        tta_cache.output(),
        alpha,
        F::from_f64(coefs.clamp_bound),
    );
    let enc_in = agent.encoder_input(&mb.task_ids, mb.obs.view());
    let enc_cache = agent.encoder.forward_cached(enc_in.view());
    let g = enc_cache.output() * scale;
    let pol_in = Agent::policy_input(mb.obs.slice(s![.., 0..STATE_DIM]), g.view(), z.view());
    let pol_cache = agent.policy.forward_cached(pol_in.view());
    let mean = pol_cache.output();
    let val_cache = agent.value.forward_cached(mb.obs.view());

    // Policy surrogate.
    let log_std = agent.log_std.as_slice().expect("contiguous");
    let inv_var: Vec<F> = log_std.iter().map(|&ls| (-(ls + ls)).exp()).collect();
    let clip_lo = F::from_f64(1.0 - coefs.clip);
    let clip_hi = F::from_f64(1.0 + coefs.clip);
    let mut d_mean = Array2::zeros((b, ACTION_DIM));
    let mut d_log_std = Array1::<F>::zeros(ACTION_DIM);
    let (mut pl, mut kl, mut clipped) = (0.0, 0.0, 0usize);
    for r in 0..b {
        let u = mb.actions.row(r);
        let m = mean.row(r);
        let logp = gaussian::log_prob(
            u.as_slice().expect("contiguous"),
            m.to_owned().as_slice().expect("contiguous"),
            log_std,
        );
        let log_ratio = logp - mb.old_log_prob[r];
        let ratio = log_ratio.exp();
        let a = mb.advantages[r];
        let unclipped = ratio * a;
        let clamped = ratio.max(clip_lo).min(clip_hi) * a;
        pl -= unclipped.min(clamped).as_f64();
        kl -= log_ratio.as_f64();
        if (ratio - F::one()).abs().as_f64() > coefs.clip {
            clipped += 1;
        }
        // d(-min)/d logp: the unclipped branch carries gradient ratio * A.
        if unclipped <= clamped {
            let d_logp = -a * ratio / bf;
            for i in 0..ACTION_DIM {
                let diff = u[i] - m[i];
                d_mean[(r, i)] = d_logp * diff * inv_var[i];
                d_log_std[i] += d_logp * (diff * diff * inv_var[i] - F::one());
            }
        }
    }
    let ent = gaussian::entropy(log_std);
    let ent_coef = F::from_f64(coefs.entropy_coef);
    d_log_std.mapv_inplace(|x| x - ent_coef);
    grads.log_std = d_log_std;

    // Value regression.
    let v = val_cache.output().column(0);
    let vc = F::from_f64(coefs.value_coef);
    let two = F::from_f64(2.0);
    let mut vl = 0.0;
    let mut d_v = Array2::zeros((b, 1));
    for r in 0..b {
        let err = v[r] - mb.returns[r];
        vl += err.as_f64().powi(2);
        d_v[(r, 0)] = vc * two * err / bf;
    }
    vl /= b as f64;
    agent.value.backward(&val_cache, d_v, &mut grads.value);

    // Policy -> (subgoal -> encoder -> embedding, latent -> adaptation head).
    let d_pol_in = agent.policy.backward(&pol_cache, d_mean, &mut grads.policy);
    let d_g = d_pol_in
        .slice(s![.., STATE_DIM..STATE_DIM + SUBGOAL_DIM])
        .to_owned()
        * scale;
    let d_enc_in = agent.encoder.backward(&enc_cache, d_g, &mut grads.encoder);
    let de = agent.arch.embed_dim;
    for (r, &t) in mb.task_ids.iter().enumerate() {
        let mut row = grads.embeddings.row_mut(t);
        row += &d_enc_in.slice(s![r, 0..de]);
    }
    let z0 = STATE_DIM + SUBGOAL_DIM;
    let mut d_delta = d_pol_in.slice(s![.., z0..z0 + latent]).to_owned() * &z_pass;
    let mask = mb.trans_mask.view().insert_axis(Axis(1));
    d_delta = d_delta * &mask * alpha;
    agent.tta.backward(&tta_cache, d_delta, &mut grads.tta);

    let policy = pl / b as f64;
    let entropy = ent.as_f64();
    let stats = LossStats {
        total: policy + coefs.value_coef * vl - coefs.entropy_coef * entropy,
        policy,
        value: vl,
        entropy,
        approx_kl: kl / b as f64,
        clip_fraction: clipped as f64 / b as f64,
    };
    (stats, grads)
}
