use super::agent::Agent;
use super::scalar::Real;

/// Adaptive-moment optimizer with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(agent: &Agent<F>) -> Self {
        let zeros: Vec<Vec<F>> = agent
            .params()
            .iter()
            .map(|(_, _, p)| vec![F::zero(); p.len()])
            .collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, agent: &mut Agent<F>, grads: &Agent<F>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = F::from_f64(self.beta1);
        let b2 = F::from_f64(self.beta2);
        let one = F::one();
        let c1 = F::from_f64(1.0 - self.beta1.powi(t));
        let c2 = F::from_f64(1.0 - self.beta2.powi(t));
        let lr = F::from_f64(lr);
        let eps = F::from_f64(self.eps);
        let grads = grads.params();
        for (k, param) in agent.params_mut().into_iter().enumerate() {
            let g = grads[k].2;
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..param.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

pub fn grad_norm<F: Real>(grads: &Agent<F>) -> f64 {
    grads
        .params()
        .iter()
        .flat_map(|(_, _, p)| p.iter())
        .map(|x| x.as_f64().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm<F: Real>(grads: &mut Agent<F>, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = F::from_f64(max_norm / norm);
        for p in grads.params_mut() {
            p.iter_mut().for_each(|x| *x *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::agent::AgentArch;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_by_lr() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = Agent::<f64>::new(AgentArch::small(3, 2), &mut rng);
        let before = agent.clone();
        let mut grads = agent.zeros_like();
        grads.log_std.fill(2.5);
        let mut opt = Adam::new(&agent);
        opt.step(&mut agent, &grads, 1e-3);
        // Bias correction makes the first step exactly lr * sign(g).
        for (a, b) in agent.log_std.iter().zip(before.log_std.iter()) {
            assert!((b - a - 1e-3).abs() < 1e-9);
        }
        assert_eq!(agent.policy, before.policy);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Agent::<f64>::new(AgentArch::small(3, 2), &mut rng);
        let mut grads = agent.clone();
        let before = clip_grad_norm(&mut grads, 0.5);
        assert!(before > 0.5);
        assert!((grad_norm(&grads) - 0.5).abs() < 1e-12);
        let again = clip_grad_norm(&mut grads, 10.0);
        assert!((again - 0.5).abs() < 1e-12);
    }
}
