//! Online adaptation latent: `z <- clamp(z + alpha * f(x, u, x'), ±bound)`,
//! one forward pass per control step and no gradient steps.

use ndarray::Array2;

use crate::env::Transition;
use crate::nets::agent::{Agent, STATE_DIM, TRANSITION_DIM};
use crate::sim::wrap_angle;

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const CLAMP_BOUND: f64 = 10.0;
/// Step sizes compared by the same-weights ablation, in report order.
pub const ABLATION_ALPHAS: [f64; 3] = [0.0, 0.02, 0.1];

/// Scale applied to finite-difference rates so they sit in the tanh range.
const RATE_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub z: Vec<f32>,
    pub alpha: f32,
    pub clamp_bound: f32,
}

impl LatentState {
    pub fn reset(dim: usize, alpha: f64) -> Self {
        Self {
            z: vec![0.0; dim],
            alpha: alpha as f32,
            clamp_bound: CLAMP_BOUND as f32,
        }
    }

    pub fn clear(&mut self) {
        self.z.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Folds one head output into the latent.
    pub fn apply_delta(&mut self, delta: &[f32]) {
        debug_assert_eq!(delta.len(), self.z.len());
        let b = self.clamp_bound;
        for (z, &d) in self.z.iter_mut().zip(delta) {
            *z = (*z + self.alpha * d).clamp(-b, b);
        }
    }

    pub fn norm(&self) -> f64 {
        self.z
            .iter()
            .map(|&x| f64::from(x).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Head input for a transition: `[x; u; (x' - x) / dt * 0.1]`, with the
/// position entries of `x` zeroed.
///
/// Apart from the dropped position, this is a fixed invertible linear
/// re-coordinatization of `[x; u; x']` (yaw difference wrapped) that exposes
/// the one-step residual directly.
pub fn transition_features(t: &Transition, dt: f64) -> [f32; TRANSITION_DIM] {
    let mut out = [0.0f32; TRANSITION_DIM];
    // Absolute position carries no dynamics information; leaving it in lets
    // the latent integrate "where am I" instead of "how does the body respond".
    for i in 3..STATE_DIM {
        out[i] = t.state[i] as f32;
    }
    for i in 0..STATE_DIM {
        let mut diff = t.next_state[i] - t.state[i];
        if i == 8 {
            diff = wrap_angle(diff);
        }
        out[STATE_DIM + 4 + i] = (diff / dt * RATE_SCALE) as f32;
    }
    for i in 0..4 {
        out[STATE_DIM + i] = t.action.0[i] as f32;
    }
    out
}

/// One online update from a single observed transition.
pub fn latent_update(
    latent: &LatentState,
    transition: &Transition,
    agent: &Agent<f32>,
    dt: f64,
) -> LatentState {
    let feats = transition_features(transition, dt);
    let input = Array2::from_shape_vec((1, TRANSITION_DIM), feats.to_vec()).expect("row shape");
    let delta = agent.tta_delta(input.view());
    let mut next = latent.clone();
    next.apply_delta(delta.row(0).as_slice().expect("contiguous row"));
    next
}
