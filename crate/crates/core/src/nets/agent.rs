//! The four trainable heads and the learned task embedding, bundled so that
//! gradients, optimizer state and checkpoints can walk them uniformly.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp};
use super::scalar::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::task::OBS_DIM;

pub const STATE_DIM: usize = 12;
pub const SUBGOAL_DIM: usize = 3;
pub const ACTION_DIM: usize = 4;
pub const TRANSITION_DIM: usize = 2 * STATE_DIM + ACTION_DIM;
pub const NUM_TASKS: usize = 5;
/// Subgoals are position deltas in `(-SUBGOAL_SCALE, SUBGOAL_SCALE)` meters.
pub const SUBGOAL_SCALE: f64 = 8.0;
pub const LOG_STD_INIT: f64 = -1.5;

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const HEAD_GAIN: f64 = 0.01;
const VALUE_GAIN: f64 = 1.0;

/// Hidden widths of every head. The defaults are the production sizes; tests
/// shrink them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentArch {
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub encoder_hidden: Vec<usize>,
    pub tta_hidden: Vec<usize>,
    pub embed_dim: usize,
    pub latent_dim: usize,
}

impl Default for AgentArch {
    fn default() -> Self {
        Self {
            policy_hidden: vec![256, 256, 256],
            value_hidden: vec![256, 256, 256],
            encoder_hidden: vec![64, 64],
            // 28*106 + 106 + 106*32 + 32 = 6498 parameters.
            tta_hidden: vec![106],
            embed_dim: 32,
            latent_dim: 32,
        }
    }
}

impl AgentArch {
    pub fn small(hidden: usize, latent_dim: usize) -> Self {
        Self {
            policy_hidden: vec![hidden, hidden],
            value_hidden: vec![hidden, hidden],
            encoder_hidden: vec![hidden],
            tta_hidden: vec![hidden],
            embed_dim: 8,
            latent_dim,
        }
    }

    pub fn policy_input(&self) -> usize {
        STATE_DIM + SUBGOAL_DIM + self.latent_dim
    }

    pub fn encoder_input(&self) -> usize {
        self.embed_dim + OBS_DIM
    }

    fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend_from_slice(hidden);
        w.push(output);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent<F> {
    pub arch: AgentArch,
    /// `[state; subgoal; latent] -> tanh mean`.
    pub policy: Mlp<F>,
    /// State-independent log standard deviation of the action distribution.
    pub log_std: Array1<F>,
    /// `observation -> value`.
    pub value: Mlp<F>,
    /// `[embedding; observation] -> tanh subgoal` (scaled by [`SUBGOAL_SCALE`]).
    pub encoder: Mlp<F>,
    /// One row per task.
    pub embeddings: Array2<F>,
    /// `transition features -> tanh latent delta`.
    pub tta: Mlp<F>,
}

impl<F: Real> Agent<F> {
    pub fn new<R: Rng + ?Sized>(arch: AgentArch, rng: &mut R) -> Self {
        let policy = Mlp::new(
            &AgentArch::widths(arch.policy_input(), &arch.policy_hidden, ACTION_DIM),
            Activation::Tanh,
            HIDDEN_GAIN,
            HEAD_GAIN,
            rng,
        );
        let value = Mlp::new(
            &AgentArch::widths(OBS_DIM, &arch.value_hidden, 1),
            Activation::Identity,
            HIDDEN_GAIN,
            VALUE_GAIN,
            rng,
        );
        let encoder = Mlp::new(
            &AgentArch::widths(arch.encoder_input(), &arch.encoder_hidden, SUBGOAL_DIM),
            Activation::Tanh,
            HIDDEN_GAIN,
            HEAD_GAIN,
            rng,
        );
        let tta = Mlp::new(
            &AgentArch::widths(TRANSITION_DIM, &arch.tta_hidden, arch.latent_dim),
            Activation::Tanh,
            HIDDEN_GAIN,
            HEAD_GAIN,
            rng,
        );
        let embeddings = Array2::from_shape_fn((NUM_TASKS, arch.embed_dim), |_| {
            F::from_f64(rng.sample::<f64, _>(StandardNormal))
        });
        Self {
            policy,
            log_std: Array1::from_elem(ACTION_DIM, F::from_f64(LOG_STD_INIT)),
            value,
            encoder,
            embeddings,
            tta,
            arch,
        }
    }

    /// All-zero parameters of the given architecture.
    pub fn zeros(arch: AgentArch) -> Self {
        Self {
            policy: Mlp::zeros(
                &AgentArch::widths(arch.policy_input(), &arch.policy_hidden, ACTION_DIM),
                Activation::Tanh,
            ),
            log_std: Array1::zeros(ACTION_DIM),
            value: Mlp::zeros(
                &AgentArch::widths(OBS_DIM, &arch.value_hidden, 1),
                Activation::Identity,
            ),
            encoder: Mlp::zeros(
                &AgentArch::widths(arch.encoder_input(), &arch.encoder_hidden, SUBGOAL_DIM),
                Activation::Tanh,
            ),
            embeddings: Array2::zeros((NUM_TASKS, arch.embed_dim)),
            tta: Mlp::zeros(
                &AgentArch::widths(TRANSITION_DIM, &arch.tta_hidden, arch.latent_dim),
                Activation::Tanh,
            ),
            arch,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            policy: self.policy.zeros_like(),
            log_std: Array1::zeros(self.log_std.raw_dim()),
            value: self.value.zeros_like(),
            encoder: self.encoder.zeros_like(),
            embeddings: Array2::zeros(self.embeddings.raw_dim()),
            tta: self.tta.zeros_like(),
        }
    }

    pub fn cast<G: Real>(&self) -> Agent<G> {
        Agent {
            arch: self.arch.clone(),
            policy: self.policy.cast(),
            log_std: self.log_std.mapv(|x| G::from_f64(x.as_f64())),
            value: self.value.cast(),
            encoder: self.encoder.cast(),
            embeddings: self.embeddings.mapv(|x| G::from_f64(x.as_f64())),
            tta: self.tta.cast(),
        }
    }

    /// Every parameter tensor with its name and shape, in a fixed order.
    pub fn params(&self) -> Vec<(String, Vec<usize>, &[F])> {
        let mut out = Vec::new();
        push_mlp(&mut out, "policy", &self.policy);
        out.push((
            "policy.log_std".into(),
            vec![ACTION_DIM],
            slice(&self.log_std),
        ));
        push_mlp(&mut out, "value", &self.value);
        push_mlp(&mut out, "encoder", &self.encoder);
        out.push((
            "encoder.embedding".into(),
            self.embeddings.shape().to_vec(),
            self.embeddings.as_slice().expect("standard layout"),
        ));
        push_mlp(&mut out, "tta", &self.tta);
        out
    }

    /// Mutable views in the same order as [`Agent::params`].
    pub fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::new();
        push_mlp_mut(&mut out, &mut self.policy);
        out.push(self.log_std.as_slice_mut().expect("standard layout"));
        push_mlp_mut(&mut out, &mut self.value);
        push_mlp_mut(&mut out, &mut self.encoder);
        out.push(self.embeddings.as_slice_mut().expect("standard layout"));
        push_mlp_mut(&mut out, &mut self.tta);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, _, p)| p.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|(_, _, p)| p.iter().all(|x| x.is_finite()))
    }

    /// Rows of the embedding table for each task id.
    pub fn embed(&self, task_ids: &[usize]) -> Array2<F> {
        let mut out = Array2::zeros((task_ids.len(), self.arch.embed_dim));
        for (mut row, &t) in out.rows_mut().into_iter().zip(task_ids) {
            row.assign(&self.embeddings.row(t));
        }
        out
    }

    pub fn encoder_input(&self, task_ids: &[usize], obs: ArrayView2<'_, F>) -> Array2<F> {
        let emb = self.embed(task_ids);
        hcat(&[emb.view(), obs.reborrow()])
    }

    /// Position-delta subgoal for each (task, observation) row.
    pub fn subgoal(&self, task_ids: &[usize], obs: ArrayView2<'_, F>) -> Array2<F> {
        let out = self
            .encoder
            .forward(self.encoder_input(task_ids, obs).view());
        out * F::from_f64(SUBGOAL_SCALE)
    }

    pub fn policy_input(
        state: ArrayView2<'_, F>,
        subgoal: ArrayView2<'_, F>,
        latent: ArrayView2<'_, F>,
    ) -> Array2<F> {
        hcat(&[state.reborrow(), subgoal.reborrow(), latent.reborrow()])
    }

    /// Action mean in `(-1, 1)`.
    pub fn policy_mean(
        &self,
        state: ArrayView2<'_, F>,
        subgoal: ArrayView2<'_, F>,
        latent: ArrayView2<'_, F>,
    ) -> Array2<F> {
        self.policy
            .forward(Self::policy_input(state, subgoal, latent).view())
    }

    pub fn value_of(&self, obs: ArrayView2<'_, F>) -> Array1<F> {
        self.value.forward(obs).column(0).to_owned()
    }

    pub fn tta_delta(&self, features: ArrayView2<'_, F>) -> Array2<F> {
        self.tta.forward(features)
    }

    /// Named `f32` snapshot of every parameter.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        self.params()
            .into_iter()
            .map(|(name, shape, data)| {
                let data = data.iter().map(|x| x.as_f64() as f32).collect();
                (name, Tensor { shape, data })
            })
            .collect()
    }

    /// Rebuilds an agent of the given architecture from named tensors.
    pub fn from_tensors(arch: AgentArch, tensors: &[(String, Tensor)]) -> Result<Self> {
        let template = Agent::<F>::zeros(arch);
        let expected: Vec<(String, Vec<usize>)> = template
            .params()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        if tensors.len() != expected.len() {
            return Err(Error::config(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        let mut agent = template;
        for (slot, (name, shape)) in agent.params_mut().into_iter().zip(&expected) {
            let (_, t) = tensors
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::config(format!("missing tensor `{name}`")))?;
            if &t.shape != shape {
                return Err(Error::config(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    t.shape, shape
                )));
            }
            for (dst, &src) in slot.iter_mut().zip(&t.data) {
                *dst = F::from_f64(f64::from(src));
            }
        }
        Ok(agent)
    }
}

fn slice<F>(a: &Array1<F>) -> &[F] {
    a.as_slice().expect("standard layout")
}

fn push_mlp<'a, F: Real>(
    out: &mut Vec<(String, Vec<usize>, &'a [F])>,
    prefix: &str,
    mlp: &'a Mlp<F>,
) {
    for (i, l) in mlp.layers.iter().enumerate() {
        out.push((
            format!("{prefix}.l{i}.weight"),
            l.weight.shape().to_vec(),
            l.weight.as_slice().expect("standard layout"),
        ));
        out.push((
            format!("{prefix}.l{i}.bias"),
            l.bias.shape().to_vec(),
            slice(&l.bias),
        ));
    }
}

fn push_mlp_mut<'a, F: Real>(out: &mut Vec<&'a mut [F]>, mlp: &'a mut Mlp<F>) {
    for l in mlp.layers.iter_mut() {
        out.push(l.weight.as_slice_mut().expect("standard layout"));
        out.push(l.bias.as_slice_mut().expect("standard layout"));
    }
}

/// Column-wise concatenation of equally tall blocks.
pub fn hcat<F: Real>(parts: &[ArrayView2<'_, F>]) -> Array2<F> {
    let rows = parts[0].nrows();
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Array2::zeros((rows, cols));
    let mut c = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows, "matching batch");
        out.slice_mut(s![.., c..c + p.ncols()]).assign(p);
        c += p.ncols();
    }
    out
}
