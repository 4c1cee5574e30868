use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::orthogonal_init;
use super::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply<F: Real>(self, x: &mut Array2<F>) {
        if self == Activation::Tanh {
            x.mapv_inplace(|v| v.tanh());
        }
    }

    /// Scales `grad` by the derivative, given the activation's output.
    fn backprop<F: Real>(self, grad: &mut Array2<F>, output: &Array2<F>) {
        if self == Activation::Tanh {
            grad.zip_mut_with(output, |g, &y| *g = *g * (F::one() - y * y));
        }
    }
}

/// Affine layer stored input-major, so a batch forward is `x.dot(weight) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// Fully connected network with tanh hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
    pub output: Activation,
}

/// Activations saved by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<F> {
    /// Input to each layer.
    inputs: Vec<Array2<F>>,
    output: Array2<F>,
}

impl<F> MlpCache<F> {
    pub fn output(&self) -> &Array2<F> {
        &self.output
    }
}

impl<F: Real> Mlp<F> {
    /// `sizes` lists every width from input to output. Hidden layers use gain
    /// `hidden_gain`, the last layer `output_gain`; biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        output: Activation,
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(
            sizes.len() >= 2,
            "an MLP needs at least input and output widths"
        );
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { output_gain } else { hidden_gain };
                let w = orthogonal_init(sizes[i + 1], sizes[i], gain, rng);
                Dense {
                    weight: Array2::from_shape_fn((sizes[i], sizes[i + 1]), |(r, c)| {
                        F::from_f64(w[(c, r)])
                    }),
                    bias: Array1::zeros(sizes[i + 1]),
                }
            })
            .collect();
        Self { layers, output }
    }

    pub fn zeros(sizes: &[usize], output: Activation) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weight: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers, output }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
            output: self.output,
        }
    }

    pub fn cast<G: Real>(&self) -> Mlp<G> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.mapv(|x| G::from_f64(x.as_f64())),
                    bias: l.bias.mapv(|x| G::from_f64(x.as_f64())),
                })
                .collect(),
            output: self.output,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.ncols()
    }

    /// Widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.in_dim()];
        s.extend(self.layers.iter().map(|l| l.weight.ncols()));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &ArrayView2<'_, F>) {
        assert_eq!(
            x.ncols(),
            self.in_dim(),
            "MLP input width {} does not match layer width {}",
            x.ncols(),
            self.in_dim()
        );
    }

    pub fn forward(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        self.check_input(&x);
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weight) + &layer.bias;
            if i == last {
                self.output.apply(&mut z);
            } else {
                Activation::Tanh.apply(&mut z);
            }
            h = z;
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, F>) -> MlpCache<F> {
        self.check_input(&x);
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weight) + &layer.bias;
            if i == last {
                self.output.apply(&mut z);
            } else {
                Activation::Tanh.apply(&mut z);
            }
            inputs.push(h);
            h = z;
        }
        MlpCache { inputs, output: h }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward(
        &self,
        cache: &MlpCache<F>,
        d_output: Array2<F>,
        grads: &mut Mlp<F>,
    ) -> Array2<F> {
        let mut d = d_output;
        self.output.backprop(&mut d, &cache.output);
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            let g = &mut grads.layers[i];
            g.weight += &input.t().dot(&d);
            g.bias += &d.sum_axis(Axis(0));
            let mut d_in = d.dot(&self.layers[i].weight.t());
            if i > 0 {
                Activation::Tanh.backprop(&mut d_in, input);
            }
            d = d_in;
        }
        d
    }
}
