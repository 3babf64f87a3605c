//! Fully connected networks with hand-written forward and backward passes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::invalid(
                "activation",
                format!("unknown activation {other:?}, expected relu, tanh, sigmoid or identity"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// Layer specs for `sizes[0] -> sizes[1] -> ... -> sizes[n]`, with `hidden`
/// on every layer but the last, which uses `output`.
pub fn mlp_specs(sizes: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
    let n = sizes.len().saturating_sub(1);
    sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec::new(w[0], w[1], if i + 1 == n { output } else { hidden }))
        .collect()
}

pub fn validate_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::invalid(
            "architecture",
            "network needs at least one layer",
        ));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::invalid(
                "architecture",
                format!("layer {i} has a zero dimension"),
            ));
        }
        if i > 0 && specs[i - 1].out_dim != s.in_dim {
            return Err(Error::invalid(
                "architecture",
                format!(
                    "layer {} outputs {} values but layer {i} expects {}",
                    i - 1,
                    specs[i - 1].out_dim,
                    s.in_dim
                ),
            ));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `out_dim x in_dim`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Weights and biases of a feed-forward network. Gradients use the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

pub type Gradients = NetworkParams;

/// Per-layer cache kept by [`NetworkParams::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre
    }

    pub fn activations(&self) -> &[Matrix] {
        &self.post
    }

    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap_or(&self.input)
    }
}

impl NetworkParams {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_chain(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.shape() != (l.spec.out_dim, l.spec.in_dim)
                || l.bias.len() != l.spec.out_dim
            {
                return Err(Error::invalid(
                    "network parameters",
                    format!(
                        "layer {i} has weights {:?} and {} biases for spec {}->{}",
                        l.weights.shape(),
                        l.bias.len(),
                        l.spec.in_dim,
                        l.spec.out_dim
                    ),
                ));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        Ok(Self { layers })
    }

    /// Zero weights and biases.
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        validate_chain(specs)?;
        Ok(Self {
            layers: specs
                .iter()
                .map(|&spec| Layer {
                    spec,
                    weights: Matrix::zeros(spec.out_dim, spec.in_dim),
                    bias: vec![0.0; spec.out_dim],
                })
                .collect(),
        })
    }

    /// He-style initialisation: weights `N(0, 2/in_dim)` for ReLU layers and
    /// `N(0, 1/in_dim)` otherwise; biases zero.
    pub fn init(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        let mut params = Self::zeros(specs)?;
        for layer in &mut params.layers {
            let gain = if layer.spec.activation == Activation::Relu {
                2.0
            } else {
                1.0
            };
            let std = (gain / layer.spec.in_dim as f64).sqrt();
            for w in layer.weights.as_mut_slice() {
                *w = std * rng.standard_normal();
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.specs()).expect("existing params have a valid chain")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(<[f64]>::len).sum()
    }

    /// Weight and bias buffers in a fixed order: layer 0 weights, layer 0 bias, layer 1 weights, ...
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Runs the batch `x` (one sample per row) through every layer.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardTrace)> {
        if x.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "forward",
                left: x.shape(),
                right: (self.input_dim(), self.output_dim()),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = post.last().unwrap_or(x);
            let mut z = input.matmul_nt(&layer.weights)?;
            z.add_row_vector(&layer.bias)?;
            let act = layer.spec.activation;
            let a = z.map(|v| act.apply(v));
            pre.push(z);
            post.push(a);
        }
        let output = post.last().cloned().expect("at least one layer");
        Ok((
            output,
            ForwardTrace {
                input: x.clone(),
                pre,
                post,
            },
        ))
    }

    /// Output only, without keeping a trace.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x).map(|(out, _)| out)
    }

    /// Reverse-mode gradients of `sum(output * grad_output)` with respect to
    /// every parameter and to the input batch.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_output: &Matrix,
    ) -> Result<(Gradients, Matrix)> {
        if trace.pre.len() != self.layers.len() {
            return Err(Error::invalid(
                "trace",
                "trace was produced by a different network",
            ));
        }
        if grad_output.shape() != trace.output().shape() {
            return Err(Error::ShapeMismatch {
                op: "backward",
                left: trace.output().shape(),
                right: grad_output.shape(),
            });
        }
        let mut grads = self.zeros_like();
        let mut upstream = grad_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.spec.activation;
            let z = &trace.pre[l];
            let a = &trace.post[l];
            let mut delta = upstream;
            for ((d, &zv), &av) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(z.as_slice())
                .zip(a.as_slice())
            {
                *d *= act.derivative(zv, av);
            }
            let input = if l == 0 {
                &trace.input
            } else {
                &trace.post[l - 1]
            };
            grads.layers[l].weights = delta.matmul_tn(input)?;
            grads.layers[l].bias = delta.col_sums();
            upstream = delta.matmul(&layer.weights)?;
        }
        Ok((grads, upstream))
    }
}

/// Mean squared reconstruction error over all `N x d` entries and its gradient
/// with respect to the reconstruction.
pub fn mse_loss(x: &Matrix, x_recon: &Matrix) -> Result<(f64, Matrix)> {
    if x.shape() != x_recon.shape() {
        return Err(Error::ShapeMismatch {
            op: "mse_loss",
            left: x.shape(),
            right: x_recon.shape(),
        });
    }
    let count = x.as_slice().len();
    if count == 0 {
        return Err(Error::Empty("mse_loss input"));
    }
    let inv = 1.0 / count as f64;
    let diff = x_recon.sub(x)?;
    let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() * inv;
    let grad = diff.map(|d| 2.0 * inv * d);
    Ok((loss, grad))
}
