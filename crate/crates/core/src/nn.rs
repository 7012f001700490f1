//! Fully connected layers and multi-layer perceptrons.

use crate::graph::{linear_vals, sigmoid_scalar, Graph, GraphError, NodeId};
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply_graph(self, g: &mut Graph, x: NodeId) -> Result<NodeId, GraphError> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
        }
    }

    fn apply_vals(self, v: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for x in v.iter_mut() {
                    if *x <= 0.0 {
                        *x = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for x in v.iter_mut() {
                    *x = x.tanh();
                }
            }
            Activation::Sigmoid => {
                for x in v.iter_mut() {
                    *x = sigmoid_scalar(*x);
                }
            }
        }
    }
}

/// One dense layer: `y = act(x · Wᵀ + b)`, weights stored [out × in].
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, Default)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Uniform Glorot-style initialization: weights in
/// ±√(6/(fan_in+fan_out)), biases zero, fully determined by the rng state.
pub fn init_params(layer_dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Mlp {
    assert!(
        layer_dims.len() >= 2,
        "need at least input and output dims"
    );
    assert_eq!(activations.len(), layer_dims.len() - 1);
    let mut layers = Vec::with_capacity(layer_dims.len() - 1);
    for (i, &act) in activations.iter().enumerate() {
        let (fan_in, fan_out) = (layer_dims[i], layer_dims[i + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        layers.push(DenseLayer {
            weights: Tensor::matrix(fan_out, fan_in, w).expect("init weight shape"),
            bias: Tensor::vector(vec![0.0; fan_out]),
            activation: act,
        });
    }
    Mlp { layers }
}

/// Builds an MLP over hidden layers with ReLU and a configurable output
/// activation.
pub fn mlp_dims(d_in: usize, hidden: &[usize], d_out: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(d_in);
    dims.extend_from_slice(hidden);
    dims.push(d_out);
    dims
}

pub fn relu_stack_activations(n_layers: usize, output: Activation) -> Vec<Activation> {
    let mut acts = vec![Activation::Relu; n_layers.saturating_sub(1)];
    acts.push(output);
    acts
}

impl Mlp {
    pub fn in_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim()).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    /// Inserts this network's parameters as trainable graph leaves, in
    /// flattening order (weights then bias per layer).
    pub fn insert_params(&self, g: &mut Graph) -> Vec<NodeId> {
        self.layers
            .iter()
            .flat_map(|l| [g.param(&l.weights), g.param(&l.bias)])
            .collect()
    }

    /// Inserts this network's parameters as constants; no gradients are
    /// tracked for them.
    pub fn insert_consts(&self, g: &mut Graph) -> Vec<NodeId> {
        self.layers
            .iter()
            .flat_map(|l| [g.input(l.weights.clone()), g.input(l.bias.clone())])
            .collect()
    }

    /// Applies the stack to `x` reusing previously inserted parameter
    /// nodes, so several applications share one gradient accumulator per
    /// parameter.
    pub fn forward_given(
        &self,
        g: &mut Graph,
        x: NodeId,
        param_nodes: &[NodeId],
    ) -> Result<NodeId, GraphError> {
        assert_eq!(param_nodes.len(), 2 * self.layers.len());
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = g.linear(h, param_nodes[2 * i], param_nodes[2 * i + 1])?;
            h = layer.activation.apply_graph(g, h)?;
        }
        Ok(h)
    }

    /// Inserts this network's parameters as graph leaves and applies the
    /// stack to `x`. Each layer's (weight, bias) node pair is appended to
    /// `param_nodes` in flattening order.
    pub fn forward(
        &self,
        g: &mut Graph,
        x: NodeId,
        param_nodes: &mut Vec<NodeId>,
    ) -> Result<NodeId, GraphError> {
        let nodes = self.insert_params(g);
        param_nodes.extend_from_slice(&nodes);
        self.forward_given(g, x, &nodes)
    }

    /// Applies the stack with parameters treated as constants (no
    /// gradients tracked for them).
    pub fn forward_frozen(&self, g: &mut Graph, x: NodeId) -> Result<NodeId, GraphError> {
        let nodes = self.insert_consts(g);
        self.forward_given(g, x, &nodes)
    }

    /// No-grad application; numerically identical to the graph path.
    pub fn apply(&self, x: &Tensor) -> Tensor {
        let mut vals = x.values().to_vec();
        let mut n = x.rows();
        let mut cols = x.cols();
        if x.shape().len() == 1 {
            n = 1;
        }
        for layer in &self.layers {
            let d_out = layer.out_dim();
            assert_eq!(
                cols,
                layer.in_dim(),
                "input dim {} does not match layer in_dim {}",
                cols,
                layer.in_dim()
            );
            let mut y = linear_vals(
                &vals,
                n,
                cols,
                layer.weights.values(),
                d_out,
                layer.bias.values(),
            );
            layer.activation.apply_vals(&mut y);
            vals = y;
            cols = d_out;
        }
        Tensor::matrix(n, cols, vals).expect("apply shape")
    }

    /// Parameter tensors in flattening order (weights then bias per layer).
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn tiny_mlp(seed: u64) -> Mlp {
        let mut rng = stream_rng(seed, Stream::Weights);
        init_params(&[3, 4, 2], &[Activation::Tanh, Activation::Identity], &mut rng)
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = tiny_mlp(11);
        let b = tiny_mlp(11);
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert_eq!(la.weights.values(), lb.weights.values());
        }
    }

    #[test]
    fn biases_start_at_zero() {
        let m = tiny_mlp(1);
        for layer in &m.layers {
            assert!(layer.bias.values().iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn weight_variance_matches_uniform_law() {
        // Var of U(-a, a) is a²/3; sample 10⁴ weights and compare within 5%.
        let mut rng = stream_rng(5, Stream::Weights);
        let fan_in = 100;
        let fan_out = 100;
        let m = init_params(&[fan_in, fan_out], &[Activation::Identity], &mut rng);
        let w = m.layers[0].weights.values();
        assert_eq!(w.len(), 10_000);
        let mean: f64 = w.iter().sum::<f64>() / w.len() as f64;
        let var: f64 = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / w.len() as f64;
        let bound: f64 = 6.0 / (fan_in + fan_out) as f64;
        let expected = bound / 3.0;
        assert!(
            (var - expected).abs() < 0.05 * expected,
            "var {var} vs expected {expected}"
        );
    }

    #[test]
    fn apply_matches_graph_forward_bitwise() {
        let m = tiny_mlp(42);
        let x = Tensor::matrix(2, 3, vec![0.1, -0.4, 0.9, 1.2, 0.0, -2.0]).unwrap();
        let direct = m.apply(&x);

        let mut g = Graph::new();
        let xid = g.input(x.clone());
        let mut params = Vec::new();
        let y = m.forward(&mut g, xid, &mut params).unwrap();
        assert_eq!(direct.values(), g.value(y).values());
    }

    #[test]
    fn zero_weight_network_outputs_bias() {
        let mut m = tiny_mlp(0);
        for layer in &mut m.layers {
            layer.weights.values_mut().fill(0.0);
            layer.bias.values_mut().fill(0.25);
        }
        let x = Tensor::matrix(1, 3, vec![5.0, -3.0, 7.0]).unwrap();
        let y = m.apply(&x);
        // tanh(0.25) then 0·h + 0.25 in the last layer
        assert_eq!(y.values(), &[0.25, 0.25]);
    }
}
