//! Fully-connected embedding network with manual backpropagation.
//!
//! Hidden layers apply the configured activation; the output layer is linear.
//! All weights and biases live in one flat buffer so the optimizer and the
//! checkpoint code can treat them as a single vector.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub embed_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.embed_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "network dimensions must be positive (input {}, hidden {:?}, embed {})",
                self.input_dim, self.hidden_dims, self.embed_dim
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.embed_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

/// Weights and biases of every layer. Weight matrices are `fan_out x fan_in`,
/// row-major, each followed by its bias in the flat buffer.
///
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    layout: Vec<LayerLayout>,
    activation: Activation,
    data: Vec<f64>,
}

impl NetParams {
    /// All-zero parameters shaped for `config`.
    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let mut layout = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in config.layer_shapes() {
            let weights = offset;
            let bias = weights + fan_in * fan_out;
            offset = bias + fan_out;
            layout.push(LayerLayout {
                fan_in,
                fan_out,
                weights,
                bias,
            });
        }
        Ok(Self {
            layout,
            activation: config.activation,
            data: alloc::vec![0.0; offset],
        })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            activation: self.activation,
            data: alloc::vec![0.0; self.data.len()],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layout.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layout[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layout[self.layout.len() - 1].fan_out
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Replaces every value; the length must match.
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.data.len()
            )));
        }
        self.data.copy_from_slice(values);
        Ok(())
    }

    /// Weight matrix of `layer` (`fan_out x fan_in`, row-major).
    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = self.layout[layer];
        &self.data[l.weights..l.bias]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let l = self.layout[layer];
        &self.data[l.bias..l.bias + l.fan_out]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layout[layer];
        &mut self.data[l.weights..l.bias]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layout[layer];
        &mut self.data[l.bias..l.bias + l.fan_out]
    }

    pub fn same_shape(&self, other: &NetParams) -> bool {
        self.layout == other.layout
    }

    pub fn add_assign(&mut self, other: &NetParams) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch("parameter layouts differ".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

/// He-initialised parameters: weights `N(0, 2 / fan_in)`, biases zero.
pub fn init(config: &NetConfig) -> Result<NetParams> {
    let mut params = NetParams::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for layer in 0..params.num_layers() {
        let std = libm::sqrt(2.0 / params.layout[layer].fan_in as f64);
        for w in params.weights_mut(layer) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = std * z;
        }
    }
    Ok(params)
}

/// Activations recorded by [`forward`], consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to every layer; `inputs[0]` is the network input.
    inputs: Vec<Matrix>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }
}

/// Embeds every row of `inputs`.
pub fn forward(params: &NetParams, inputs: &Matrix) -> Result<(Matrix, Tape)> {
    if inputs.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, network expects {}",
            inputs.cols(),
            params.input_dim()
        )));
    }
    let n = params.num_layers();
    let mut tape = Tape {
        inputs: Vec::with_capacity(n),
    };
    let mut current = inputs.clone();
    for layer in 0..n {
        let mut out = dense(params, layer, &current);
        if layer + 1 < n {
            let act = params.activation;
            out.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        }
        tape.inputs.push(current);
        current = out;
    }
    Ok((current, tape))
}

/// Forward pass without keeping a tape.
pub fn embed(params: &NetParams, inputs: &Matrix) -> Result<Matrix> {
    forward(params, inputs).map(|(out, _)| out)
}

fn dense(params: &NetParams, layer: usize, x: &Matrix) -> Matrix {
    let l = params.layout[layer];
    let w = params.weights(layer);
    let b = params.bias(layer);
    let mut out = Matrix::zeros(x.rows(), l.fan_out);
    for r in 0..x.rows() {
        let xr = x.row(r);
        for (o, (wrow, bo)) in out.row_mut(r).iter_mut().zip(w.chunks_exact(l.fan_in).zip(b)) {
            *o = bo + wrow.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    out
}

/// Parameter gradients given the loss gradient for each output row.
pub fn backward(params: &NetParams, tape: &Tape, feature_grads: &Matrix) -> Result<NetParams> {
    let n = params.num_layers();
    if tape.inputs.len() != n
        || tape
            .inputs
            .iter()
            .zip(&params.layout)
            .any(|(m, l)| m.cols() != l.fan_in)
    {
        return Err(Error::ShapeMismatch("tape was not recorded with these parameters".into()));
    }
    if feature_grads.rows() != tape.batch_size() || feature_grads.cols() != params.output_dim() {
        return Err(Error::ShapeMismatch(format!(
            "feature gradients are {}x{}, expected {}x{}",
            feature_grads.rows(),
            feature_grads.cols(),
            tape.batch_size(),
            params.output_dim()
        )));
    }

    let mut grads = params.zeros_like();
    let mut delta = feature_grads.clone();
    for layer in (0..n).rev() {
        let l = params.layout[layer];
        let x = &tape.inputs[layer];
        {
            let gw_start = l.weights;
            let gb_start = l.bias;
            let data = grads.as_mut_slice();
            for r in 0..x.rows() {
                let xr = x.row(r);
                let dr = delta.row(r);
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    data[gb_start + o] += d;
                    let row = &mut data[gw_start + o * l.fan_in..gw_start + (o + 1) * l.fan_in];
                    for (g, xv) in row.iter_mut().zip(xr) {
                        *g += d * xv;
                    }
                }
            }
        }
        if layer == 0 {
            break;
        }
        // propagate to the previous layer's output, then through its activation
        let w = params.weights(layer);
        let mut prev = Matrix::zeros(x.rows(), l.fan_in);
        for r in 0..x.rows() {
            let dr = delta.row(r);
            let pr = prev.row_mut(r);
            for (wrow, &d) in w.chunks_exact(l.fan_in).zip(dr) {
                if d == 0.0 {
                    continue;
                }
                for (p, wv) in pr.iter_mut().zip(wrow) {
                    *p += d * wv;
                }
            }
            for (p, &y) in pr.iter_mut().zip(x.row(r)) {
                *p *= params.activation.derivative(y);
            }
        }
        delta = prev;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn config(hidden: Vec<usize>, act: Activation, seed: u64) -> NetConfig {
        NetConfig {
            input_dim: 3,
            hidden_dims: hidden,
            embed_dim: 2,
            activation: act,
            seed,
        }
    }

    #[test]
    fn init_is_deterministic_and_seeded() {
        let a = init(&config(vec![4, 5], Activation::Relu, 1)).unwrap();
        let b = init(&config(vec![4, 5], Activation::Relu, 1)).unwrap();
        let c = init(&config(vec![4, 5], Activation::Relu, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.as_slice(), c.as_slice());
        assert!(a.bias(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_net_has_one_layer() {
        let p = init(&config(vec![], Activation::Relu, 3)).unwrap();
        assert_eq!(p.num_layers(), 1);
        assert_eq!(p.weights(0).len(), 2 * 3);
        assert_eq!(p.len(), 2 * 3 + 2);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(init(&config(vec![0], Activation::Relu, 0)).is_err());
        let mut c = config(vec![], Activation::Relu, 0);
        c.embed_dim = 0;
        assert!(init(&c).is_err());
    }

    #[test]
    fn zero_params_give_zero_features() {
        let p = NetParams::zeros(&config(vec![4], Activation::Tanh, 0)).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-4.0, 0.5, 9.0]]).unwrap();
        let out = embed(&p, &x).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_forward_matches_matmul() {
        let mut p = init(&config(vec![], Activation::Relu, 9)).unwrap();
        p.bias_mut(0).copy_from_slice(&[0.25, -1.5]);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-0.5, 0.0, 4.0]]).unwrap();
        let out = embed(&p, &x).unwrap();
        let w = p.weights(0);
        for r in 0..2 {
            for o in 0..2 {
                let mut acc = p.bias(0)[o];
                for i in 0..3 {
                    acc += w[o * 3 + i] * x.row(r)[i];
                }
                assert!((out.row(r)[o] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dead_relu_layer_outputs_bias() {
        let mut p = NetParams::zeros(&config(vec![2], Activation::Relu, 0)).unwrap();
        p.weights_mut(0).copy_from_slice(&[-1.0, -1.0, -1.0, -2.0, -2.0, -2.0]);
        p.weights_mut(1).copy_from_slice(&[3.0, 4.0, 5.0, 6.0]);
        p.bias_mut(1).copy_from_slice(&[0.5, -0.5]);
        let x = Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        let out = embed(&p, &x).unwrap();
        assert_eq!(out.row(0), &[0.5, -0.5]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = init(&config(vec![4], Activation::Tanh, 5)).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let (_, tape) = forward(&p, &x).unwrap();
        let g = backward(&p, &tape, &Matrix::zeros(1, 2)).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_layer_grad_is_outer_product() {
        let p = init(&config(vec![], Activation::Relu, 5)).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5]]).unwrap();
        let g = Matrix::from_rows(&[vec![0.3, -0.7]]).unwrap();
        let (_, tape) = forward(&p, &x).unwrap();
        let grads = backward(&p, &tape, &g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let expect = g.row(0)[o] * x.row(0)[i];
                assert!((grads.weights(0)[o * 3 + i] - expect).abs() < 1e-12);
            }
            assert!((grads.bias(0)[o] - g.row(0)[o]).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_shapes_are_errors() {
        let p = init(&config(vec![4], Activation::Relu, 5)).unwrap();
        assert!(forward(&p, &Matrix::zeros(1, 4)).is_err());
        let (_, tape) = forward(&p, &Matrix::zeros(2, 3)).unwrap();
        assert!(backward(&p, &tape, &Matrix::zeros(3, 2)).is_err());
        let other = init(&config(vec![6], Activation::Relu, 5)).unwrap();
        assert!(backward(&other, &tape, &Matrix::zeros(2, 2)).is_err());
    }
}
