//! Small fully connected network with a normalized-sigmoid output and a
//! hand-written backward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pomdp::Distribution;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

/// Affine layer `z = W a + b`, `W` stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Hidden widths of the action decoder.
pub const DECODER_HIDDEN: [usize; 3] = [6, 8, 6];

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(z)` without cancellation.
#[inline]
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

impl Mlp {
    /// Uniform initialization in `±√(1/fan_in)` drawn from `seed`.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Self {
        assert_eq!(sizes.len(), activations.len() + 1, "one activation per layer");
        let mut r = rng::stream(seed);
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = (1.0 / inputs as f64).sqrt();
                let mut draw = || r.gen_range(-bound..=bound);
                let weights = (0..inputs * outputs).map(|_| draw()).collect();
                let bias = (0..outputs).map(|_| draw()).collect();
                Layer {
                    inputs,
                    outputs,
                    activation,
                    weights,
                    bias,
                }
            })
            .collect();
        Self { layers }
    }

    /// Four affine layers (ReLU, ReLU, ReLU, Sigmoid) from `inputs` to
    /// `actions` outputs.
    pub fn decoder(inputs: usize, actions: usize, seed: u64) -> Self {
        let [h1, h2, h3] = DECODER_HIDDEN;
        Self::new(
            &[inputs, h1, h2, h3, actions],
            &[Activation::Relu, Activation::Relu, Activation::Relu, Activation::Sigmoid],
            seed,
        )
    }

    /// Same shapes as [`Mlp::decoder`] with every parameter zero.
    pub fn zeroed_decoder(inputs: usize, actions: usize) -> Self {
        let mut net = Self::decoder(inputs, actions, 0);
        for p in net.params_mut() {
            *p = 0.0;
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        v.push(self.output_dim());
        v
    }

    /// Shape chain and finiteness of every parameter.
    pub fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::DimensionMismatch("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::DimensionMismatch(format!("layer {i} parameter shapes")));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} expects {} inputs, previous layer gives {}",
                    l.inputs,
                    self.layers[i - 1].outputs
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|p| !p.is_finite()) {
                return Err(Error::NonFinite(format!("parameter in layer {i}")));
            }
        }
        if self.layers.last().map(|l| l.activation) != Some(Activation::Sigmoid) {
            return Err(Error::DimensionMismatch("output layer must be sigmoid".into()));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn set_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.n_params());
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
    }

    /// Predicted action distribution: sigmoid outputs divided by their sum.
    pub fn forward(&self, input: &[f64]) -> Result<Distribution> {
        self.check_input(input)?;
        let mut ws = Workspace::new(self);
        self.forward_into(input, &mut ws);
        let out = ws.post.last().expect("at least one layer");
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok(Distribution::from_weights(out.clone()).expect("sigmoid outputs are positive"))
    }

    /// `-ln μ̂(target)`.
    pub fn loss(&self, input: &[f64], target: usize) -> Result<f64> {
        self.check_input(input)?;
        let mut ws = Workspace::new(self);
        self.forward_into(input, &mut ws);
        Ok(output_nll(&ws, target))
    }

    /// Loss and exact gradient of `-ln μ̂(target)` with respect to every
    /// parameter.
    pub fn gradient(&self, input: &[f64], target: usize) -> Result<(f64, Gradient)> {
        self.check_input(input)?;
        if target >= self.output_dim() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: target,
                size: self.output_dim(),
            });
        }
        let mut ws = Workspace::new(self);
        let mut grad = Gradient::zeros(self);
        let loss = self.accumulate_gradient(input, target, &mut ws, &mut grad);
        if !loss.is_finite() || grad.values.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("loss or gradient".into()));
        }
        Ok((loss, grad))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    pub(crate) fn forward_into(&self, input: &[f64], ws: &mut Workspace) {
        for (i, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = ws.post.split_at_mut(i);
            let a_in: &[f64] = if i == 0 { input } else { &prev[i - 1] };
            let pre = &mut ws.pre[i];
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                pre[o] = layer.bias[o] + row.iter().zip(a_in).map(|(w, a)| w * a).sum::<f64>();
            }
            let post = &mut rest[0];
            for (p, &z) in post.iter_mut().zip(pre.iter()) {
                *p = match layer.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Sigmoid => sigmoid(z),
                };
            }
        }
    }

    /// Adds the gradient for one sample into `grad` and returns its loss.
    pub(crate) fn accumulate_gradient(
        &self,
        input: &[f64],
        target: usize,
        ws: &mut Workspace,
        grad: &mut Gradient,
    ) -> f64 {
        self.forward_into(input, ws);
        let loss = output_nll(ws, target);

        // output layer: μ_j = σ_j / Σσ, L = -ln σ_k + ln Σσ
        // ∂L/∂z_j = (1 - σ_j)(σ_j / Σσ - [j = k])
        let last = self.layers.len() - 1;
        let out = &ws.post[last];
        let total: f64 = out.iter().sum();
        for (j, d) in ws.delta[last].iter_mut().enumerate() {
            let s = out[j];
            let indicator = if j == target { 1.0 } else { 0.0 };
            *d = (1.0 - s) * (s / total - indicator);
        }

        let mut offset = grad.values.len();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let n_w = layer.weights.len();
            let n_b = layer.bias.len();
            offset -= n_w + n_b;
            let a_in: &[f64] = if i == 0 { input } else { &ws.post[i - 1] };
            let delta = &ws.delta[i];
            let (gw, gb) = grad.values[offset..offset + n_w + n_b].split_at_mut(n_w);
            for o in 0..layer.outputs {
                let d = delta[o];
                gb[o] += d;
                if d == 0.0 {
                    continue;
                }
                for (g, a) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(a_in) {
                    *g += d * a;
                }
            }
            if i == 0 {
                break;
            }
            let (lower, upper) = ws.delta.split_at_mut(i);
            let below = &mut lower[i - 1];
            let delta = &upper[0];
            let prev_pre = &ws.pre[i - 1];
            for (k, b) in below.iter_mut().enumerate() {
                let mut acc = 0.0;
                for o in 0..layer.outputs {
                    acc += layer.weights[o * layer.inputs + k] * delta[o];
                }
                *b = match self.layers[i - 1].activation {
                    Activation::Relu => {
                        if prev_pre[k] > 0.0 {
                            acc
                        } else {
                            0.0
                        }
                    }
                    Activation::Sigmoid => {
                        let s = sigmoid(prev_pre[k]);
                        acc * s * (1.0 - s)
                    }
                };
            }
        }
        loss
    }

    /// `params -= step · grad`.
    pub(crate) fn apply(&mut self, grad: &Gradient, step: f64) {
        for (p, g) in self.params_mut().zip(&grad.values) {
            *p -= step * g;
        }
    }
}

fn output_nll(ws: &Workspace, target: usize) -> f64 {
    let last = ws.pre.len() - 1;
    let total: f64 = ws.post[last].iter().sum();
    total.ln() - log_sigmoid(ws.pre[last][target])
}

/// Scratch buffers for forward and backward passes.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(net: &Mlp) -> Self {
        let sizes: Vec<usize> = net.layers.iter().map(|l| l.outputs).collect();
        let mk = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        Self {
            pre: mk(),
            post: mk(),
            delta: mk(),
        }
    }
}

/// Flat gradient in the same order as [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(net: &Mlp) -> Self {
        Self {
            values: vec![0.0; net.n_params()],
        }
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(r: &mut rng::Stream, n: usize) -> Vec<f64> {
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = Mlp::zeroed_decoder(8, 4);
        let d = net.forward(&[0.3; 8]).unwrap();
        assert_eq!(d.probs(), &[0.25; 4]);
        let loss = net.loss(&[1.0; 8], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn outputs_are_distributions() {
        let net = Mlp::decoder(8, 4, 42);
        let mut r = rng::stream(1);
        for _ in 0..100 {
            let d = net.forward(&random_input(&mut r, 8)).unwrap();
            let sum: f64 = d.probs().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(d.probs().iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn seeded_init_is_bit_identical() {
        let a = Mlp::decoder(8, 4, 42);
        let b = Mlp::decoder(8, 4, 42);
        let x = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let da = a.forward(&x).unwrap();
        let db = b.forward(&x).unwrap();
        for (p, q) in da.probs().iter().zip(db.probs()) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
        assert_ne!(Mlp::decoder(8, 4, 43).params(), a.params());
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let net = Mlp::decoder(8, 4, 9);
        for l in &net.layers {
            let bound = (1.0 / l.inputs as f64).sqrt();
            assert!(l.weights.iter().chain(&l.bias).all(|w| w.abs() <= bound));
        }
        assert_eq!(net.layer_sizes(), vec![8, 6, 8, 6, 4]);
    }

    #[test]
    fn dead_relu_unit_has_zero_gradient() {
        let mut net = Mlp::decoder(8, 4, 3);
        // unit 0 of the first hidden layer can never activate
        for w in &mut net.layers[0].weights[0..8] {
            *w = 0.0;
        }
        net.layers[0].bias[0] = -1.0;
        let (_, g) = net.gradient(&[0.5; 8], 1).unwrap();
        assert!(g.values[0..8].iter().all(|&v| v == 0.0));
        let bias_offset = 8 * 6;
        assert_eq!(g.values[bias_offset], 0.0);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let net = Mlp::decoder(8, 4, 1);
        assert!(matches!(net.forward(&[0.0; 7]), Err(Error::DimensionMismatch(_))));
        let mut bad = [0.0; 8];
        bad[3] = f64::NAN;
        assert!(matches!(net.forward(&bad), Err(Error::NonFinite(_))));
        let mut broken = net.clone();
        broken.layers[2].bias[0] = f64::INFINITY;
        assert!(matches!(broken.check(), Err(Error::NonFinite(_))));
        assert!(net.gradient(&[0.0; 8], 4).is_err());
    }

    #[test]
    fn saturated_target_loss_is_finite() {
        let mut net = Mlp::zeroed_decoder(8, 4);
        net.layers[3].bias = vec![-800.0, 5.0, 5.0, 5.0];
        let loss = net.loss(&[0.0; 8], 0).unwrap();
        assert!(loss.is_finite() && loss > 700.0);
    }
}
