//! Small dense feed-forward networks with hand-written backward passes and Adam.
//!
//! Everything is `f64` and row-major. An [`Mlp`] is a stack of [`DenseLayer`]s,
//! each computing `activation(W x + b)`. Gradients are accumulated into a
//! [`Gradients`] value whose shapes mirror the network.

mod adam;
mod layer;

pub use adam::{AdamConfig, AdamState};
pub use layer::{Activation, DenseLayer};

use rand::Rng;

use crate::error::{Error, Result};

/// Element-wise `max(0, x)`.
pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Mean of squared component differences.
pub fn mse(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() {
        return Err(Error::shape("mse target", prediction.len(), target.len()));
    }
    if prediction.is_empty() {
        return Err(Error::Empty("mse of zero-length vectors"));
    }
    let sum: f64 = prediction.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / prediction.len() as f64)
}

/// Gradient of [`mse`] with respect to `prediction`, scaled by `scale`.
pub fn mse_grad(prediction: &[f64], target: &[f64], scale: f64) -> Result<Vec<f64>> {
    if prediction.len() != target.len() {
        return Err(Error::shape("mse target", prediction.len(), target.len()));
    }
    let k = 2.0 * scale / prediction.len() as f64;
    Ok(prediction.iter().zip(target).map(|(p, t)| k * (p - t)).collect())
}

/// Intermediates recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input seen by each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
}

/// Per-layer gradient of the weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradient tensors congruent with the parameters of one [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights().len()],
                    biases: vec![0.0; l.biases().len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGradient] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerGradient] {
        &mut self.layers
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|g| g == 0.0)
    }

    /// All components, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    fn check_congruent(&self, net: &Mlp) -> Result<()> {
        if self.layers.len() != net.layers.len() {
            return Err(Error::shape(
                "gradient layer count",
                net.layers.len(),
                self.layers.len(),
            ));
        }
        for (g, l) in self.layers.iter().zip(&net.layers) {
            if g.weights.len() != l.weights().len() {
                return Err(Error::shape("gradient weights", l.weights().len(), g.weights.len()));
            }
            if g.biases.len() != l.biases().len() {
                return Err(Error::shape("gradient biases", l.biases().len(), g.biases.len()));
            }
        }
        Ok(())
    }
}

/// A multi-layer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Builds a network from layers, checking that consecutive dimensions agree.
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("layers", "an MLP needs at least one layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(
                    format!("layers[{}].in_dim", k + 1),
                    format!(
                        "expected {} to match previous out_dim, got {}",
                        pair[0].out_dim(),
                        pair[1].in_dim()
                    ),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    /// Glorot-uniform weights and zero biases.
    ///
    /// `sizes` lists every width from input to output, so a net with `L` layers
    /// takes `L + 1` sizes and `L` activations.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("sizes", "need at least input and output widths"));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::shape("activation count", sizes.len() - 1, activations.len()));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights().len() + l.biases().len()).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.in_dim() {
            return Err(Error::shape("mlp input", self.in_dim(), input.len()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.out_dim()];
            layer.affine(&x, &mut z);
            layer.activation().apply_in_place(&mut z);
            x = z;
        }
        Ok(x)
    }

    /// Forward pass that keeps what [`Mlp::backward`] needs.
    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.out_dim()];
            layer.affine(&x, &mut z);
            let mut a = z.clone();
            layer.activation().apply_in_place(&mut a);
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok((x, ForwardCache { inputs, pre }))
    }

    /// Exact gradients for one example. Returns the parameter gradients and the
    /// gradient with respect to the network input.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_into(cache, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`Mlp::backward`] but adds into existing gradients, so a batch can
    /// be accumulated without reallocating.
    pub fn backward_into(&self, cache: &ForwardCache, output_grad: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        if cache.pre.len() != self.layers.len() {
            return Err(Error::shape("forward cache layers", self.layers.len(), cache.pre.len()));
        }
        if output_grad.len() != self.out_dim() {
            return Err(Error::shape("output gradient", self.out_dim(), output_grad.len()));
        }
        grads.check_congruent(self)?;

        let mut delta = output_grad.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[k];
            let input = &cache.inputs[k];
            if pre.len() != layer.out_dim() || input.len() != layer.in_dim() {
                return Err(Error::shape("forward cache", layer.out_dim(), pre.len()));
            }
            layer.activation().backprop_in_place(pre, &mut delta);
            let g = &mut grads.layers[k];
            let n_in = layer.in_dim();
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * n_in..(o + 1) * n_in];
                    for (gw, &x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
            }
            let mut next = vec![0.0; n_in];
            let w = layer.weights();
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (nx, &wv) in next.iter_mut().zip(row) {
                        *nx += d * wv;
                    }
                }
            }
            delta = next;
        }
        Ok(delta)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights().iter().chain(l.biases()).all(|v| v.is_finite()))
    }
}
