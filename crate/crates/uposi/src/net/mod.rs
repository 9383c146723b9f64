//! Dense feed-forward networks with hand-written gradients.
//!
//! The stack is fixed: affine layers with tanh hidden activations, identity
//! output, optional inverted dropout after each hidden activation (training
//! mode only). Everything is `f64`. Besides the reverse-mode gradient
//! ([`DenseNetwork::backward_acc`]) there is a forward-mode directional
//! derivative ([`DenseNetwork::jvp`]), which together give exact
//! Fisher-vector products without a double backward pass.

mod adam;
mod io;
mod policy;

pub use adam::Adam;
pub use io::{load_network, network_from_json, network_to_json, save_network};
pub use policy::{kl_diag_gaussian, log_prob_diag, GaussianPolicy};

use crate::error::Error;
use crate::{RandomSource, Result};

/// Forward-pass mode. Dropout only fires in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    /// `[input, hidden..., output]` sizes.
    dims: Vec<usize>,
    /// Row-major `(out_dim × in_dim)` weight matrices, one per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    dropout: f64,
}

/// Recorded activations (and dropout masks) from one forward pass.
///
/// Required by [`DenseNetwork::backward_acc`] and [`DenseNetwork::jvp`]; the
/// mask makes the backward pass exact for the exact stochastic function that
/// was evaluated.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input fed to each layer; `layer_inputs[0]` is the network input.
    layer_inputs: Vec<Vec<f64>>,
    /// tanh outputs per hidden layer, before dropout.
    hidden_tanh: Vec<Vec<f64>>,
    /// Dropout scale factors (0 or 1/(1-p)) per hidden layer; None in eval mode.
    masks: Option<Vec<Vec<f64>>>,
    output: Vec<f64>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Dropout scale factors recorded by a train-mode pass.
    pub fn masks(&self) -> Option<&[Vec<f64>]> {
        self.masks.as_deref()
    }
}

impl DenseNetwork {
    /// Zero-initialized network. `dims` is `[input, hidden..., output]`.
    pub fn zeros(dims: &[usize], dropout: f64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(format!(
                "network needs at least input and output dims, got {dims:?}"
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("zero-sized layer in {dims:?}")));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!(
                "dropout rate {dropout} outside [0, 1)"
            )));
        }
        let weights = dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            dropout,
        })
    }

    /// Scaled-uniform fan-in init: `U(-1/√fan_in, 1/√fan_in)` per layer, with
    /// the final layer additionally multiplied by `final_scale`.
    pub fn init_scaled_uniform(
        dims: &[usize],
        dropout: f64,
        final_scale: f64,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        let mut net = Self::zeros(dims, dropout)?;
        let n_layers = net.weights.len();
        for l in 0..n_layers {
            let fan_in = net.dims[l] as f64;
            let bound = (1.0 / fan_in).sqrt();
            let scale = if l == n_layers - 1 { final_scale } else { 1.0 };
            for w in net.weights[l].iter_mut() {
                *w = scale * rng.uniform(-bound, bound);
            }
            // Biases start at zero.
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_params(&self) -> usize {
        self.dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Flatten all parameters: per layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`DenseNetwork::params`].
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: flat.len(),
                context: "parameter vector",
            });
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let wn = w.len();
            w.copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = b.len();
            b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
                context: "network input",
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    /// Eval-mode forward pass without a trace. Deterministic.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_with_masks(input, None)
    }

    /// Forward pass replaying fixed dropout scale factors (one vector per
    /// hidden layer); `None` is the plain eval pass. Used to re-evaluate the
    /// exact stochastic function a recorded trace saw.
    pub fn forward_with_masks(
        &self,
        input: &[f64],
        masks: Option<&[Vec<f64>]>,
    ) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let n_layers = self.weights.len();
        let mut a = input.to_vec();
        for l in 0..n_layers {
            let mut z = affine(&self.weights[l], &self.biases[l], &a, self.dims[l + 1]);
            if l < n_layers - 1 {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
                if let Some(masks) = masks {
                    for (v, m) in z.iter_mut().zip(&masks[l]) {
                        *v *= m;
                    }
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass recording everything needed for gradients.
    ///
    /// `rng` is only consumed in train mode (one Bernoulli per hidden unit).
    pub fn forward(
        &self,
        input: &[f64],
        mode: Mode,
        rng: Option<&mut RandomSource>,
    ) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let n_layers = self.weights.len();
        let train = mode == Mode::Train && self.dropout > 0.0;
        let mut rng = rng;
        if train && rng.is_none() {
            return Err(Error::Config(
                "train-mode forward with dropout needs an rng".into(),
            ));
        }

        let mut layer_inputs = Vec::with_capacity(n_layers);
        let mut hidden_tanh = Vec::with_capacity(n_layers - 1);
        let mut masks = if train {
            Some(Vec::with_capacity(n_layers - 1))
        } else {
            None
        };

        let mut a = input.to_vec();
        for l in 0..n_layers {
            layer_inputs.push(a.clone());
            let mut z = affine(&self.weights[l], &self.biases[l], &a, self.dims[l + 1]);
            if l < n_layers - 1 {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
                hidden_tanh.push(z.clone());
                if train {
                    let keep = 1.0 - self.dropout;
                    let rng = rng.as_deref_mut().unwrap();
                    let mask: Vec<f64> = (0..z.len())
                        .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
                        .collect();
                    for (v, m) in z.iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    masks.as_mut().unwrap().push(mask);
                }
            }
            a = z;
        }

        Ok(ForwardTrace {
            layer_inputs,
            hidden_tanh,
            masks,
            output: a,
        })
    }

    /// Reverse-mode gradients of `output_grad · output`.
    ///
    /// Accumulates `scale ×` the parameter gradient into `param_acc`
    /// (flattened layout of [`DenseNetwork::params`]) and returns the gradient
    /// with respect to the input.
    pub fn backward_acc(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f64],
        scale: f64,
        param_acc: &mut [f64],
    ) -> Result<Vec<f64>> {
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.len(),
                context: "output gradient",
            });
        }
        if param_acc.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: param_acc.len(),
                context: "gradient accumulator",
            });
        }
        let n_layers = self.weights.len();

        // Offsets of each layer's block in the flat parameter vector.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }

        let mut delta = output_grad.to_vec();
        for l in (0..n_layers).rev() {
            if l < n_layers - 1 {
                // Through dropout then tanh.
                if let Some(masks) = &trace.masks {
                    for (d, m) in delta.iter_mut().zip(&masks[l]) {
                        *d *= m;
                    }
                }
                let t = &trace.hidden_tanh[l];
                for (d, &tv) in delta.iter_mut().zip(t) {
                    *d *= 1.0 - tv * tv;
                }
            }
            let (in_dim, out_dim) = (self.dims[l], self.dims[l + 1]);
            let x = &trace.layer_inputs[l];
            let base = offsets[l];
            // dW[o][i] += scale * delta[o] * x[i]; db[o] += scale * delta[o]
            for o in 0..out_dim {
                let s = scale * delta[o];
                if s != 0.0 {
                    let row = &mut param_acc[base + o * in_dim..base + (o + 1) * in_dim];
                    for (acc, &xi) in row.iter_mut().zip(x) {
                        *acc += s * xi;
                    }
                }
                param_acc[base + out_dim * in_dim + o] += s;
            }
            if l > 0 {
                // delta_prev = W^T delta
                let w = &self.weights[l];
                let mut prev = vec![0.0; in_dim];
                for o in 0..out_dim {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &w[o * in_dim..(o + 1) * in_dim];
                        for (p, &wv) in prev.iter_mut().zip(row) {
                            *p += wv * d;
                        }
                    }
                }
                delta = prev;
            } else {
                let w = &self.weights[0];
                let mut input_grad = vec![0.0; in_dim];
                for o in 0..out_dim {
                    let d = delta[o];
                    let row = &w[o * in_dim..(o + 1) * in_dim];
                    for (p, &wv) in input_grad.iter_mut().zip(row) {
                        *p += wv * d;
                    }
                }
                return Ok(input_grad);
            }
        }
        unreachable!("network has at least one layer");
    }

    /// Convenience wrapper returning `(param_grads, input_grad)` fresh.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut acc = vec![0.0; self.n_params()];
        let input_grad = self.backward_acc(trace, output_grad, 1.0, &mut acc)?;
        Ok((acc, input_grad))
    }

    /// Forward-mode directional derivative: `d(output)/dθ · v` at the traced
    /// point (with the trace's dropout masks, if any), input held fixed.
    pub fn jvp(&self, trace: &ForwardTrace, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: v.len(),
                context: "tangent vector",
            });
        }
        let n_layers = self.weights.len();
        let mut da: Vec<f64> = vec![0.0; self.dims[0]];
        let mut off = 0;
        for l in 0..n_layers {
            let (in_dim, out_dim) = (self.dims[l], self.dims[l + 1]);
            let x = &trace.layer_inputs[l];
            let dw = &v[off..off + in_dim * out_dim];
            let db = &v[off + in_dim * out_dim..off + in_dim * out_dim + out_dim];
            off += in_dim * out_dim + out_dim;

            // dz = dW x + W da + db
            let mut dz = vec![0.0; out_dim];
            for o in 0..out_dim {
                let mut s = db[o];
                let dw_row = &dw[o * in_dim..(o + 1) * in_dim];
                for (a, b) in dw_row.iter().zip(x) {
                    s += a * b;
                }
                let w_row = &self.weights[l][o * in_dim..(o + 1) * in_dim];
                for (a, b) in w_row.iter().zip(&da) {
                    s += a * b;
                }
                dz[o] = s;
            }
            if l < n_layers - 1 {
                let t = &trace.hidden_tanh[l];
                for (d, &tv) in dz.iter_mut().zip(t) {
                    *d *= 1.0 - tv * tv;
                }
                if let Some(masks) = &trace.masks {
                    for (d, m) in dz.iter_mut().zip(&masks[l]) {
                        *d *= m;
                    }
                }
            }
            da = dz;
        }
        Ok(da)
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = x.len();
    let mut z = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut s = b[o];
        for (a, c) in row.iter().zip(x) {
            s += a * c;
        }
        z.push(s);
    }
    z
}
