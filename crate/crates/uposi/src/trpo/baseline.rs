//! Value baseline for advantage estimation: a small tanh net fit to
//! discounted returns by minibatch least squares each iteration.

use crate::net::{Adam, DenseNetwork, Mode};
use crate::{RandomSource, Result};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct ValueBaseline {
    net: DenseNetwork,
}

impl ValueBaseline {
    pub fn new(input_dim: usize, hidden: &[usize], rng: &mut RandomSource) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(Self {
            net: DenseNetwork::init_scaled_uniform(&dims, 0.0, 1.0, rng)?,
        })
    }

    pub fn net(&self) -> &DenseNetwork {
        &self.net
    }

    /// Deterministic (eval-mode) value estimate.
    pub fn predict(&self, input: &[f64]) -> f64 {
        match self.net.infer(input) {
            Ok(out) => out[0],
            Err(_) => 0.0,
        }
    }

    /// Minibatch least-squares fit on `(inputs, targets)`; returns the final
    /// epoch's mean squared error.
    pub fn fit(
        &mut self,
        inputs: &[&[f64]],
        targets: &[f64],
        epochs: usize,
        minibatch: usize,
        lr: f64,
        rng: &mut RandomSource,
    ) -> Result<f64> {
        assert_eq!(inputs.len(), targets.len());
        let n = inputs.len();
        if n == 0 {
            return Err(crate::error::Error::Empty("baseline fit"));
        }
        let mut params = self.net.params();
        let mut adam = Adam::new(params.len(), lr);
        let mut order: Vec<usize> = (0..n).collect();
        let mut last_mse = f64::INFINITY;
        for _ in 0..epochs {
            rng.shuffle(&mut order);
            let mut sq_err = 0.0;
            for mb in order.chunks(minibatch) {
                let inv = 1.0 / mb.len() as f64;
                // Per-sample gradient of (pred - target)² accumulated over two
                // deterministic half-chunks.
                let halves: Vec<Result<(Vec<f64>, f64)>> = mb
                    .par_chunks(minibatch / 2 + 1)
                    .map(|half| {
                        let mut acc = vec![0.0; self.net.n_params()];
                        let mut err_sum = 0.0;
                        for &i in half {
                            let trace = self.net.forward(inputs[i], Mode::Eval, None)?;
                            let err = trace.output()[0] - targets[i];
                            err_sum += err * err;
                            self.net
                                .backward_acc(&trace, &[1.0], 2.0 * err * inv, &mut acc)?;
                        }
                        Ok((acc, err_sum))
                    })
                    .collect();
                let mut grad = vec![0.0; self.net.n_params()];
                for h in halves {
                    let (acc, err_sum) = h?;
                    sq_err += err_sum;
                    for (g, a) in grad.iter_mut().zip(&acc) {
                        *g += a;
                    }
                }
                adam.step(&mut params, &grad);
                self.net.set_params(&params)?;
            }
            last_mse = sq_err / n as f64;
        }
        Ok(last_mse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_linear_function() {
        let mut rng = RandomSource::new(3);
        let mut baseline = ValueBaseline::new(2, &[16, 16], &mut rng).unwrap();
        let data: Vec<Vec<f64>> = (0..512)
            .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
            .collect();
        let targets: Vec<f64> = data.iter().map(|x| 3.0 * x[0] - 2.0 * x[1] + 0.5).collect();
        let inputs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let mse = baseline
            .fit(&inputs, &targets, 200, 64, 1e-2, &mut rng)
            .unwrap();
        assert!(mse < 1e-2, "final mse {mse}");
        let pred = baseline.predict(&[0.3, -0.4]);
        assert!((pred - (3.0 * 0.3 + 0.8 + 0.5)).abs() < 0.2, "pred {pred}");
    }

    #[test]
    fn fit_is_deterministic() {
        let run = || {
            let mut rng = RandomSource::new(5);
            let mut b = ValueBaseline::new(1, &[8], &mut rng).unwrap();
            let data: Vec<Vec<f64>> = (0..64).map(|_| vec![rng.uniform(-1.0, 1.0)]).collect();
            let targets: Vec<f64> = data.iter().map(|x| x[0] * x[0]).collect();
            let inputs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
            b.fit(&inputs, &targets, 5, 16, 1e-3, &mut rng).unwrap();
            b.net().params()
        };
        assert_eq!(run(), run());
    }
}
