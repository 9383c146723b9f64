//! Diagonal-Gaussian policy head and its probability math.

use super::DenseNetwork;
use crate::error::Error;
use crate::{RandomSource, Result};

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Policy π(observation, μ) → action distribution.
///
/// The mean comes from a dense network over `[observation, μ_normalized]`;
/// the log standard deviation is a state-independent trainable vector. A
/// policy with `mu_dim == 0` is the conventional state-only ("regular")
/// variant: its input vector is exactly the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean_net: DenseNetwork,
    log_std: Vec<f64>,
    obs_dim: usize,
    mu_dim: usize,
}

impl GaussianPolicy {
    /// Fresh policy with fan-in init and the final layer scaled down so the
    /// initial action mean is near zero; `log_std` starts at 0 (std 1).
    pub fn new(
        obs_dim: usize,
        mu_dim: usize,
        hidden: &[usize],
        act_dim: usize,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(obs_dim + mu_dim);
        dims.extend_from_slice(hidden);
        dims.push(act_dim);
        let mean_net = DenseNetwork::init_scaled_uniform(&dims, 0.0, 0.01, rng)?;
        Ok(Self {
            mean_net,
            log_std: vec![0.0; act_dim],
            obs_dim,
            mu_dim,
        })
    }

    pub fn from_parts(mean_net: DenseNetwork, log_std: Vec<f64>, obs_dim: usize, mu_dim: usize) -> Result<Self> {
        if mean_net.input_dim() != obs_dim + mu_dim {
            return Err(Error::DimensionMismatch {
                expected: obs_dim + mu_dim,
                got: mean_net.input_dim(),
                context: "policy mean net input",
            });
        }
        if log_std.len() != mean_net.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: mean_net.output_dim(),
                got: log_std.len(),
                context: "policy log_std",
            });
        }
        Ok(Self {
            mean_net,
            log_std,
            obs_dim,
            mu_dim,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn mu_dim(&self) -> usize {
        self.mu_dim
    }

    pub fn act_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    pub fn mean_net(&self) -> &DenseNetwork {
        &self.mean_net
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|s| s.exp()).collect()
    }

    /// Concatenate `[observation, μ_normalized]` into the net input.
    pub fn input(&self, obs: &[f64], mu_normed: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                got: obs.len(),
                context: "policy observation",
            });
        }
        if mu_normed.len() != self.mu_dim {
            return Err(Error::DimensionMismatch {
                expected: self.mu_dim,
                got: mu_normed.len(),
                context: "policy mu input",
            });
        }
        let mut x = Vec::with_capacity(self.obs_dim + self.mu_dim);
        x.extend_from_slice(obs);
        x.extend_from_slice(mu_normed);
        Ok(x)
    }

    /// Deterministic action (the mean). Used at evaluation time.
    pub fn mean_action(&self, obs: &[f64], mu_normed: &[f64]) -> Result<Vec<f64>> {
        let x = self.input(obs, mu_normed)?;
        self.mean_net.infer(&x)
    }

    pub fn mean_for_input(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.infer(input)
    }

    /// Stochastic action: `mean + std ⊙ z`, `z ~ N(0, I)`.
    pub fn sample(
        &self,
        obs: &[f64],
        mu_normed: &[f64],
        rng: &mut RandomSource,
    ) -> Result<Vec<f64>> {
        let mean = self.mean_action(obs, mu_normed)?;
        Ok(mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, s)| m + s.exp() * rng.standard_normal())
            .collect())
    }

    /// Diagonal-Gaussian log density of `action` under π(obs, μ).
    pub fn log_prob(&self, obs: &[f64], mu_normed: &[f64], action: &[f64]) -> Result<f64> {
        let mean = self.mean_action(obs, mu_normed)?;
        Ok(log_prob_diag(&mean, &self.log_std, action))
    }

    /// Entropy of the action distribution (state-independent).
    pub fn entropy(&self) -> f64 {
        let d = self.log_std.len() as f64;
        self.log_std.iter().sum::<f64>() + 0.5 * d * (LN_2PI + 1.0)
    }

    /// Total trainable parameters: mean net + log_std.
    pub fn n_params(&self) -> usize {
        self.mean_net.n_params() + self.log_std.len()
    }

    /// Flatten: mean-net parameters first, then `log_std`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: flat.len(),
                context: "policy parameter vector",
            });
        }
        let split = self.mean_net.n_params();
        self.mean_net.set_params(&flat[..split])?;
        self.log_std.copy_from_slice(&flat[split..]);
        Ok(())
    }
}

/// Diagonal-Gaussian log density: Σᵢ [ −(aᵢ−mᵢ)²/(2σᵢ²) − log σᵢ − ½log 2π ].
pub fn log_prob_diag(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), action.len());
    let mut lp = 0.0;
    for i in 0..mean.len() {
        let s = log_std[i].exp();
        let d = (action[i] - mean[i]) / s;
        lp += -0.5 * d * d - log_std[i] - 0.5 * LN_2PI;
    }
    lp
}

/// KL(p₁ ‖ p₂) for diagonal Gaussians:
/// Σᵢ [ log(σ₂/σ₁) + (σ₁² + (m₁−m₂)²)/(2σ₂²) − ½ ].
pub fn kl_diag_gaussian(mean1: &[f64], std1: &[f64], mean2: &[f64], std2: &[f64]) -> f64 {
    debug_assert_eq!(mean1.len(), mean2.len());
    debug_assert_eq!(std1.len(), std2.len());
    let mut kl = 0.0;
    for i in 0..mean1.len() {
        let (s1, s2) = (std1[i], std2[i]);
        let dm = mean1[i] - mean2[i];
        kl += (s2 / s1).ln() + (s1 * s1 + dm * dm) / (2.0 * s2 * s2) - 0.5;
    }
    kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_policy(seed: u64) -> GaussianPolicy {
        let mut rng = RandomSource::new(seed);
        let mut p = GaussianPolicy::new(2, 1, &[4], 1, &mut rng).unwrap();
        // Give the mean net some spread so tests are not near-zero.
        let params: Vec<f64> = (0..p.n_params()).map(|_| rng.uniform(-0.5, 0.5)).collect();
        p.set_params(&params).unwrap();
        p
    }

    #[test]
    fn log_prob_at_mean_unit_std() {
        // a = m, σ = 1, 1-dim: -½ log 2π ≈ -0.9189
        let lp = log_prob_diag(&[0.7], &[0.0], &[0.7]);
        assert_abs_diff_eq!(lp, -0.9189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn log_prob_one_sigma_away() {
        // a = m + σ: -0.5 - log σ - ½ log 2π
        let sigma: f64 = 0.37;
        let lp = log_prob_diag(&[0.2], &[sigma.ln()], &[0.2 + sigma]);
        assert_abs_diff_eq!(lp, -0.5 - sigma.ln() - 0.5 * LN_2PI, epsilon = 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        // Trapezoid quadrature of exp(log_prob) over ±10σ, 1-dim.
        let (m, ls) = (0.3, -0.4_f64);
        let s = ls.exp();
        let (lo, hi) = (m - 10.0 * s, m + 10.0 * s);
        let n = 200_000;
        let dx = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * dx;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            integral += w * log_prob_diag(&[m], &[ls], &[x]).exp();
        }
        integral *= dx;
        assert!((integral - 1.0).abs() <= 1e-6, "integral {integral}");
    }

    #[test]
    fn kl_identical_is_exactly_zero() {
        let kl = kl_diag_gaussian(&[0.3, -1.0], &[0.5, 2.0], &[0.3, -1.0], &[0.5, 2.0]);
        assert_eq!(kl, 0.0);
    }

    #[test]
    fn kl_unit_variance_mean_shift() {
        // m1=0, m2=1, σ1=σ2=1: KL = 0.5
        let kl = kl_diag_gaussian(&[0.0], &[1.0], &[1.0], &[1.0]);
        assert_abs_diff_eq!(kl, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn kl_nonnegative_over_random_draws() {
        let mut rng = RandomSource::new(77);
        for _ in 0..10_000 {
            let dim = 1 + rng.index(4);
            let m1: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let m2: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let s1: Vec<f64> = (0..dim).map(|_| rng.uniform(0.05, 4.0)).collect();
            let s2: Vec<f64> = (0..dim).map(|_| rng.uniform(0.05, 4.0)).collect();
            let kl = kl_diag_gaussian(&m1, &s1, &m2, &s2);
            assert!(kl >= 0.0, "negative KL {kl}");
        }
    }

    #[test]
    fn tiny_log_std_collapses_to_mean() {
        let mut p = tiny_policy(4);
        let n = p.n_params();
        let mut params = p.params();
        params[n - 1] = -20.0;
        p.set_params(&params).unwrap();
        let mut rng = RandomSource::new(0);
        let mean = p.mean_action(&[0.2, 0.4], &[0.1]).unwrap();
        let a = p.sample(&[0.2, 0.4], &[0.1], &mut rng).unwrap();
        assert!((a[0] - mean[0]).abs() < 1e-6);
    }

    #[test]
    fn sample_mean_matches_clt_bound() {
        let p = tiny_policy(11);
        let obs = [0.5, -0.2];
        let mu = [0.3];
        let mean = p.mean_action(&obs, &mu).unwrap()[0];
        let std = p.std()[0];
        let n = 100_000;
        let mut rng = RandomSource::new(6);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += p.sample(&obs, &mu, &mut rng).unwrap()[0];
        }
        let emp = sum / n as f64;
        let bound = 3.0 * std / (n as f64).sqrt();
        assert!(
            (emp - mean).abs() <= bound,
            "empirical mean {emp} vs {mean}, bound {bound}"
        );
    }

    #[test]
    fn fixed_seed_identical_action() {
        let p = tiny_policy(2);
        let mut r1 = RandomSource::new(123);
        let mut r2 = RandomSource::new(123);
        let a1 = p.sample(&[0.1, 0.2], &[0.0], &mut r1).unwrap();
        let a2 = p.sample(&[0.1, 0.2], &[0.0], &mut r2).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn regular_variant_takes_observation_only() {
        let mut rng = RandomSource::new(1);
        let p = GaussianPolicy::new(3, 0, &[8], 2, &mut rng).unwrap();
        assert_eq!(p.mean_net().input_dim(), 3);
        assert!(p.mean_action(&[0.1, 0.2, 0.3], &[]).is_ok());
        assert!(p.mean_action(&[0.1, 0.2, 0.3], &[0.5]).is_err());
    }

    #[test]
    fn entropy_closed_form() {
        let p = tiny_policy(3);
        let expected: f64 =
            p.log_std().iter().sum::<f64>() + 0.5 * (LN_2PI + 1.0) * p.act_dim() as f64;
        assert_abs_diff_eq!(p.entropy(), expected, epsilon = 1e-14);
    }
}
