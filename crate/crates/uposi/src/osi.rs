//! Online system identification: a dense regressor from the recent history
//! window to the normalized dynamics parameters.
//!
//! Training alternates data generation and supervised fits. The first round
//! rolls the policy out with the true μ̄ ("matched" data); later rounds feed
//! the policy the network's own prediction μ̂ while the simulator keeps μ̄
//! ("mismatched" data), so the regressor also sees the off-policy states its
//! own errors cause. The buffer accumulates across rounds and every entry is
//! labeled with the parameters that actually generated it.

use crate::ckpt::OsiCheckpoint;

use crate::error::Error;
use crate::net::{Adam, DenseNetwork, GaussianPolicy, Mode};
use crate::runtime::MuEstimator;
use crate::trpo::EnvFactory;
use crate::types::{Action, HistorySegment, ModelParams, MuBounds, HISTORY_LEN};
use crate::{RandomSource, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OsiConfig {
    /// Total fit rounds: one matched plus (outer_iterations − 1) mismatched.
    pub outer_iterations: usize,
    /// μ draws per round.
    pub mu_samples: usize,
    /// Simulated seconds of data per μ draw.
    pub seconds_per_mu: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// μ draws for the held-out matched set.
    pub holdout_mu_samples: usize,
    /// Stop early when held-out MSE improves by less than this fraction.
    pub early_stop_rel_improvement: Option<f64>,
    /// Sampled μ count and episodes per μ for the per-round combined-runtime
    /// evaluation entry in the log.
    pub eval_mu_samples: usize,
    pub eval_episodes: usize,
}

impl Default for OsiConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 5,
            mu_samples: 30,
            seconds_per_mu: 5.0,
            epochs: 20,
            minibatch: 128,
            learning_rate: 1e-3,
            hidden: vec![256, 128, 64],
            dropout: 0.1,
            holdout_mu_samples: 5,
            early_stop_rel_improvement: None,
            eval_mu_samples: 8,
            eval_episodes: 2,
        }
    }
}

/// Training pairs: flattened history → normalized μ label. Grows across
/// rounds and is never cleared.
#[derive(Debug, Clone, Default)]
pub struct OsiTrainingBuffer {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl OsiTrainingBuffer {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn extend(&mut self, other: OsiTrainingBuffer) {
        self.inputs.extend(other.inputs);
        self.targets.extend(other.targets);
    }
}

/// The identification network plus the μ normalization it was trained with.
#[derive(Debug, Clone)]
pub struct OsiNetwork {
    net: DenseNetwork,
    obs_dim: usize,
    act_dim: usize,
    mu_bounds: MuBounds,
}

impl OsiNetwork {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        mu_bounds: MuBounds,
        hidden: &[usize],
        dropout: f64,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(HistorySegment::flat_dim(obs_dim, act_dim));
        dims.extend_from_slice(hidden);
        dims.push(mu_bounds.dim());
        Ok(Self {
            net: DenseNetwork::init_scaled_uniform(&dims, dropout, 1.0, rng)?,
            obs_dim,
            act_dim,
            mu_bounds,
        })
    }

    pub fn from_checkpoint(ckpt: OsiCheckpoint) -> Self {
        Self {
            net: ckpt.net,
            obs_dim: ckpt.obs_dim,
            act_dim: ckpt.act_dim,
            mu_bounds: ckpt.mu_bounds,
        }
    }

    pub fn to_checkpoint(&self, task: &str) -> OsiCheckpoint {
        OsiCheckpoint {
            net: self.net.clone(),
            task: task.to_string(),
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            mu_bounds: self.mu_bounds.clone(),
        }
    }

    pub fn net(&self) -> &DenseNetwork {
        &self.net
    }

    pub fn mu_bounds(&self) -> &MuBounds {
        &self.mu_bounds
    }

    /// Eval-mode prediction in normalized units. No clamping: values outside
    /// [-1, 1] stay representable for out-of-range dynamics.
    pub fn predict_normalized(&self, history: &HistorySegment) -> Result<Vec<f64>> {
        if history.obs_dim() != self.obs_dim || history.act_dim() != self.act_dim {
            return Err(Error::DimensionMismatch {
                expected: HistorySegment::flat_dim(self.obs_dim, self.act_dim),
                got: HistorySegment::flat_dim(history.obs_dim(), history.act_dim()),
                context: "identification input",
            });
        }
        self.net.infer(&history.flatten())
    }

    /// Denormalized prediction alongside the raw normalized output.
    pub fn predict(&self, history: &HistorySegment) -> Result<(ModelParams, Vec<f64>)> {
        let raw = self.predict_normalized(history)?;
        let params = crate::types::denormalize_mu(&raw, &self.mu_bounds)?;
        Ok((params, raw))
    }
}

impl MuEstimator for OsiNetwork {
    fn estimate(&self, history: &HistorySegment) -> Result<Vec<f64>> {
        self.predict_normalized(history)
    }
}

/// How the action fed to the policy is chosen during data generation.
enum ActionSource<'a> {
    /// π(x, μ̄): the true normalized μ.
    Matched,
    /// π(x, φ(H)): the current network's own prediction.
    Mismatched(&'a OsiNetwork),
}

/// Simulate `step_budget` control steps under one μ̄ and harvest (H, μ)
/// pairs. Terminated episodes restart and keep consuming the same budget;
/// each restart spends h warmup steps that produce no pairs.
fn generate_for_mu(
    policy: &GaussianPolicy,
    make_env: &EnvFactory,
    source: &ActionSource,
    mu: &ModelParams,
    step_budget: usize,
    rng: &mut RandomSource,
) -> Result<OsiTrainingBuffer> {
    let mut env = make_env()?;
    let spec = env.spec().clone();
    let mut buffer = OsiTrainingBuffer::default();
    let mut steps_left = step_budget;

    'episodes: while steps_left > 0 {
        let mut obs = env.reset(mu, rng)?;
        let mut history = HistorySegment::zeroed(spec.obs_dim, spec.act_dim);

        // Fill the window with h real steps under π(x, μ̄).
        for _ in 0..HISTORY_LEN {
            if steps_left == 0 {
                break 'episodes;
            }
            let mu_norm = env.current_mu().normalized();
            let mean = policy.mean_action(obs.as_slice(), &mu_norm)?;
            let executed: Vec<f64> = mean.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
            let step = env.step(&crate::env::scale_action(&mean, &spec.action_limit))?;
            history.push(obs, Action(executed), step.observation.clone())?;
            obs = step.observation;
            steps_left -= 1;
            if step.terminated {
                continue 'episodes;
            }
        }

        // Harvest until termination or budget exhaustion.
        while steps_left > 0 {
            let mu_input = match source {
                ActionSource::Matched => env.current_mu().normalized(),
                ActionSource::Mismatched(osi) => osi.predict_normalized(&history)?,
            };
            let mean = policy.mean_action(obs.as_slice(), &mu_input)?;
            let executed: Vec<f64> = mean.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
            let step = env.step(&crate::env::scale_action(&mean, &spec.action_limit))?;
            history.push(obs, Action(executed), step.observation.clone())?;
            obs = step.observation;
            steps_left -= 1;

            // The label is the dynamics parameter that generated this window,
            // regardless of what the policy was told.
            let label = env.current_mu().normalized();
            buffer.inputs.push(history.flatten());
            buffer.targets.push(label);

            if step.terminated {
                continue 'episodes;
            }
        }
    }
    Ok(buffer)
}

/// Matched-phase data: rollouts under π(x, μ̄) and f_μ̄ for `mu_samples`
/// independent μ̄ draws (one worker per draw).
pub fn generate_matched_data(
    policy: &GaussianPolicy,
    make_env: &EnvFactory,
    config: &OsiConfig,
    round: u64,
    root: &RandomSource,
) -> Result<OsiTrainingBuffer> {
    generate_round(policy, make_env, &ActionSource::Matched, config, round, root)
}

/// Mismatched-phase data: the simulator keeps μ̄ but the policy sees φ(H).
pub fn generate_mismatched_data(
    policy: &GaussianPolicy,
    osi: &OsiNetwork,
    make_env: &EnvFactory,
    config: &OsiConfig,
    round: u64,
    root: &RandomSource,
) -> Result<OsiTrainingBuffer> {
    generate_round(
        policy,
        make_env,
        &ActionSource::Mismatched(osi),
        config,
        round,
        root,
    )
}

fn generate_round(
    policy: &GaussianPolicy,
    make_env: &EnvFactory,
    source: &ActionSource,
    config: &OsiConfig,
    round: u64,
    root: &RandomSource,
) -> Result<OsiTrainingBuffer> {
    let probe = make_env()?;
    let dt = probe.spec().dt;
    drop(probe);
    let step_budget = (config.seconds_per_mu / dt).round() as usize;

    let parts: Vec<Result<OsiTrainingBuffer>> = (0..config.mu_samples as u64)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&i| {
            let mut rng = root.substream(round, i);
            let env = make_env()?;
            let mu = env.spec().mu_bounds.sample(&mut rng);
            drop(env);
            generate_for_mu(policy, make_env, source, &mu, step_budget, &mut rng)
        })
        .collect();

    let mut buffer = OsiTrainingBuffer::default();
    for p in parts {
        buffer.extend(p?);
    }
    Ok(buffer)
}

/// Mean squared error of the network on a data set (eval mode, parallel).
pub fn evaluate_mse(net: &DenseNetwork, buffer: &OsiTrainingBuffer) -> Result<f64> {
    if buffer.is_empty() {
        return Err(Error::Empty("identification data set"));
    }
    let partials: Vec<Result<f64>> = buffer
        .inputs
        .par_chunks(2048)
        .zip(buffer.targets.par_chunks(2048))
        .map(|(xs, ys)| {
            let mut sum = 0.0;
            for (x, y) in xs.iter().zip(ys) {
                let out = net.infer(x)?;
                sum += out
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            Ok(sum)
        })
        .collect();
    let mut total = 0.0;
    for p in partials {
        total += p?;
    }
    Ok(total / buffer.len() as f64)
}

/// Minibatch SGD on the ‖φ(H) − μ‖² loss with dropout active.
///
/// Dropout masks come from per-sample streams addressed by (epoch, position
/// in the shuffled order), so the fit is reproducible under any parallelism.
/// Returns the per-epoch training MSE curve.
pub fn fit_osi(
    buffer: &OsiTrainingBuffer,
    osi: &mut OsiNetwork,
    config: &OsiConfig,
    rng: &mut RandomSource,
) -> Result<Vec<f64>> {
    if buffer.is_empty() {
        return Err(Error::Empty("identification training buffer"));
    }
    let n = buffer.len();
    let mut params = osi.net.params();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mask_root = rng.stream(u64::MAX >> 1);
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut sq_err = 0.0;
        for (mb_index, mb) in order.chunks(config.minibatch).enumerate() {
            let inv = 1.0 / mb.len() as f64;
            let base = mb_index * config.minibatch;
            let halves: Vec<Result<(Vec<f64>, f64)>> = mb
                .par_chunks(config.minibatch / 2 + 1)
                .enumerate()
                .map(|(half_idx, half)| {
                    let mut acc = vec![0.0; osi.net.n_params()];
                    let mut err_sum = 0.0;
                    let offset = half_idx * (config.minibatch / 2 + 1);
                    for (j, &i) in half.iter().enumerate() {
                        let position = (base + offset + j) as u64;
                        let mut mask_rng = mask_root.substream(epoch as u64, position);
                        let trace = osi.net.forward(
                            &buffer.inputs[i],
                            Mode::Train,
                            Some(&mut mask_rng),
                        )?;
                        let out = trace.output();
                        let grad: Vec<f64> = out
                            .iter()
                            .zip(&buffer.targets[i])
                            .map(|(a, b)| 2.0 * (a - b) * inv)
                            .collect();
                        err_sum += out
                            .iter()
                            .zip(&buffer.targets[i])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>();
                        osi.net.backward_acc(&trace, &grad, 1.0, &mut acc)?;
                    }
                    Ok((acc, err_sum))
                })
                .collect();
            let mut grad = vec![0.0; osi.net.n_params()];
            for h in halves {
                let (acc, err) = h?;
                sq_err += err;
                for (g, a) in grad.iter_mut().zip(&acc) {
                    *g += a;
                }
            }
            adam.step(&mut params, &grad);
            osi.net.set_params(&params)?;
        }
        losses.push(sq_err / n as f64);
    }
    Ok(losses)
}

/// One row of the identification training log.
#[derive(Debug, Clone)]
pub struct OsiIterationStats {
    pub iteration: usize,
    pub buffer_size: usize,
    pub train_mse: f64,
    pub holdout_mse: f64,
    pub eval_reward: f64,
    /// Spread of the per-rollout evaluation (not part of the CSV schema).
    pub eval_std: f64,
}

#[derive(Debug, Clone, Default)]
pub struct OsiTrainOptions {
    pub log_path: Option<PathBuf>,
    pub quiet: bool,
}

/// The full identification training procedure: a matched round, then
/// mismatched rounds on the accumulated buffer.
pub fn train_osi(
    policy: &GaussianPolicy,
    make_env: &EnvFactory,
    config: &OsiConfig,
    options: &OsiTrainOptions,
    seed: u64,
) -> Result<(OsiNetwork, Vec<OsiIterationStats>)> {
    let probe = make_env()?;
    let spec = probe.spec().clone();
    drop(probe);
    let root = RandomSource::new(seed);
    let mut init_rng = root.substream(u32::MAX as u64, 1);
    let mut osi = OsiNetwork::new(
        spec.obs_dim,
        spec.act_dim,
        spec.mu_bounds.clone(),
        &config.hidden,
        config.dropout,
        &mut init_rng,
    )?;

    // Held-out matched set, generated once from reserved streams.
    let holdout_cfg = OsiConfig {
        mu_samples: config.holdout_mu_samples,
        ..config.clone()
    };
    let holdout = generate_matched_data(
        policy,
        make_env,
        &holdout_cfg,
        (u32::MAX - 1) as u64,
        &root,
    )?;

    let mut log = match &options.log_path {
        Some(p) => {
            let mut f =
                std::fs::File::create(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            writeln!(f, "iteration,buffer_size,train_mse,holdout_mse,eval_reward")
                .map_err(|e| Error::io(p.display().to_string(), e))?;
            Some((f, p.clone()))
        }
        None => None,
    };

    let mut buffer = OsiTrainingBuffer::default();
    let mut stats: Vec<OsiIterationStats> = Vec::new();
    for round in 0..config.outer_iterations {
        let fresh = if round == 0 {
            generate_matched_data(policy, make_env, config, round as u64, &root)?
        } else {
            generate_mismatched_data(policy, &osi, make_env, config, round as u64, &root)?
        };
        buffer.extend(fresh);

        let mut fit_rng = root.substream((u32::MAX - 2) as u64, round as u64);
        let losses = fit_osi(&buffer, &mut osi, config, &mut fit_rng)?;
        let train_mse = *losses.last().expect("at least one epoch");
        let holdout_mse = evaluate_mse(osi.net(), &holdout)?;
        let eval_root = root.substream((u32::MAX - 3) as u64, round as u64);
        let (eval_reward, eval_std) = crate::runtime::evaluate_up_osi(
            policy,
            &osi,
            make_env,
            config.eval_mu_samples,
            config.eval_episodes,
            &eval_root,
        )?;

        let row = OsiIterationStats {
            iteration: round,
            buffer_size: buffer.len(),
            train_mse,
            holdout_mse,
            eval_reward,
            eval_std,
        };
        if let Some((f, p)) = log.as_mut() {
            writeln!(
                f,
                "{},{},{},{},{}",
                row.iteration, row.buffer_size, row.train_mse, row.holdout_mse, row.eval_reward
            )
            .map_err(|e| Error::io(p.display().to_string(), e))?;
        }
        if !options.quiet {
            eprintln!(
                "osi round {}  buffer {:7}  train mse {:.5}  holdout mse {:.5}  eval {:.3}",
                row.iteration, row.buffer_size, row.train_mse, row.holdout_mse, row.eval_reward
            );
        }

        let improved_enough = match (config.early_stop_rel_improvement, stats.last()) {
            (Some(min_rel), Some(prev)) => {
                (prev.holdout_mse - holdout_mse) / prev.holdout_mse.max(1e-12) >= min_rel
            }
            _ => true,
        };
        stats.push(row);
        if !improved_enough {
            break;
        }
    }
    Ok((osi, stats))
}
