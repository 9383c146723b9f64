//! Trust-region policy optimization for the universal policy.
//!
//! Training loop per iteration: collect whole episodes with a freshly drawn
//! μ per episode until the sample budget is met, fit the value baseline on
//! discounted returns, compute GAE advantages, then take one natural-gradient
//! step (conjugate gradient on Fisher-vector products, scaled to the KL trust
//! region, backtracking line search).
//!
//! Everything that touches a batch is chunked deterministically: parallel
//! workers produce per-chunk partial sums that are reduced in index order, so
//! results are bit-identical no matter the thread count.

mod baseline;

pub use baseline::ValueBaseline;

use crate::env::{scale_action, Env};
use crate::error::Error;
use crate::net::{kl_diag_gaussian, GaussianPolicy, Mode};
use crate::types::ModelParams;
use crate::{RandomSource, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::PathBuf;

/// Fixed chunk size for deterministic parallel reductions.
const CHUNK: usize = 1024;
/// Episodes generated speculatively per collection wave.
const WAVE: usize = 8;
/// Reserved substream minors (episode indices stay far below these).
const RNG_MINOR_BASELINE: u64 = (u32::MAX - 15) as u64;
const RNG_MAJOR_INIT: u64 = u32::MAX as u64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrpoConfig {
    /// Trust-region bound δ on the mean KL per update.
    pub kl_step: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub cg_iterations: usize,
    pub cg_damping: f64,
    pub backtrack_coeff: f64,
    pub backtrack_steps: usize,
    /// Minimum transitions collected per iteration.
    pub samples_per_iteration: usize,
    pub iterations: usize,
    pub hidden: Vec<usize>,
    /// Initial exploration log-std in normalized action units.
    pub init_log_std: f64,
    /// Train the conventional state-only policy (no μ input).
    pub regular: bool,
    pub baseline_epochs: usize,
    pub baseline_minibatch: usize,
    pub baseline_lr: f64,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            kl_step: 0.01,
            discount: 0.995,
            gae_lambda: 0.97,
            cg_iterations: 10,
            cg_damping: 0.1,
            backtrack_coeff: 0.5,
            backtrack_steps: 10,
            samples_per_iteration: 30_000,
            iterations: 200,
            hidden: vec![64, 64],
            init_log_std: 0.0,
            regular: false,
            baseline_epochs: 5,
            baseline_minibatch: 128,
            baseline_lr: 1e-3,
        }
    }
}

/// One collected episode under a single ground-truth μ.
#[derive(Debug, Clone)]
pub struct Episode {
    /// Policy input per step (`[obs, μ_norm]`, or `[obs]` for regular).
    pub inputs: Vec<Vec<f64>>,
    /// Raw sampled actions in normalized units (pre-clamp).
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// True if the environment terminated (vs a horizon truncation).
    pub terminated: bool,
    /// Policy input at the post-terminal state, for the truncation bootstrap.
    pub final_input: Vec<f64>,
    pub mu: ModelParams,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub episodes: Vec<Episode>,
}

impl Batch {
    pub fn n_samples(&self) -> usize {
        self.episodes.iter().map(|e| e.len()).sum()
    }

    pub fn mean_return(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(|e| e.total_reward()).sum::<f64>() / self.episodes.len() as f64
    }

    /// Flat view of all policy inputs in episode order.
    pub fn flat_inputs(&self) -> Vec<&[f64]> {
        self.episodes
            .iter()
            .flat_map(|e| e.inputs.iter().map(|v| v.as_slice()))
            .collect()
    }
}

/// Builds a fresh environment per collection worker.
pub type EnvFactory<'a> = dyn Fn() -> Result<Box<dyn Env>> + Sync + 'a;

/// Roll out one episode with stochastic actions; μ and the initial state come
/// from this episode's own random stream.
fn run_episode(
    policy: &GaussianPolicy,
    make_env: &EnvFactory,
    regular: bool,
    max_steps: usize,
    rng: &mut RandomSource,
) -> Result<Episode> {
    let mut env = make_env()?;
    let mu = env.spec().mu_bounds.sample(rng);
    let mut obs = env.reset(&mu, rng)?;
    let limits = env.spec().action_limit.clone();

    let policy_input = |env: &dyn Env, obs: &[f64]| -> Vec<f64> {
        if regular {
            obs.to_vec()
        } else {
            let mu_norm = env.current_mu().normalized();
            let mut x = Vec::with_capacity(obs.len() + mu_norm.len());
            x.extend_from_slice(obs);
            x.extend_from_slice(&mu_norm);
            x
        }
    };

    let mut ep = Episode {
        inputs: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        log_probs: Vec::new(),
        terminated: false,
        final_input: vec![],
        mu,
    };

    for _ in 0..max_steps {
        let input = policy_input(env.as_ref(), obs.as_slice());
        let mean = policy.mean_for_input(&input)?;
        let log_std = policy.log_std();
        let mut action = Vec::with_capacity(mean.len());
        let mut log_prob = 0.0;
        for i in 0..mean.len() {
            let z = rng.standard_normal();
            action.push(mean[i] + log_std[i].exp() * z);
            log_prob += -0.5 * z * z - log_std[i] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        let step = env.step(&scale_action(&action, &limits))?;

        ep.inputs.push(input);
        ep.actions.push(action);
        ep.rewards.push(step.reward);
        ep.log_probs.push(log_prob);
        obs = step.observation;
        if step.terminated {
            ep.terminated = true;
            break;
        }
    }
    ep.final_input = policy_input(env.as_ref(), obs.as_slice());
    Ok(ep)
}

/// Collect whole episodes until the per-iteration sample budget is reached.
///
/// Episode `e` of iteration `iter` draws from the stream `(iter, e)`, so the
/// buffer is identical however many workers run. The resulting batch holds at
/// least `samples_per_iteration` and fewer than that plus one horizon.
pub fn collect_batch(
    policy: &GaussianPolicy,
    make_env: &EnvFactory,
    config: &TrpoConfig,
    iteration: u64,
    root: &RandomSource,
) -> Result<Batch> {
    let max_steps = make_env()?.spec().max_steps;
    let mut batch = Batch::default();
    let mut total = 0;
    let mut next_index = 0u64;
    while total < config.samples_per_iteration {
        let wave: Vec<Result<Episode>> = (0..WAVE as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = root.substream(iteration, next_index + k);
                run_episode(policy, make_env, config.regular, max_steps, &mut rng)
            })
            .collect();
        next_index += WAVE as u64;
        for ep in wave {
            let ep = ep?;
            if total < config.samples_per_iteration {
                total += ep.len();
                batch.episodes.push(ep);
            }
        }
    }
    Ok(batch)
}

/// Per-episode state values and the bootstrap value for the final state
/// (zero when the episode genuinely terminated).
pub fn baseline_values(baseline: &ValueBaseline, batch: &Batch) -> Vec<(Vec<f64>, f64)> {
    batch
        .episodes
        .par_iter()
        .map(|ep| {
            let vals = ep
                .inputs
                .iter()
                .map(|x| baseline.predict(x))
                .collect::<Vec<f64>>();
            let boot = if ep.terminated {
                0.0
            } else {
                baseline.predict(&ep.final_input)
            };
            (vals, boot)
        })
        .collect()
}

/// Generalized advantage estimation plus discounted returns.
///
/// `δ_t = r_t + γ V(s_{t+1}) − V(s_t)` with `V` of a terminal state = 0;
/// `A_t = Σ_k (γλ)^k δ_{t+k}`. Returns are the discounted reward sums with
/// the same terminal/bootstrap convention, used as baseline targets.
/// Advantages are normalized to zero mean and unit variance over the batch.
pub fn compute_gae(
    batch: &Batch,
    values: &[(Vec<f64>, f64)],
    discount: f64,
    lambda: f64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if batch.episodes.is_empty() {
        return Err(Error::Empty("batch for GAE"));
    }
    let mut advantages = Vec::with_capacity(batch.episodes.len());
    let mut returns = Vec::with_capacity(batch.episodes.len());
    for (ep, (vals, boot)) in batch.episodes.iter().zip(values) {
        let t_len = ep.len();
        let mut adv = vec![0.0; t_len];
        let mut ret = vec![0.0; t_len];
        let mut gae = 0.0;
        let mut ret_acc = *boot;
        for t in (0..t_len).rev() {
            let v_next = if t + 1 < t_len { vals[t + 1] } else { *boot };
            let delta = ep.rewards[t] + discount * v_next - vals[t];
            gae = delta + discount * lambda * gae;
            adv[t] = gae;
            ret_acc = ep.rewards[t] + discount * ret_acc;
            ret[t] = ret_acc;
        }
        advantages.push(adv);
        returns.push(ret);
    }

    // Normalize advantages over the whole batch.
    let n = batch.n_samples() as f64;
    let mean: f64 = advantages.iter().flatten().sum::<f64>() / n;
    let var: f64 = advantages
        .iter()
        .flatten()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / n;
    let std = var.sqrt().max(1e-8);
    for adv in &mut advantages {
        for a in adv.iter_mut() {
            *a = (*a - mean) / std;
        }
    }
    Ok((advantages, returns))
}

/// Flattened per-sample quantities captured under the pre-update policy.
pub struct UpdateCache {
    pub inputs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub old_means: Vec<Vec<f64>>,
    pub old_log_std: Vec<f64>,
    pub advantages: Vec<f64>,
    traces: Vec<crate::net::ForwardTrace>,
}

impl UpdateCache {
    pub fn build(policy: &GaussianPolicy, batch: &Batch, advantages: &[Vec<f64>]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(batch.n_samples());
        let mut actions = Vec::with_capacity(batch.n_samples());
        let mut old_log_probs = Vec::with_capacity(batch.n_samples());
        let mut adv = Vec::with_capacity(batch.n_samples());
        for (ep, a) in batch.episodes.iter().zip(advantages) {
            inputs.extend(ep.inputs.iter().cloned());
            actions.extend(ep.actions.iter().cloned());
            old_log_probs.extend_from_slice(&ep.log_probs);
            adv.extend_from_slice(a);
        }
        let traces: Vec<crate::net::ForwardTrace> = inputs
            .par_chunks(CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|x| policy.mean_net().forward(x, Mode::Eval, None))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let old_means = traces.iter().map(|t| t.output().to_vec()).collect();
        Ok(Self {
            inputs,
            actions,
            old_log_probs,
            old_means,
            old_log_std: policy.log_std().to_vec(),
            advantages: adv,
            traces,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Surrogate objective and mean KL of `candidate` against the cached
/// pre-update policy: `E[exp(logπ_new − logπ_old)·A]` and `E[KL(old ‖ new)]`.
pub fn surrogate_and_kl(cache: &UpdateCache, candidate: &GaussianPolicy) -> Result<(f64, f64)> {
    let new_log_std = candidate.log_std().to_vec();
    let new_std: Vec<f64> = new_log_std.iter().map(|s| s.exp()).collect();
    let old_std: Vec<f64> = cache.old_log_std.iter().map(|s| s.exp()).collect();
    let n = cache.len();

    let indices: Vec<usize> = (0..n).collect();
    let partials: Vec<Result<(f64, f64)>> = indices
        .par_chunks(CHUNK)
        .map(|idxs| {
            let mut s_sum = 0.0;
            let mut kl_sum = 0.0;
            for &i in idxs {
                let mean_new = candidate.mean_for_input(&cache.inputs[i])?;
                let lp_new =
                    crate::net::log_prob_diag(&mean_new, &new_log_std, &cache.actions[i]);
                let lp_old = crate::net::log_prob_diag(
                    &cache.old_means[i],
                    &cache.old_log_std,
                    &cache.actions[i],
                );
                s_sum += (lp_new - lp_old).exp() * cache.advantages[i];
                kl_sum += kl_diag_gaussian(&cache.old_means[i], &old_std, &mean_new, &new_std);
            }
            Ok((s_sum, kl_sum))
        })
        .collect();

    let mut s_total = 0.0;
    let mut kl_total = 0.0;
    for p in partials {
        let (s, k) = p?;
        s_total += s;
        kl_total += k;
    }
    Ok((s_total / n as f64, kl_total / n as f64))
}

/// Gradient of the surrogate at the cached policy:
/// `E[A·∇logπ(a|s)]` over mean-net parameters and log_std.
pub fn policy_gradient(policy: &GaussianPolicy, cache: &UpdateCache) -> Result<Vec<f64>> {
    let n_net = policy.mean_net().n_params();
    let act_dim = policy.act_dim();
    let n = cache.len();
    let std2: Vec<f64> = policy.log_std().iter().map(|s| (2.0 * s).exp()).collect();

    let indices: Vec<usize> = (0..n).collect();
    let partials: Vec<Result<Vec<f64>>> = indices
        .par_chunks(CHUNK)
        .map(|idxs| {
            let mut acc = vec![0.0; n_net + act_dim];
            for &i in idxs {
                let mean = &cache.old_means[i];
                let a = &cache.actions[i];
                let adv = cache.advantages[i];
                // dlogp/dmean_k = (a_k - m_k)/σ_k²
                let out_grad: Vec<f64> =
                    (0..act_dim).map(|k| (a[k] - mean[k]) / std2[k]).collect();
                policy.mean_net().backward_acc(
                    &cache.traces[i],
                    &out_grad,
                    adv,
                    &mut acc[..n_net],
                )?;
                // dlogp/dlog_std_k = (a_k - m_k)²/σ_k² - 1
                for k in 0..act_dim {
                    let d = a[k] - mean[k];
                    acc[n_net + k] += adv * (d * d / std2[k] - 1.0);
                }
            }
            Ok(acc)
        })
        .collect();

    let mut grad = vec![0.0; n_net + act_dim];
    for p in partials {
        let p = p?;
        for (g, v) in grad.iter_mut().zip(&p) {
            *g += v;
        }
    }
    for g in grad.iter_mut() {
        *g /= n as f64;
    }
    Ok(grad)
}

/// Fisher-vector product `H·v + damping·v`, with `H` the Hessian of the mean
/// KL at the cached policy.
///
/// At the expansion point the KL Hessian equals the Gauss-Newton form
/// `E[Jᵀ F J]`: a forward-mode pass gives `J v` for the mean head, the
/// diagonal Gaussian Fisher scales it (`1/σ²` for means, `2` for log-stds),
/// and a reverse pass applies `Jᵀ`.
pub fn fisher_vector_product(
    policy: &GaussianPolicy,
    cache: &UpdateCache,
    v: &[f64],
    damping: f64,
) -> Result<Vec<f64>> {
    let n_net = policy.mean_net().n_params();
    let act_dim = policy.act_dim();
    if v.len() != n_net + act_dim {
        return Err(Error::DimensionMismatch {
            expected: n_net + act_dim,
            got: v.len(),
            context: "fisher-vector input",
        });
    }
    let n = cache.len();
    let inv_std2: Vec<f64> = policy.log_std().iter().map(|s| (-2.0 * s).exp()).collect();
    let v_net = &v[..n_net];

    let indices: Vec<usize> = (0..n).collect();
    let partials: Vec<Result<Vec<f64>>> = indices
        .par_chunks(CHUNK)
        .map(|idxs| {
            let mut acc = vec![0.0; n_net];
            for &i in idxs {
                let jv = policy.mean_net().jvp(&cache.traces[i], v_net)?;
                let scaled: Vec<f64> =
                    jv.iter().zip(&inv_std2).map(|(j, is2)| j * is2).collect();
                policy
                    .mean_net()
                    .backward_acc(&cache.traces[i], &scaled, 1.0, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();

    let mut out = vec![0.0; n_net + act_dim];
    for p in partials {
        let p = p?;
        for (o, val) in out.iter_mut().zip(&p) {
            *o += val;
        }
    }
    for o in out[..n_net].iter_mut() {
        *o /= n as f64;
    }
    // The log_std block of the Fisher is exactly 2·I, independent of state.
    for k in 0..act_dim {
        out[n_net + k] = 2.0 * v[n_net + k];
    }
    for (o, vi) in out.iter_mut().zip(v) {
        *o += damping * vi;
    }
    Ok(out)
}

/// Gradient of the mean KL(old ‖ candidate) with respect to the candidate's
/// parameters; the independent route used by the finite-difference Hessian
/// oracle, not by training.
pub fn kl_gradient(cache: &UpdateCache, candidate: &GaussianPolicy) -> Result<Vec<f64>> {
    let n_net = candidate.mean_net().n_params();
    let act_dim = candidate.act_dim();
    let n = cache.len();
    let new_log_std = candidate.log_std();
    let inv_std2_new: Vec<f64> = new_log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let std2_old: Vec<f64> = cache.old_log_std.iter().map(|s| (2.0 * s).exp()).collect();

    let mut grad = vec![0.0; n_net + act_dim];
    for i in 0..n {
        let trace = candidate
            .mean_net()
            .forward(&cache.inputs[i], Mode::Eval, None)?;
        let mean_new = trace.output().to_vec();
        // dKL/dm_new = (m_new - m_old)/σ_new²
        let out_grad: Vec<f64> = (0..act_dim)
            .map(|k| (mean_new[k] - cache.old_means[i][k]) * inv_std2_new[k])
            .collect();
        candidate
            .mean_net()
            .backward_acc(&trace, &out_grad, 1.0, &mut grad[..n_net])?;
        // dKL/d log σ_new = 1 - (σ_old² + Δm²)/σ_new²
        for k in 0..act_dim {
            let dm = cache.old_means[i][k] - mean_new[k];
            grad[n_net + k] += 1.0 - (std2_old[k] + dm * dm) * inv_std2_new[k];
        }
    }
    for g in grad.iter_mut() {
        *g /= n as f64;
    }
    Ok(grad)
}

/// Conjugate gradient for `matvec(x) = b` with a symmetric PSD operator.
pub fn conjugate_gradient(
    matvec: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    iterations: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let b_norm = dot(b, b).sqrt().max(1e-300);
    let mut rr = dot(&r, &r);
    for _ in 0..iterations {
        if rr.sqrt() / b_norm <= tol {
            break;
        }
        let ap = matvec(&p)?;
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 {
            break; // lost positive definiteness numerically
        }
        let alpha = rr / p_ap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of one trust-region update.
#[derive(Debug, Clone)]
pub struct UpdateDiagnostics {
    pub surrogate: f64,
    pub mean_kl: f64,
    pub accepted: bool,
    /// Backtracking shrink factor actually applied (1.0 = full step).
    pub step_fraction: f64,
}

/// One TRPO step: natural gradient direction by CG, step length from the KL
/// budget, then backtracking until the surrogate improves inside the region.
/// The policy is left unchanged if no candidate qualifies.
pub fn trpo_update(
    policy: &mut GaussianPolicy,
    cache: &UpdateCache,
    config: &TrpoConfig,
) -> Result<UpdateDiagnostics> {
    let g = policy_gradient(policy, cache)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("policy gradient"));
    }
    let g_norm = dot(&g, &g).sqrt();
    if g_norm < 1e-12 {
        return Ok(UpdateDiagnostics {
            surrogate: 0.0,
            mean_kl: 0.0,
            accepted: false,
            step_fraction: 0.0,
        });
    }

    let matvec = |v: &[f64]| fisher_vector_product(policy, cache, v, config.cg_damping);
    let direction = conjugate_gradient(&matvec, &g, config.cg_iterations, 1e-10)?;
    let shs = dot(&direction, &matvec(&direction)?);
    if shs <= 0.0 || !shs.is_finite() {
        return Err(Error::NonFinite("quadratic form sᵀHs"));
    }
    let beta = (2.0 * config.kl_step / shs).sqrt();

    let theta_old = policy.params();
    let (surr_old, _) = surrogate_and_kl(cache, policy)?;

    let mut frac = 1.0;
    for _ in 0..config.backtrack_steps {
        let candidate: Vec<f64> = theta_old
            .iter()
            .zip(&direction)
            .map(|(t, d)| t + frac * beta * d)
            .collect();
        policy.set_params(&candidate)?;
        let (surr, kl) = surrogate_and_kl(cache, policy)?;
        if surr.is_finite() && kl.is_finite() && surr > surr_old && kl <= config.kl_step {
            assert!(kl <= config.kl_step, "accepted step must respect the KL bound");
            return Ok(UpdateDiagnostics {
                surrogate: surr,
                mean_kl: kl,
                accepted: true,
                step_fraction: frac,
            });
        }
        frac *= config.backtrack_coeff;
    }
    policy.set_params(&theta_old)?;
    Ok(UpdateDiagnostics {
        surrogate: surr_old,
        mean_kl: 0.0,
        accepted: false,
        step_fraction: 0.0,
    })
}

/// Per-iteration training record, mirrored into the CSV log.
#[derive(Debug, Clone)]
pub struct IterationStats {
    pub iteration: usize,
    pub samples: usize,
    pub mean_return: f64,
    pub mean_kl: f64,
    pub surrogate: f64,
    pub entropy: f64,
}

/// Side outputs of a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// CSV log destination (one row per iteration).
    pub log_path: Option<PathBuf>,
    /// Checkpoint directory plus interval in iterations.
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_interval: usize,
    pub quiet: bool,
}

/// Train a universal policy with TRPO: K iterations of collect → baseline
/// fit → GAE → trust-region update, with per-iteration diagnostics.
pub fn train_up(
    make_env: &EnvFactory,
    config: &TrpoConfig,
    options: &TrainOptions,
    seed: u64,
) -> Result<(GaussianPolicy, ValueBaseline, Vec<IterationStats>)> {
    let probe = make_env()?;
    let spec = probe.spec().clone();
    drop(probe);
    let mu_dim = if config.regular { 0 } else { spec.mu_dim };
    let input_dim = spec.obs_dim + mu_dim;

    let root = RandomSource::new(seed);
    let mut init_rng = root.substream(RNG_MAJOR_INIT, 0);
    let mut policy = GaussianPolicy::new(
        spec.obs_dim,
        mu_dim,
        &config.hidden,
        spec.act_dim,
        &mut init_rng,
    )?;
    if config.init_log_std != 0.0 {
        let mut params = policy.params();
        let n = params.len();
        for p in params[n - spec.act_dim..].iter_mut() {
            *p = config.init_log_std;
        }
        policy.set_params(&params)?;
    }
    let mut baseline = ValueBaseline::new(input_dim, &config.hidden, &mut init_rng)?;

    let mut log = match &options.log_path {
        Some(p) => {
            let mut f =
                std::fs::File::create(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            writeln!(f, "iteration,samples,mean_return,mean_kl,surrogate,entropy")
                .map_err(|e| Error::io(p.display().to_string(), e))?;
            Some((f, p.clone()))
        }
        None => None,
    };

    let mut stats = Vec::with_capacity(config.iterations);
    for iter in 0..config.iterations {
        let batch = collect_batch(&policy, make_env, config, iter as u64, &root)?;

        // Fit the baseline on discounted returns (bootstrapped with the
        // pre-fit values), then recompute values for the advantages.
        let values_pre = baseline_values(&baseline, &batch);
        let (_, returns) = compute_gae(&batch, &values_pre, config.discount, config.gae_lambda)?;
        let flat_inputs: Vec<&[f64]> = batch.flat_inputs();
        let flat_returns: Vec<f64> = returns.iter().flatten().copied().collect();
        let mut fit_rng = root.substream(iter as u64, RNG_MINOR_BASELINE);
        baseline.fit(
            &flat_inputs,
            &flat_returns,
            config.baseline_epochs,
            config.baseline_minibatch,
            config.baseline_lr,
            &mut fit_rng,
        )?;
        let values = baseline_values(&baseline, &batch);
        let (advantages, _) = compute_gae(&batch, &values, config.discount, config.gae_lambda)?;

        let cache = UpdateCache::build(&policy, &batch, &advantages)?;
        let diag = trpo_update(&mut policy, &cache, config)?;

        let row = IterationStats {
            iteration: iter,
            samples: batch.n_samples(),
            mean_return: batch.mean_return(),
            mean_kl: diag.mean_kl,
            surrogate: diag.surrogate,
            entropy: policy.entropy(),
        };
        if let Some((f, p)) = log.as_mut() {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                row.iteration,
                row.samples,
                row.mean_return,
                row.mean_kl,
                row.surrogate,
                row.entropy
            )
            .map_err(|e| Error::io(p.display().to_string(), e))?;
        }
        if !options.quiet {
            eprintln!(
                "iter {:4}  samples {:6}  return {:10.1}  kl {:.5}  entropy {:.3}",
                row.iteration, row.samples, row.mean_return, row.mean_kl, row.entropy
            );
        }
        if let Some(dir) = &options.checkpoint_dir {
            if options.checkpoint_interval > 0 && (iter + 1) % options.checkpoint_interval == 0 {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Error::io(dir.display().to_string(), e))?;
                let path = dir.join(format!("policy_iter{:04}.json", iter + 1));
                crate::ckpt::PolicyCheckpoint::from_policy(&policy, &spec).save(&path)?;
            }
        }
        stats.push(row);
    }
    Ok((policy, baseline, stats))
}
