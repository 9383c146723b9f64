//! Evaluation sweeps and the two generalization experiments.

use crate::env::{make_env, EnvConfig, Task};
use crate::net::GaussianPolicy;
use crate::osi::OsiNetwork;
use crate::runtime::{normalized_performance, run_controller, Controller, RunRecord, Trace};
use crate::types::{denormalize_mu, ModelParams};
use crate::{RandomSource, Result};
use rayon::prelude::*;

/// Statistics at one μ grid point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Ground-truth μ in task units.
    pub mu_true: Vec<f64>,
    pub mean_perf: f64,
    pub std_perf: f64,
    /// Mean/std of the μ the policy received (denormalized to task units),
    /// pooled over post-warmup steps of every rollout.
    pub mean_mu_hat: Vec<f64>,
    pub std_mu_hat: Vec<f64>,
    pub n_eval: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub task: Task,
    pub controller: String,
    pub points: Vec<SweepPoint>,
}

/// Which controller a sweep or experiment drives.
pub enum EvalController<'a> {
    UpTrue,
    UpOsi(&'a OsiNetwork),
    Regular,
    UpFixed(Vec<f64>),
}

impl EvalController<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            EvalController::UpTrue => "up-true",
            EvalController::UpOsi(_) => "up-osi",
            EvalController::Regular => "regular",
            EvalController::UpFixed(_) => "up-fixed",
        }
    }

    fn as_runtime(&self) -> Controller<'_> {
        match self {
            EvalController::UpTrue => Controller::UpTrue,
            EvalController::UpOsi(osi) => Controller::UpOsi(*osi),
            EvalController::Regular => Controller::Regular,
            EvalController::UpFixed(v) => Controller::UpFixed(v.clone()),
        }
    }
}

/// Evenly spaced 1-dim grid over the training range of μ component 0,
/// holding the other components (if any) at their midpoint.
pub fn linear_grid(task: Task, config: &EnvConfig, n: usize) -> Result<Vec<ModelParams>> {
    let env = make_env(task, config)?;
    let bounds = env.spec().mu_bounds.clone();
    let mid = bounds.midpoint();
    Ok((0..n)
        .map(|i| {
            let frac = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
            let mut values = mid.values().to_vec();
            values[0] = bounds.low(0) + frac * (bounds.high(0) - bounds.low(0));
            ModelParams::new(values, bounds.clone()).expect("grid point in mu space")
        })
        .collect())
}

/// Evaluate one controller across a μ grid, `n_eval` rollouts per point.
///
/// Rollout (g, e) uses the stream `(g, e)` of `root` regardless of the
/// controller, so runs with the same seed are paired point-for-point.
pub fn sweep_mu(
    policy: &GaussianPolicy,
    controller: &EvalController,
    task: Task,
    config: &EnvConfig,
    grid: &[ModelParams],
    n_eval: usize,
    root: &RandomSource,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(crate::error::Error::Empty("mu grid"));
    }
    let points: Vec<Result<SweepPoint>> = grid
        .par_iter()
        .enumerate()
        .map(|(g, mu)| {
            let mut env = make_env(task, config)?;
            let max_steps = env.spec().max_steps;
            let bounds = env.spec().mu_bounds.clone();
            let mut perfs = Vec::with_capacity(n_eval);
            let mut hat_sum = vec![0.0; bounds.dim()];
            let mut hat_sq = vec![0.0; bounds.dim()];
            let mut hat_n = 0usize;
            for e in 0..n_eval {
                let mut rng = root.substream(g as u64, e as u64);
                let record = run_controller(
                    policy,
                    &controller.as_runtime(),
                    env.as_mut(),
                    mu,
                    max_steps,
                    &mut rng,
                    Trace::Mu,
                )?;
                perfs.push(normalized_performance(env.as_ref(), &record));
                accumulate_mu_inputs(&record, &bounds, &mut hat_sum, &mut hat_sq, &mut hat_n)?;
            }
            let n = perfs.len() as f64;
            let mean = perfs.iter().sum::<f64>() / n;
            let var = perfs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
            let (mean_mu_hat, std_mu_hat) = if hat_n > 0 {
                let m: Vec<f64> = hat_sum.iter().map(|s| s / hat_n as f64).collect();
                let s: Vec<f64> = hat_sq
                    .iter()
                    .zip(&m)
                    .map(|(sq, mm)| (sq / hat_n as f64 - mm * mm).max(0.0).sqrt())
                    .collect();
                (m, s)
            } else {
                (vec![], vec![])
            };
            Ok(SweepPoint {
                mu_true: mu.values().to_vec(),
                mean_perf: mean,
                std_perf: var.sqrt(),
                mean_mu_hat,
                std_mu_hat,
                n_eval,
            })
        })
        .collect();

    let mut out = Vec::with_capacity(grid.len());
    for p in points {
        out.push(p?);
    }
    Ok(SweepResult {
        task,
        controller: controller.label().to_string(),
        points: out,
    })
}

/// Pool the post-warmup μ inputs of one rollout, denormalized to task units.
fn accumulate_mu_inputs(
    record: &RunRecord,
    bounds: &crate::types::MuBounds,
    sum: &mut [f64],
    sq: &mut [f64],
    n: &mut usize,
) -> Result<()> {
    for step in crate::types::HISTORY_LEN..record.mu_input_trace.len() {
        let normed = &record.mu_input_trace[step];
        if normed.len() != bounds.dim() {
            continue; // regular controller has no μ input
        }
        let raw = denormalize_mu(normed, bounds)?;
        for (i, v) in raw.values().iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
        *n += 1;
    }
    Ok(())
}

/// One μ_vary setting of the varying-friction track.
#[derive(Debug, Clone)]
pub struct FrictionPoint {
    pub mu_vary: f64,
    /// Mean forward distance per controller over the paired evals.
    pub dist_up_true: f64,
    pub dist_up_osi: f64,
    pub dist_up_fixed: f64,
}

/// Per-step predicted and actual friction for one rollout.
#[derive(Debug, Clone)]
pub struct MuTrace {
    pub mu_vary: f64,
    pub time: Vec<f64>,
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    /// First step at which the foot enters the varying region, if it does.
    pub entry_step: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FrictionResult {
    pub points: Vec<FrictionPoint>,
    pub trace: Option<MuTrace>,
    pub steps: usize,
}

/// Hopper on a track whose friction is 0.9 outside [20 m, 30 m] and μ_vary
/// inside, run for 2000 steps. UP-true reads the instantaneous ground truth,
/// UP-OSI estimates it, and a fixed-μ controller stays blind at 0.9.
pub fn varying_friction_experiment(
    policy: &GaussianPolicy,
    osi: &OsiNetwork,
    base_config: &EnvConfig,
    mu_vary_grid: &[f64],
    n_eval: usize,
    steps: usize,
    trace_at: Option<f64>,
    root: &RandomSource,
) -> Result<FrictionResult> {
    const MU_CONST: f64 = 0.9;
    const REGION: (f64, f64) = (20.0, 30.0);

    let mut points = Vec::with_capacity(mu_vary_grid.len());
    let mut trace = None;
    for (g, &mu_vary) in mu_vary_grid.iter().enumerate() {
        let mut config = base_config.clone();
        config.hopper.track = Some(crate::env::config::FrictionTrack {
            region_lo: REGION.0,
            region_hi: REGION.1,
            mu_inside: mu_vary,
        });
        let bounds = make_env(Task::Hopper, &config)?.spec().mu_bounds.clone();
        let mu_const = ModelParams::new(vec![MU_CONST], bounds.clone())?;
        let fixed_norm = crate::types::normalize_mu(&[MU_CONST], &bounds);

        let mut dist = [0.0; 3];
        for e in 0..n_eval {
            let controllers: [Controller; 3] = [
                Controller::UpTrue,
                Controller::UpOsi(osi),
                Controller::UpFixed(fixed_norm.clone()),
            ];
            for (c, controller) in controllers.iter().enumerate() {
                let mut env = make_env(Task::Hopper, &config)?;
                let mut rng = root.substream(g as u64, e as u64);
                let want_trace = c == 1
                    && e == 0
                    && trace_at.map(|t| (t - mu_vary).abs() < 1e-9).unwrap_or(false);
                let record = run_controller(
                    policy,
                    controller,
                    env.as_mut(),
                    &mu_const,
                    steps,
                    &mut rng,
                    if want_trace { Trace::Mu } else { Trace::None },
                )?;
                dist[c] += record.task_metric.unwrap_or(0.0) / n_eval as f64;
                if want_trace {
                    let dt = env.spec().dt;
                    let predicted: Vec<f64> = record
                        .mu_input_trace
                        .iter()
                        .map(|m| denormalize_mu(m, &bounds).map(|p| p.values()[0]))
                        .collect::<Result<_>>()?;
                    let actual: Vec<f64> =
                        record.mu_true_trace.iter().map(|m| m[0]).collect();
                    let entry_step = actual.iter().position(|&a| (a - mu_vary).abs() < 1e-9);
                    trace = Some(MuTrace {
                        mu_vary,
                        time: (0..predicted.len()).map(|k| k as f64 * dt).collect(),
                        predicted,
                        actual,
                        entry_step,
                    });
                }
            }
        }
        points.push(FrictionPoint {
            mu_vary,
            dist_up_true: dist[0],
            dist_up_osi: dist[1],
            dist_up_fixed: dist[2],
        });
    }
    Ok(FrictionResult {
        points,
        trace,
        steps,
    })
}

/// One point of the beyond-training-range test.
#[derive(Debug, Clone)]
pub struct ExtrapolationPoint {
    pub pole_length: f64,
    pub tip_mass: f64,
    pub perf_up_true: f64,
    pub std_up_true: f64,
    pub perf_up_osi: f64,
    pub std_up_osi: f64,
    /// Mean normalized μ̂ components (out-of-range values past ±1 expected).
    pub mean_mu_hat_norm: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExtrapolationResult {
    pub points: Vec<ExtrapolationPoint>,
}

/// Cart-pole evaluated along the coupled line from (0.8 m, 1.0 kg) to
/// (1.4 m, 1.9 kg) — 100% beyond the training ranges — with UP-true and
/// UP-OSI compared on identical seeds.
pub fn extrapolation_experiment(
    policy: &GaussianPolicy,
    osi: &OsiNetwork,
    config: &EnvConfig,
    n_points: usize,
    n_eval: usize,
    root: &RandomSource,
) -> Result<ExtrapolationResult> {
    let bounds = make_env(Task::Cartpole, config)?.spec().mu_bounds.clone();
    let mut points = Vec::with_capacity(n_points);
    for g in 0..n_points {
        let t = if n_points == 1 {
            0.5
        } else {
            g as f64 / (n_points - 1) as f64
        };
        let length = 0.8 + 0.6 * t;
        let mass = 1.0 + 0.9 * t;
        let mu = ModelParams::new(vec![mass, length, 0.0, 0.0], bounds.clone())?;

        let mut perf = [vec![], vec![]];
        let mut hat_sum = vec![0.0; bounds.dim()];
        let mut hat_n = 0usize;
        for e in 0..n_eval {
            for (c, controller) in [Controller::UpTrue, Controller::UpOsi(osi)]
                .iter()
                .enumerate()
            {
                let mut env = make_env(Task::Cartpole, config)?;
                let max_steps = env.spec().max_steps;
                let mut rng = root.substream(g as u64, e as u64);
                let record = run_controller(
                    policy,
                    controller,
                    env.as_mut(),
                    &mu,
                    max_steps,
                    &mut rng,
                    if c == 1 { Trace::Mu } else { Trace::None },
                )?;
                perf[c].push(normalized_performance(env.as_ref(), &record));
                if c == 1 {
                    for step in crate::types::HISTORY_LEN..record.mu_input_trace.len() {
                        for (i, v) in record.mu_input_trace[step].iter().enumerate() {
                            hat_sum[i] += v;
                        }
                        hat_n += 1;
                    }
                }
            }
        }
        let stats = |v: &[f64]| {
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / n;
            (m, var.sqrt())
        };
        let (pt, st) = stats(&perf[0]);
        let (po, so) = stats(&perf[1]);
        points.push(ExtrapolationPoint {
            pole_length: length,
            tip_mass: mass,
            perf_up_true: pt,
            std_up_true: st,
            perf_up_osi: po,
            std_up_osi: so,
            mean_mu_hat_norm: hat_sum
                .iter()
                .map(|s| if hat_n > 0 { s / hat_n as f64 } else { 0.0 })
                .collect(),
        });
    }
    Ok(ExtrapolationResult { points })
}
