//! Fast self-verification suite behind the `verify` CLI command.
//!
//! Every check pits an implementation against an independent route: finite
//! differences for gradients and Fisher products, a brute-force nested sum
//! for advantage estimation, a direct dense solve for conjugate gradient,
//! refined integration for energy conservation, closed forms for ballistics
//! and probability math, and the literal reward constants.

use crate::env::chain::solve_linear;
use crate::env::{make_env, Env, EnvConfig, EnvState, Task};
use crate::net::{DenseNetwork, GaussianPolicy, Mode};
use crate::types::{Action, ModelParams};
use crate::{RandomSource, Result};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
        }
    }

    fn from_bound(name: &'static str, worst: f64, bound: f64) -> Self {
        if worst <= bound && worst.is_finite() {
            Self::pass(name, format!("worst {worst:.3e} ≤ {bound:.0e}"))
        } else {
            Self::fail(name, format!("worst {worst:.3e} exceeds {bound:.0e}"))
        }
    }
}

/// Run every check; all must pass for a clean checkout.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        network_gradients(),
        dropout_gradients(),
        gae_against_brute_force(),
        kl_closed_forms(),
        conjugate_gradient_against_direct_solve(),
        fisher_product_against_fd_hessian(),
        energy_conservation(Task::Dpend),
        energy_conservation(Task::Cartpole),
        ballistic_apex(),
        hopper_contact_invariants(),
        reward_constants(),
    ]
}

/// Central finite differences over every parameter of a random tanh net.
fn network_gradients() -> CheckResult {
    let name = "network-gradients-vs-finite-differences";
    match grad_check(&[5, 12, 8, 3], 0.0, 101) {
        Ok(worst) => CheckResult::from_bound(name, worst, 1e-4),
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

/// Same check through an active dropout mask (replayed for the differences).
fn dropout_gradients() -> CheckResult {
    let name = "dropout-gradients-vs-finite-differences";
    match grad_check(&[4, 16, 2], 0.1, 102) {
        Ok(worst) => CheckResult::from_bound(name, worst, 1e-4),
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

fn grad_check(dims: &[usize], dropout: f64, seed: u64) -> Result<f64> {
    let mut rng = RandomSource::new(seed);
    let mut net = DenseNetwork::zeros(dims, dropout)?;
    let params: Vec<f64> = (0..net.n_params()).map(|_| rng.uniform(-0.7, 0.7)).collect();
    net.set_params(&params)?;
    let input: Vec<f64> = (0..dims[0]).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let out_grad: Vec<f64> = (0..*dims.last().unwrap())
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();

    let mode = if dropout > 0.0 { Mode::Train } else { Mode::Eval };
    let mut mask_rng = RandomSource::new(seed + 1);
    let trace = net.forward(&input, mode, Some(&mut mask_rng))?;
    let (grads, _) = net.backward(&trace, &out_grad)?;
    let masks = trace_masks(&trace);

    // Replay the identical masked function for the finite differences.
    let eval = |n: &DenseNetwork| -> Result<f64> {
        let t = n.forward_with_masks(&input, masks.as_deref())?;
        Ok(t.iter().zip(&out_grad).map(|(a, b)| a * b).sum())
    };

    let eps = 1e-5;
    let mut worst = 0.0_f64;
    let mut probe = net.clone();
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += eps;
        probe.set_params(&p)?;
        let plus = eval(&probe)?;
        p[i] = params[i] - eps;
        probe.set_params(&p)?;
        let minus = eval(&probe)?;
        let fd = (plus - minus) / (2.0 * eps);
        let rel = (grads[i] - fd).abs() / fd.abs().max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn trace_masks(trace: &crate::net::ForwardTrace) -> Option<Vec<Vec<f64>>> {
    trace.masks().map(|m| m.to_vec())
}

/// Random short episodes against the nested-sum advantage definition.
fn gae_against_brute_force() -> CheckResult {
    let name = "gae-vs-brute-force";
    let mut rng = RandomSource::new(7);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let t_len = 1 + rng.index(8);
        let rewards: Vec<f64> = (0..t_len).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let values: Vec<f64> = (0..t_len).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let boot = rng.uniform(-2.0, 2.0);
        let discount = rng.uniform(0.8, 1.0);
        let lambda = rng.uniform(0.0, 1.0);

        // Backward recursion (the implementation's method, done locally).
        let mut adv_impl = vec![0.0; t_len];
        let mut gae = 0.0;
        for t in (0..t_len).rev() {
            let v_next = if t + 1 < t_len { values[t + 1] } else { boot };
            let delta = rewards[t] + discount * v_next - values[t];
            gae = delta + discount * lambda * gae;
            adv_impl[t] = gae;
        }
        // Brute force double loop.
        for t in 0..t_len {
            let mut a = 0.0;
            for k in 0..t_len - t {
                let v_next = if t + k + 1 < t_len {
                    values[t + k + 1]
                } else {
                    boot
                };
                let delta = rewards[t + k] + discount * v_next - values[t + k];
                a += (discount * lambda).powi(k as i32) * delta;
            }
            worst = worst.max((adv_impl[t] - a).abs());
        }
    }
    CheckResult::from_bound(name, worst, 1e-10)
}

/// Self-KL exactly zero; random parameters against an independently coded
/// closed form.
fn kl_closed_forms() -> CheckResult {
    let name = "kl-closed-form";
    let mut rng = RandomSource::new(17);
    for _ in 0..200 {
        let dim = 1 + rng.index(4);
        let m: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let s: Vec<f64> = (0..dim).map(|_| rng.uniform(0.05, 3.0)).collect();
        let self_kl = crate::net::kl_diag_gaussian(&m, &s, &m, &s);
        if self_kl != 0.0 {
            return CheckResult::fail(name, format!("self-KL = {self_kl}, expected exact 0"));
        }
    }
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let dim = 1 + rng.index(4);
        let m1: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let m2: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let s1: Vec<f64> = (0..dim).map(|_| rng.uniform(0.05, 3.0)).collect();
        let s2: Vec<f64> = (0..dim).map(|_| rng.uniform(0.05, 3.0)).collect();
        let got = crate::net::kl_diag_gaussian(&m1, &s1, &m2, &s2);
        let mut expected = 0.0;
        for i in 0..dim {
            // KL for one dimension, written out independently:
            // log σ₂ − log σ₁ + (σ₁² + (m₁−m₂)²)/(2σ₂²) − 1/2
            expected += s2[i].ln() - s1[i].ln()
                + (s1[i].powi(2) + (m1[i] - m2[i]).powi(2)) / (2.0 * s2[i].powi(2))
                - 0.5;
        }
        worst = worst.max((got - expected).abs());
    }
    CheckResult::from_bound(name, worst, 1e-12)
}

fn conjugate_gradient_against_direct_solve() -> CheckResult {
    let name = "conjugate-gradient-vs-direct-solve";
    let mut rng = RandomSource::new(23);
    let n = 20;
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += a[k][i] * a[k][j];
                }
                m[i][j] = s;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let matvec = |v: &[f64]| -> Result<Vec<f64>> {
            Ok((0..n)
                .map(|i| (0..n).map(|j| m[i][j] * v[j]).sum())
                .collect())
        };
        match crate::trpo::conjugate_gradient(matvec, &b, n, 1e-14) {
            Ok(x) => {
                let direct = solve_linear(m.clone(), b.clone());
                for i in 0..n {
                    worst = worst.max((x[i] - direct[i]).abs());
                }
            }
            Err(e) => return CheckResult::fail(name, e.to_string()),
        }
    }
    CheckResult::from_bound(name, worst, 1e-6)
}

/// Fisher-vector products against a finite-difference KL Hessian on a
/// ≤50-parameter policy.
fn fisher_product_against_fd_hessian() -> CheckResult {
    let name = "fisher-product-vs-fd-kl-hessian";
    let mut rng = RandomSource::new(29);
    let mut policy = match GaussianPolicy::new(2, 0, &[3], 1, &mut rng) {
        Ok(p) => p,
        Err(e) => return CheckResult::fail(name, e.to_string()),
    };
    let params: Vec<f64> = (0..policy.n_params()).map(|_| rng.uniform(-0.6, 0.6)).collect();
    if let Err(e) = policy.set_params(&params) {
        return CheckResult::fail(name, e.to_string());
    }

    let n_samples = 25;
    let inputs: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
        .collect();
    let episodes = vec![crate::trpo::Episode {
        inputs: inputs.clone(),
        actions: (0..n_samples).map(|_| vec![rng.uniform(-1.0, 1.0)]).collect(),
        rewards: vec![0.0; n_samples],
        log_probs: vec![0.0; n_samples],
        terminated: true,
        final_input: vec![0.0, 0.0],
        mu: crate::types::MuBounds::new(&[(-1.0, 1.0)]).unwrap().midpoint(),
    }];
    let batch = crate::trpo::Batch { episodes };
    let advantages = vec![vec![0.0; n_samples]];
    let cache = match crate::trpo::UpdateCache::build(&policy, &batch, &advantages) {
        Ok(c) => c,
        Err(e) => return CheckResult::fail(name, e.to_string()),
    };

    let mut worst = 0.0_f64;
    for _ in 0..3 {
        let v: Vec<f64> = (0..policy.n_params()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let hv = match crate::trpo::fisher_vector_product(&policy, &cache, &v, 0.0) {
            Ok(h) => h,
            Err(e) => return CheckResult::fail(name, e.to_string()),
        };
        let eps = 1e-5;
        let theta = policy.params();
        let mut cand = policy.clone();
        let plus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + eps * d).collect();
        cand.set_params(&plus).unwrap();
        let g_plus = crate::trpo::kl_gradient(&cache, &cand).unwrap();
        let minus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - eps * d).collect();
        cand.set_params(&minus).unwrap();
        let g_minus = crate::trpo::kl_gradient(&cache, &cand).unwrap();
        for i in 0..hv.len() {
            let fd = (g_plus[i] - g_minus[i]) / (2.0 * eps);
            worst = worst.max((hv[i] - fd).abs() / fd.abs().max(1e-5));
        }
    }
    CheckResult::from_bound(name, worst, 1e-3)
}

/// Passive plant energy over one second at dt = 0.002 against dt = 0.0001.
fn energy_conservation(task: Task) -> CheckResult {
    let name = match task {
        Task::Dpend => "energy-conservation-dpend",
        Task::Cartpole => "energy-conservation-cartpole",
        _ => "energy-conservation",
    };
    let cfg = EnvConfig::default();
    let result = (|| -> Result<(f64, f64, f64)> {
        let (chain, q0, qd0) = match task {
            Task::Dpend => {
                let mut env = crate::env::DoublePendulumEnv::new(&cfg)?;
                let bounds = env.spec().mu_bounds.clone();
                let mu = ModelParams::new(vec![0.3], bounds)?;
                env.reset(&mu, &mut RandomSource::new(1))?;
                // Moderate passive swing about the hanging equilibrium.
                let hang = std::f64::consts::PI;
                (
                    env.dynamics().clone(),
                    vec![0.0, hang - 0.4, 0.3],
                    vec![0.2, 0.0, 0.0],
                )
            }
            Task::Cartpole => {
                let mut env = crate::env::CartPoleEnv::new(&cfg)?;
                let bounds = env.spec().mu_bounds.clone();
                let mu = ModelParams::new(vec![0.6, 0.5, 0.0, 0.0], bounds)?;
                env.reset(&mu, &mut RandomSource::new(1))?;
                (env.dynamics().clone(), vec![0.0, 2.2], vec![0.0, 0.0])
            }
            _ => unreachable!(),
        };
        let n = chain.dof();
        let tau = vec![0.0; n];

        let e0 = chain.energy(&q0, &qd0);
        let mut q = q0.clone();
        let mut qd = qd0.clone();
        for _ in 0..500 {
            chain.step_semi_implicit(&mut q, &mut qd, &tau, &[], 0.002);
        }
        let e_coarse = chain.energy(&q, &qd);

        let mut q = q0.clone();
        let mut qd = qd0.clone();
        for _ in 0..10_000 {
            chain.step_semi_implicit(&mut q, &mut qd, &tau, &[], 0.0001);
        }
        let e_ref = chain.energy(&q, &qd);
        Ok((e0, e_coarse, e_ref))
    })();
    match result {
        Ok((e0, e_coarse, e_ref)) => {
            let scale = e0.abs().max(1.0);
            let drift = (e_coarse - e0).abs() / scale;
            let vs_ref = (e_coarse - e_ref).abs() / scale;
            let worst = drift.max(vs_ref);
            if worst <= 0.005 {
                CheckResult::pass(
                    name,
                    format!("drift {drift:.2e}, vs dt=1e-4 reference {vs_ref:.2e} (≤ 0.5%)"),
                )
            } else {
                CheckResult::fail(
                    name,
                    format!("energy error {worst:.3e} over 1 s exceeds 0.5% (E0 = {e0:.4})"),
                )
            }
        }
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

/// Released block apex against v²/(2g).
fn ballistic_apex() -> CheckResult {
    let name = "ballistic-apex-closed-form";
    let cfg = EnvConfig::default();
    let result = (|| -> Result<f64> {
        let mut env = crate::env::ArmEnv::new(&cfg)?;
        let bounds = env.spec().mu_bounds.clone();
        let mu = ModelParams::new(vec![0.5], bounds)?;
        env.reset(&mu, &mut RandomSource::new(2))?;
        let mut s = env.state();
        s.extras[0] = 0.0;
        s.extras[1] = 0.4;
        s.extras[2] = 0.0;
        s.extras[3] = 3.5;
        s.extras[4] = 0.0; // detached
        env.set_state(&s)?;
        let mut apex: f64 = 0.0;
        for _ in 0..700 {
            let r = env.step(&Action(vec![0.0, 0.0]))?;
            apex = apex.max(env.state().extras[1]);
            if r.terminated {
                break;
            }
        }
        let expected = 0.4 + 3.5_f64.powi(2) / (2.0 * cfg.gravity);
        Ok((apex - expected).abs())
    })();
    match result {
        Ok(err) => CheckResult::from_bound(name, err, 1e-3),
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

/// 5-second settle: f_n ≥ 0 and |f_t| ≤ μ·f_n at every recorded contact,
/// with bounded penetration at rest.
fn hopper_contact_invariants() -> CheckResult {
    let name = "hopper-contact-invariants";
    let cfg = EnvConfig::default();
    let result = (|| -> Result<(f64, f64)> {
        let mut env = crate::env::HopperEnv::new(&cfg)?;
        let bounds = env.spec().mu_bounds.clone();
        let mu = ModelParams::new(vec![0.9], bounds)?;
        env.reset(&mu, &mut RandomSource::new(3))?;
        let mut worst_cone = 0.0_f64;
        let mut worst_negative = 0.0_f64;
        for _ in 0..2500 {
            let s = env.state();
            let u = Action((0..3).map(|j| -2.0 * s.qd[3 + j]).collect());
            env.step(&u)?;
            for c in env.contact_forces() {
                worst_negative = worst_negative.max(-c.normal);
                worst_cone = worst_cone.max(c.tangential.abs() - c.friction * c.normal);
            }
        }
        Ok((worst_negative, worst_cone))
    })();
    match result {
        Ok((neg, cone)) => {
            if neg <= 0.0 && cone <= 1e-9 {
                CheckResult::pass(
                    name,
                    format!("f_n ≥ 0 and |f_t| − μf_n ≤ {cone:.1e} over 5 s"),
                )
            } else {
                CheckResult::fail(
                    name,
                    format!("negative normal {neg:.3e} or cone excess {cone:.3e}"),
                )
            }
        }
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

/// The literal reward and termination constants.
fn reward_constants() -> CheckResult {
    let name = "reward-and-termination-constants";
    let cfg = EnvConfig::default();
    let result = (|| -> Result<Vec<String>> {
        let mut problems = Vec::new();

        // Double pendulum: exact upright reward of 10.
        let mut env = make_env(Task::Dpend, &cfg)?;
        let mu = env.spec().mu_bounds.midpoint();
        env.reset(&mu, &mut RandomSource::new(0))?;
        env.set_state(&EnvState {
            q: vec![0.0; 3],
            qd: vec![0.0; 3],
            extras: vec![],
        })?;
        let r = env.step(&Action(vec![0.0]))?;
        if r.reward != 10.0 {
            problems.push(format!("dpend upright reward {} ≠ 10", r.reward));
        }

        // Cart-pole: upright reward 10 − ln 0.1 and the ±40 N clamp.
        let mut env = make_env(Task::Cartpole, &cfg)?;
        let mu = env.spec().mu_bounds.midpoint();
        env.reset(&mu, &mut RandomSource::new(0))?;
        env.set_state(&EnvState {
            q: vec![0.0, 0.0],
            qd: vec![0.0, 0.0],
            extras: vec![0.0],
        })?;
        let r = env.step(&Action(vec![0.0]))?;
        if (r.reward - (10.0 - 0.1_f64.ln())).abs() > 1e-12 {
            problems.push(format!("cart-pole upright reward {}", r.reward));
        }
        if env.spec().action_limit != vec![40.0] {
            problems.push("cart-pole force limit is not 40 N".into());
        }

        // Hopper alive bonus 3.0 at rest.
        let mut env = crate::env::HopperEnv::new(&cfg)?;
        let bounds = env.spec().mu_bounds.clone();
        env.reset(&ModelParams::new(vec![0.6], bounds)?, &mut RandomSource::new(0))?;
        for _ in 0..3000 {
            let s = env.state();
            let u = Action((0..3).map(|j| -2.0 * s.qd[3 + j]).collect());
            env.step(&u)?;
        }
        let r = env.step(&Action(vec![0.0; 3]))?;
        if (r.reward - 3.0).abs() > 0.05 {
            problems.push(format!("hopper rest reward {} ≉ 3.0", r.reward));
        }

        Ok(problems)
    })();
    match result {
        Ok(problems) if problems.is_empty() => CheckResult::pass(
            name,
            "upright 10 exactly; 10 − ln 0.1; ±40 N clamp; alive 3.0".into(),
        ),
        Ok(problems) => CheckResult::fail(name, problems.join("; ")),
        Err(e) => CheckResult::fail(name, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_and_run_quickly() {
        let start = std::time::Instant::now();
        let results = run_all();
        let elapsed = start.elapsed();
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
        assert!(results.len() >= 10);
        assert!(
            elapsed.as_secs() < 300,
            "verification took {elapsed:?}, budget is 5 minutes"
        );
    }
}
