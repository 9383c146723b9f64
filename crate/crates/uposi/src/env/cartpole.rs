//! Cart-pole swing-up with unknown tip mass and pole length.
//!
//! The pole hangs at ±π initially and must be pumped upright under a hard
//! ±40 N force limit. The identification target is ℝ⁴: tip mass, pole
//! length, cart velocity and pole angular velocity — the observation carries
//! positions only, so velocities must be inferred like any other unknown.
//!
//! Reward: `r = -(σ² + log(σ² + 0.1)) - 0.2 |p_cart| + 10`, σ wrapped to
//! (-π, π], zero upright. Termination: pole winds more than 4π from its
//! initial angle or the cart leaves ±2 m.

use super::chain::{rod_inertia, Chain, Link, Vec2};
use super::{
    check_finite, clamp_action, wrap_to_pi, Env, EnvConfig, EnvSpec, EnvState, StepResult, Task,
};
use crate::types::{Action, ModelParams, MuBounds, Observation};
use crate::{RandomSource, Result};

const K_ANGLE: f64 = 1.0;
const K_CART: f64 = 0.2;
const ALIVE_BONUS: f64 = 10.0;
const SIGMA_W: f64 = 1.0;
const SIGMA_V: f64 = 1.0;
const SIGMA_A: f64 = 0.1;
const ROTATION_LIMIT: f64 = 4.0 * std::f64::consts::PI;

/// Per-step reward at rest in the upright centered state; the normalization
/// reference for swing-up performance. Equals `10 - ln(0.1)`.
pub fn upright_reward() -> f64 {
    ALIVE_BONUS - SIGMA_V * SIGMA_A.ln()
}

pub struct CartPoleEnv {
    spec: EnvSpec,
    config: EnvConfig,
    chain: Chain,
    /// Physical μ components (tip mass, pole length); velocities are live.
    tip_mass: f64,
    pole_length: f64,
    q: Vec<f64>,
    qd: Vec<f64>,
    /// Initial pole angle, reference for the 4π winding termination.
    theta_init: f64,
}

impl CartPoleEnv {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let c = &config.cartpole;
        let bounds = MuBounds::new(&[
            (c.mass_low, c.mass_high),
            (c.length_low, c.length_high),
            (-c.cart_vel_scale, c.cart_vel_scale),
            (-c.pole_vel_scale, c.pole_vel_scale),
        ])?;
        let spec = EnvSpec {
            task: Task::Cartpole,
            obs_dim: 2,
            act_dim: 1,
            mu_dim: 4,
            mu_bounds: bounds,
            action_limit: vec![c.force_limit],
            dt: config.dt,
            max_steps: config.max_steps,
        };
        let tip_mass = 0.5 * (c.mass_low + c.mass_high);
        let pole_length = 0.5 * (c.length_low + c.length_high);
        let chain = Self::build_chain(config, tip_mass, pole_length);
        Ok(Self {
            spec,
            config: config.clone(),
            chain,
            tip_mass,
            pole_length,
            q: vec![0.0, std::f64::consts::PI],
            qd: vec![0.0, 0.0],
            theta_init: std::f64::consts::PI,
        })
    }

    fn build_chain(config: &EnvConfig, tip_mass: f64, length: f64) -> Chain {
        let c = &config.cartpole;
        // Rod plus tip mass folded into one rigid link (COM and inertia by
        // the parallel-axis theorem); pole points up at q = 0.
        let m_rod = c.pole_mass;
        let m = m_rod + tip_mass;
        let com = (m_rod * 0.5 * length + tip_mass * length) / m;
        let inertia = rod_inertia(m_rod, length)
            + m_rod * (com - 0.5 * length).powi(2)
            + tip_mass * (length - com).powi(2);
        Chain::new(
            vec![
                Link::prismatic_x(Vec2::ZERO, c.cart_mass, 0.0, Vec2::ZERO),
                Link::revolute(Vec2::ZERO, m, inertia, Vec2::new(0.0, com)),
            ],
            config.gravity,
        )
    }

    fn reward(&self) -> f64 {
        let sigma = wrap_to_pi(self.q[1]);
        let s2 = sigma * sigma;
        let r_sigma = SIGMA_W * s2 + SIGMA_V * (s2 + SIGMA_A).ln();
        -K_ANGLE * r_sigma - K_CART * self.q[0].abs() + ALIVE_BONUS
    }

    fn terminated(&self) -> bool {
        (self.q[1] - self.theta_init).abs() > ROTATION_LIMIT
            || self.q[0].abs() > self.config.cartpole.cart_limit
    }

    pub fn dynamics(&self) -> &Chain {
        &self.chain
    }
}

impl Env for CartPoleEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, mu: &ModelParams, rng: &mut RandomSource) -> Result<Observation> {
        if mu.dim() != 4 {
            return Err(crate::error::Error::DimensionMismatch {
                expected: 4,
                got: mu.dim(),
                context: "cart-pole mu (tip mass, length, cart vel, pole vel)",
            });
        }
        self.tip_mass = mu.values()[0];
        self.pole_length = mu.values()[1];
        self.chain = Self::build_chain(&self.config, self.tip_mass, self.pole_length);
        let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
        let theta = sign * std::f64::consts::PI
            + rng.normal(0.0, self.config.cartpole.init_angle_noise);
        self.q = vec![0.0, theta];
        self.qd = vec![0.0, 0.0];
        self.theta_init = theta;
        Ok(self.observe())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        check_finite(&self.q, "cart-pole state")?;
        check_finite(action.as_slice(), "cart-pole action")?;
        let force = clamp_action(action.as_slice(), &self.spec.action_limit);
        let tau = [force[0], 0.0];
        self.chain
            .step_semi_implicit(&mut self.q, &mut self.qd, &tau, &[], self.spec.dt);
        Ok(StepResult {
            observation: self.observe(),
            reward: self.reward(),
            terminated: self.terminated(),
        })
    }

    fn observe(&self) -> Observation {
        // Positions only; velocities are the identification target.
        Observation(vec![self.q[0], self.q[1]])
    }

    fn current_mu(&self) -> ModelParams {
        ModelParams::new(
            vec![self.tip_mass, self.pole_length, self.qd[0], self.qd[1]],
            self.spec.mu_bounds.clone(),
        )
        .expect("mu dims fixed")
    }

    fn state(&self) -> EnvState {
        EnvState {
            q: self.q.clone(),
            qd: self.qd.clone(),
            extras: vec![self.theta_init],
        }
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        if state.q.len() != 2 || state.qd.len() != 2 || state.extras.len() != 1 {
            return Err(crate::error::Error::DimensionMismatch {
                expected: 2,
                got: state.q.len(),
                context: "cart-pole state",
            });
        }
        self.q.copy_from_slice(&state.q);
        self.qd.copy_from_slice(&state.qd);
        self.theta_init = state.extras[0];
        Ok(())
    }
}
