//! Double inverted pendulum on a cart with an unknown lower-pole COM offset.
//!
//! Plant: cart on a rail, two serial 0.5 m poles pointing up at q = 0. The
//! lower pole's COM sits at `(μ, 0.2 μ)` from its geometric center in the
//! pole frame, which both shifts and de-symmetrizes the balance problem.
//!
//! Reward: `r = -10 (σ₁+σ₂)² - |p_cart| + 10` where σᵢ is each pole's
//! absolute angle from upright wrapped into [0, π].
//! Termination: `|p_cart| ≥ 5` or `σ₁+σ₂ ≥ π/2`.

use super::chain::{rod_inertia, Chain, Link, Vec2};
use super::{
    angle_from_upright, check_finite, clamp_action, Env, EnvConfig, EnvSpec, EnvState, StepResult,
    Task,
};
use crate::types::{Action, ModelParams, MuBounds, Observation};
use crate::{RandomSource, Result};

const K_ANGLE: f64 = 10.0;
const K_CART: f64 = 1.0;
const ALIVE_BONUS: f64 = 10.0;
const CART_LIMIT: f64 = 5.0;
const ANGLE_SUM_LIMIT: f64 = 0.5 * std::f64::consts::PI;

pub struct DoublePendulumEnv {
    spec: EnvSpec,
    config: EnvConfig,
    chain: Chain,
    mu: ModelParams,
    q: Vec<f64>,
    qd: Vec<f64>,
}

impl DoublePendulumEnv {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let c = &config.dpend;
        let bounds = MuBounds::new(&[(c.mu_low, c.mu_high)])?;
        let spec = EnvSpec {
            task: Task::Dpend,
            obs_dim: 6,
            act_dim: 1,
            mu_dim: 1,
            mu_bounds: bounds.clone(),
            action_limit: vec![c.force_limit],
            dt: config.dt,
            max_steps: config.max_steps,
        };
        let mu = bounds.midpoint();
        let chain = Self::build_chain(config, mu.values()[0]);
        Ok(Self {
            spec,
            config: config.clone(),
            chain,
            mu,
            q: vec![0.0; 3],
            qd: vec![0.0; 3],
        })
    }

    fn build_chain(config: &EnvConfig, mu: f64) -> Chain {
        let c = &config.dpend;
        let l = c.pole_length;
        // Lower pole COM: geometric center plus (μ, 0.2μ) in the pole frame
        // (x perpendicular to the pole, z along it; upright at q = 0).
        let lower_com = Vec2::new(mu, 0.5 * l + 0.2 * mu);
        Chain::new(
            vec![
                Link::prismatic_x(Vec2::ZERO, c.cart_mass, 0.0, Vec2::ZERO),
                Link::revolute(Vec2::ZERO, c.pole_mass, rod_inertia(c.pole_mass, l), lower_com),
                Link::revolute(
                    Vec2::new(0.0, l),
                    c.pole_mass,
                    rod_inertia(c.pole_mass, l),
                    Vec2::new(0.0, 0.5 * l),
                ),
            ],
            config.gravity,
        )
    }

    /// Pole deviations from upright: (σ₁, σ₂), each in [0, π].
    fn deviations(&self) -> (f64, f64) {
        let s1 = angle_from_upright(self.q[1]);
        let s2 = angle_from_upright(self.q[1] + self.q[2]);
        (s1, s2)
    }

    fn reward(&self, _action: &[f64]) -> f64 {
        let (s1, s2) = self.deviations();
        let sum = s1 + s2;
        -K_ANGLE * sum * sum - K_CART * self.q[0].abs() + ALIVE_BONUS
    }

    fn terminated(&self) -> bool {
        let (s1, s2) = self.deviations();
        self.q[0].abs() >= CART_LIMIT || s1 + s2 >= ANGLE_SUM_LIMIT
    }

    /// The assembled plant, exposed for the physics oracles.
    pub fn dynamics(&self) -> &Chain {
        &self.chain
    }
}

impl Env for DoublePendulumEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, mu: &ModelParams, rng: &mut RandomSource) -> Result<Observation> {
        self.mu = ModelParams::new(mu.values().to_vec(), self.spec.mu_bounds.clone())?;
        self.chain = Self::build_chain(&self.config, self.mu.values()[0]);
        let noise = self.config.dpend.reset_noise;
        for v in self.q.iter_mut() {
            *v = rng.uniform(-noise, noise);
        }
        for v in self.qd.iter_mut() {
            *v = rng.uniform(-noise, noise);
        }
        Ok(self.observe())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        check_finite(&self.q, "double pendulum state")?;
        check_finite(action.as_slice(), "double pendulum action")?;
        let force = clamp_action(action.as_slice(), &self.spec.action_limit);
        let tau = [force[0], 0.0, 0.0];
        self.chain
            .step_semi_implicit(&mut self.q, &mut self.qd, &tau, &[], self.spec.dt);
        Ok(StepResult {
            observation: self.observe(),
            reward: self.reward(&force),
            terminated: self.terminated(),
        })
    }

    fn observe(&self) -> Observation {
        Observation(vec![
            self.q[0], self.q[1], self.q[2], self.qd[0], self.qd[1], self.qd[2],
        ])
    }

    fn current_mu(&self) -> ModelParams {
        self.mu.clone()
    }

    fn state(&self) -> EnvState {
        EnvState {
            q: self.q.clone(),
            qd: self.qd.clone(),
            extras: vec![],
        }
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        if state.q.len() != 3 || state.qd.len() != 3 {
            return Err(crate::error::Error::DimensionMismatch {
                expected: 3,
                got: state.q.len(),
                context: "double pendulum state",
            });
        }
        self.q.copy_from_slice(&state.q);
        self.qd.copy_from_slice(&state.qd);
        Ok(())
    }
}
