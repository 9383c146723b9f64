//! Parameterized control benchmarks with analytic dynamics.
//!
//! Four plants share the x-z planar chain machinery and a semi-implicit Euler
//! integrator at a 0.002 s timestep: a double inverted pendulum on a cart
//! with an offset lower-pole COM, a two-link throwing arm with an unknown
//! block mass, a planar hopper on spring-damper ground contact with Coulomb
//! friction, and a cart-pole swing-up with unknown tip mass and pole length.

pub mod chain;
pub mod config;

mod arm;
mod cartpole;
mod dpend;
mod hopper;

pub use arm::ArmEnv;
pub use cartpole::{upright_reward as cartpole_upright_reward, CartPoleEnv};
pub use config::EnvConfig;
pub use dpend::DoublePendulumEnv;
pub use hopper::HopperEnv;

use crate::error::Error;
use crate::types::{Action, ModelParams, MuBounds, Observation};
use crate::{RandomSource, Result};
use serde::{Deserialize, Serialize};

/// The four benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Dpend,
    Arm,
    Hopper,
    Cartpole,
}

impl Task {
    pub fn parse(name: &str) -> Result<Task> {
        match name {
            "dpend" => Ok(Task::Dpend),
            "arm" => Ok(Task::Arm),
            "hopper" => Ok(Task::Hopper),
            "cartpole" => Ok(Task::Cartpole),
            other => Err(Error::UnknownTask(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::Dpend => "dpend",
            Task::Arm => "arm",
            Task::Hopper => "hopper",
            Task::Cartpole => "cartpole",
        }
    }

    pub fn all() -> [Task; 4] {
        [Task::Dpend, Task::Arm, Task::Hopper, Task::Cartpole]
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Static facts about an environment instance.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub task: Task,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub mu_dim: usize,
    pub mu_bounds: MuBounds,
    /// Symmetric physical action bound per component (N or N·m).
    pub action_limit: Vec<f64>,
    pub dt: f64,
    pub max_steps: usize,
}

/// Full simulator state: generalized coordinates plus env-specific extras
/// (documented per environment). `set_state(state())` restores a bit-exact
/// snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub extras: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
}

/// Normal/tangential force and the friction coefficient in effect at one
/// contact point during the last step.
#[derive(Debug, Clone, Copy)]
pub struct ContactForce {
    pub normal: f64,
    pub tangential: f64,
    pub friction: f64,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode under ground-truth parameters `mu`.
    fn reset(&mut self, mu: &ModelParams, rng: &mut RandomSource) -> Result<Observation>;

    /// Advance one timestep. `action` is in physical units and is clamped to
    /// the declared bounds before it is applied.
    fn step(&mut self, action: &Action) -> Result<StepResult>;

    fn observe(&self) -> Observation;

    /// Ground-truth μ at this instant. Constant over an episode except where
    /// a component is live state (cart-pole velocities, track friction).
    fn current_mu(&self) -> ModelParams;

    fn state(&self) -> EnvState;

    fn set_state(&mut self, state: &EnvState) -> Result<()>;

    /// Instantaneous task metric where one exists (hopper: forward position;
    /// arm: block height).
    fn metric(&self) -> Option<f64> {
        None
    }

    /// Contact forces applied during the last step (hopper only).
    fn contact_forces(&self) -> &[ContactForce] {
        &[]
    }
}

/// Build an environment for `task` from `config`.
pub fn make_env(task: Task, config: &EnvConfig) -> Result<Box<dyn Env>> {
    Ok(match task {
        Task::Dpend => Box::new(DoublePendulumEnv::new(config)?),
        Task::Arm => Box::new(ArmEnv::new(config)?),
        Task::Hopper => Box::new(HopperEnv::new(config)?),
        Task::Cartpole => Box::new(CartPoleEnv::new(config)?),
    })
}

/// Clamp a physical action to the per-component symmetric limits.
pub fn clamp_action(raw: &[f64], limits: &[f64]) -> Vec<f64> {
    raw.iter()
        .zip(limits)
        .map(|(&a, &l)| a.clamp(-l, l))
        .collect()
}

/// Map a normalized action in [-1, 1] to physical units (clamping first).
pub fn scale_action(normalized: &[f64], limits: &[f64]) -> Action {
    Action(
        normalized
            .iter()
            .zip(limits)
            .map(|(&a, &l)| a.clamp(-1.0, 1.0) * l)
            .collect(),
    )
}

/// Wrap an angle to (-π, π].
pub(crate) fn wrap_to_pi(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t > std::f64::consts::PI {
        t -= two_pi;
    } else if t <= -std::f64::consts::PI {
        t += two_pi;
    }
    t
}

/// Absolute angular deviation wrapped into [0, π].
pub(crate) fn angle_from_upright(theta: f64) -> f64 {
    wrap_to_pi(theta).abs()
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn wrap_covers_the_circle() {
        assert_abs_diff_eq!(wrap_to_pi(0.0), 0.0);
        assert_abs_diff_eq!(wrap_to_pi(PI), PI);
        assert_abs_diff_eq!(wrap_to_pi(-PI), PI);
        assert_abs_diff_eq!(wrap_to_pi(2.5 * PI), 0.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_to_pi(-2.5 * PI), -0.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_from_upright(7.0 * PI), PI, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_from_upright(-0.3), 0.3);
    }

    #[test]
    fn action_clamp_and_scale() {
        assert_eq!(clamp_action(&[100.0, -0.5], &[40.0, 1.0]), vec![40.0, -0.5]);
        let a = scale_action(&[2.0, -0.25], &[40.0, 8.0]);
        assert_eq!(a.as_slice(), &[40.0, -2.0]);
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::all() {
            assert_eq!(Task::parse(t.name()).unwrap(), t);
        }
        assert!(Task::parse("walker").is_err());
    }
}
