//! Two-link planar arm throwing a block of unknown mass.
//!
//! The arm starts pointing straight down with the block held at the end
//! effector; the shoulder sits 1 m up, so full reach tops out exactly at the
//! 2 m target height. The block is rigidly attached (its mass folded into the
//! distal link) until the release rule fires, then it flies ballistically.
//!
//! Reward: `r = -10·r_h - 1e-5‖u‖² - 1e-3‖q̇‖² + 35`, where
//! `r_h = h_target − h_block` below the target and 0 above it.
//! Termination: block below −0.2 m or more than 0.8 m away horizontally.
//!
//! State extras layout: `[block_x, block_z, block_vx, block_vz, attached,
//! prev_torque_norm, step_count, max_block_height]`.

use super::chain::{rod_inertia, Chain, Link, Vec2};
use super::config::ReleaseMode;
use super::{check_finite, clamp_action, Env, EnvConfig, EnvSpec, EnvState, StepResult, Task};
use crate::types::{Action, ModelParams, MuBounds, Observation};
use crate::{RandomSource, Result};

const K_HEIGHT: f64 = 10.0;
const K_EFFORT: f64 = 1e-5;
const K_SPEED: f64 = 1e-3;
const ALIVE_BONUS: f64 = 35.0;
const H_TARGET: f64 = 2.0;
const FLOOR_LIMIT: f64 = -0.2;
const HORIZONTAL_LIMIT: f64 = 0.8;

pub struct ArmEnv {
    spec: EnvSpec,
    config: EnvConfig,
    /// Plant with the block mass folded into the distal link.
    chain_attached: Chain,
    /// Plant after release.
    chain_free: Chain,
    mu: ModelParams,
    q: Vec<f64>,
    qd: Vec<f64>,
    block_pos: Vec2,
    block_vel: Vec2,
    attached: bool,
    prev_torque_norm: f64,
    step_count: usize,
    max_block_height: f64,
}

impl ArmEnv {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let c = &config.arm;
        let bounds = MuBounds::new(&[(c.mass_low, c.mass_high)])?;
        let spec = EnvSpec {
            task: Task::Arm,
            obs_dim: 6,
            act_dim: 2,
            mu_dim: 1,
            mu_bounds: bounds.clone(),
            action_limit: vec![c.torque_limit; 2],
            dt: config.dt,
            max_steps: config.max_steps,
        };
        let mu = bounds.midpoint();
        let chain_attached = Self::build_chain(config, mu.values()[0]);
        let chain_free = Self::build_chain(config, 0.0);
        let ee = Self::ee_pos_static(config);
        Ok(Self {
            spec,
            config: config.clone(),
            chain_attached,
            chain_free,
            mu,
            q: vec![0.0, 0.0],
            qd: vec![0.0, 0.0],
            block_pos: ee,
            block_vel: Vec2::ZERO,
            attached: true,
            prev_torque_norm: 0.0,
            step_count: 0,
            max_block_height: ee.z,
        })
    }

    /// Links extend along -z of their frame; q = 0 points straight down.
    fn build_chain(config: &EnvConfig, block_mass: f64) -> Chain {
        let c = &config.arm;
        let l = c.link_length;
        let m = c.link_mass;
        let distal = if block_mass > 0.0 {
            // Fold the held block (point mass at the end effector) into the
            // distal link via the parallel-axis theorem.
            let total = m + block_mass;
            let com_z = (m * (-0.5 * l) + block_mass * (-l)) / total;
            let inertia = rod_inertia(m, l)
                + m * (com_z + 0.5 * l).powi(2)
                + block_mass * (com_z + l).powi(2);
            Link::revolute(Vec2::new(0.0, -l), total, inertia, Vec2::new(0.0, com_z))
        } else {
            Link::revolute(
                Vec2::new(0.0, -l),
                m,
                rod_inertia(m, l),
                Vec2::new(0.0, -0.5 * l),
            )
        };
        Chain::new(
            vec![
                Link::revolute(
                    Vec2::new(0.0, c.base_height),
                    m,
                    rod_inertia(m, l),
                    Vec2::new(0.0, -0.5 * l),
                ),
                distal,
            ],
            config.gravity,
        )
    }

    fn ee_pos_static(config: &EnvConfig) -> Vec2 {
        Vec2::new(0.0, config.arm.base_height - 2.0 * config.arm.link_length)
    }

    fn chain(&self) -> &Chain {
        if self.attached {
            &self.chain_attached
        } else {
            &self.chain_free
        }
    }

    fn ee_local(&self) -> Vec2 {
        Vec2::new(0.0, -self.config.arm.link_length)
    }

    fn ee_pos(&self) -> Vec2 {
        self.chain().point_world(&self.q, 1, self.ee_local())
    }

    fn ee_vel(&self) -> Vec2 {
        self.chain()
            .point_velocity(&self.q, &self.qd, 1, self.ee_local())
    }

    fn reward(&self, torque: &[f64]) -> f64 {
        let h = self.block_pos.z;
        let r_h = if h <= H_TARGET { H_TARGET - h } else { 0.0 };
        let effort: f64 = torque.iter().map(|u| u * u).sum();
        let speed: f64 = self.qd.iter().map(|v| v * v).sum();
        -K_HEIGHT * r_h - K_EFFORT * effort - K_SPEED * speed + ALIVE_BONUS
    }

    fn terminated(&self) -> bool {
        self.block_pos.z < FLOOR_LIMIT || self.block_pos.x.abs() > HORIZONTAL_LIMIT
    }

    fn release_triggered(&self, torque_norm: f64) -> bool {
        match self.config.arm.release_mode {
            ReleaseMode::Velocity => {
                self.step_count >= self.config.arm.attach_min_steps
                    && self.ee_vel().z > 0.0
                    && torque_norm < self.prev_torque_norm
            }
            ReleaseMode::Timed => self.step_count >= self.config.arm.timed_release_step,
        }
    }

    pub fn dynamics(&self) -> &Chain {
        self.chain()
    }

    pub fn block_attached(&self) -> bool {
        self.attached
    }
}

impl Env for ArmEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, mu: &ModelParams, rng: &mut RandomSource) -> Result<Observation> {
        self.mu = ModelParams::new(mu.values().to_vec(), self.spec.mu_bounds.clone())?;
        self.chain_attached = Self::build_chain(&self.config, self.mu.values()[0]);
        let noise = self.config.arm.reset_noise;
        for v in self.q.iter_mut() {
            *v = rng.uniform(-noise, noise);
        }
        for v in self.qd.iter_mut() {
            *v = rng.uniform(-noise, noise);
        }
        self.attached = true;
        self.block_pos = self.ee_pos();
        self.block_vel = self.ee_vel();
        self.prev_torque_norm = 0.0;
        self.step_count = 0;
        self.max_block_height = self.block_pos.z;
        Ok(self.observe())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        check_finite(&self.q, "arm state")?;
        check_finite(action.as_slice(), "arm action")?;
        let torque = clamp_action(action.as_slice(), &self.spec.action_limit);
        let torque_norm = torque.iter().map(|u| u * u).sum::<f64>().sqrt();

        if self.attached && self.release_triggered(torque_norm) {
            // The block leaves with the end effector's instantaneous motion.
            self.block_pos = self.ee_pos();
            self.block_vel = self.ee_vel();
            self.attached = false;
        }

        let chain = if self.attached {
            &self.chain_attached
        } else {
            &self.chain_free
        };
        chain.step_semi_implicit(&mut self.q, &mut self.qd, &torque, &[], self.spec.dt);

        if self.attached {
            self.block_pos = self.chain_attached.point_world(&self.q, 1, self.ee_local());
            self.block_vel = self
                .chain_attached
                .point_velocity(&self.q, &self.qd, 1, self.ee_local());
        } else {
            // Ballistic flight: constant-gravity motion has an exact update,
            // so the samples lie on the true parabola.
            let dt = self.spec.dt;
            self.block_pos.x += self.block_vel.x * dt;
            self.block_pos.z += self.block_vel.z * dt - 0.5 * self.config.gravity * dt * dt;
            self.block_vel.z -= self.config.gravity * dt;
        }

        self.prev_torque_norm = torque_norm;
        self.step_count += 1;
        self.max_block_height = self.max_block_height.max(self.block_pos.z);

        Ok(StepResult {
            observation: self.observe(),
            reward: self.reward(&torque),
            terminated: self.terminated(),
        })
    }

    fn observe(&self) -> Observation {
        Observation(vec![
            self.q[0],
            self.q[1],
            self.qd[0],
            self.qd[1],
            self.block_pos.x,
            self.block_pos.z,
        ])
    }

    fn current_mu(&self) -> ModelParams {
        self.mu.clone()
    }

    fn state(&self) -> EnvState {
        EnvState {
            q: self.q.clone(),
            qd: self.qd.clone(),
            extras: vec![
                self.block_pos.x,
                self.block_pos.z,
                self.block_vel.x,
                self.block_vel.z,
                if self.attached { 1.0 } else { 0.0 },
                self.prev_torque_norm,
                self.step_count as f64,
                self.max_block_height,
            ],
        }
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        if state.q.len() != 2 || state.qd.len() != 2 || state.extras.len() != 8 {
            return Err(crate::error::Error::DimensionMismatch {
                expected: 8,
                got: state.extras.len(),
                context: "arm state extras",
            });
        }
        self.q.copy_from_slice(&state.q);
        self.qd.copy_from_slice(&state.qd);
        self.block_pos = Vec2::new(state.extras[0], state.extras[1]);
        self.block_vel = Vec2::new(state.extras[2], state.extras[3]);
        self.attached = state.extras[4] != 0.0;
        self.prev_torque_norm = state.extras[5];
        self.step_count = state.extras[6] as usize;
        self.max_block_height = state.extras[7];
        Ok(())
    }

    fn metric(&self) -> Option<f64> {
        Some(self.max_block_height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env() -> ArmEnv {
        ArmEnv::new(&EnvConfig::default()).unwrap()
    }

    fn mu(v: f64) -> ModelParams {
        ModelParams::new(vec![v], MuBounds::new(&[(0.1, 1.0)]).unwrap()).unwrap()
    }

    #[test]
    fn block_at_target_with_zero_effort_scores_alive_bonus() {
        let mut e = env();
        e.reset(&mu(0.5), &mut RandomSource::new(0)).unwrap();
        let mut s = e.state();
        s.extras[1] = H_TARGET; // block exactly at 2 m
        s.qd = vec![0.0, 0.0];
        e.set_state(&s).unwrap();
        // r_h = 0, no effort, no joint speed.
        assert_abs_diff_eq!(e.reward(&[0.0, 0.0]), 35.0, epsilon = 1e-12);
    }

    #[test]
    fn block_one_meter_low_scores_twenty_five() {
        let mut e = env();
        e.reset(&mu(0.5), &mut RandomSource::new(0)).unwrap();
        let mut s = e.state();
        s.extras[1] = 1.0;
        s.qd = vec![0.0, 0.0];
        e.set_state(&s).unwrap();
        assert_abs_diff_eq!(e.reward(&[0.0, 0.0]), 25.0, epsilon = 1e-12);
    }

    #[test]
    fn above_target_is_not_penalized() {
        let mut e = env();
        e.reset(&mu(0.5), &mut RandomSource::new(0)).unwrap();
        let mut s = e.state();
        s.extras[1] = 2.8;
        s.qd = vec![0.0, 0.0];
        e.set_state(&s).unwrap();
        assert_abs_diff_eq!(e.reward(&[0.0, 0.0]), 35.0, epsilon = 1e-12);
    }

    #[test]
    fn starts_attached_pointing_down() {
        let mut e = env();
        e.reset(&mu(0.7), &mut RandomSource::new(4)).unwrap();
        assert!(e.block_attached());
        // EE near (0, 0): shoulder at 1 m minus two 0.5 m links.
        let s = e.state();
        assert!(s.extras[0].abs() < 0.02);
        assert!(s.extras[1].abs() < 0.02);
        assert!(!e.terminated(), "fresh episode must not be terminal");
    }

    #[test]
    fn termination_thresholds() {
        let mut e = env();
        e.reset(&mu(0.5), &mut RandomSource::new(0)).unwrap();
        let mut s = e.state();
        s.extras[1] = -0.21;
        e.set_state(&s).unwrap();
        assert!(e.terminated());
        let mut s = e.state();
        s.extras[1] = 0.5;
        s.extras[0] = 0.81;
        e.set_state(&s).unwrap();
        assert!(e.terminated());
        s.extras[0] = 0.79;
        e.set_state(&s).unwrap();
        assert!(!e.terminated());
    }

    #[test]
    fn ballistic_apex_matches_projectile_closed_form() {
        let mut e = env();
        e.reset(&mu(0.5), &mut RandomSource::new(0)).unwrap();
        // Hand-release the block upward from 0.5 m at 4 m/s.
        let mut s = e.state();
        s.extras[0] = 0.0;
        s.extras[1] = 0.5;
        s.extras[2] = 0.0;
        s.extras[3] = 4.0;
        s.extras[4] = 0.0; // detached
        e.set_state(&s).unwrap();
        let mut apex: f64 = 0.0;
        for _ in 0..800 {
            let r = e.step(&Action(vec![0.0, 0.0])).unwrap();
            apex = apex.max(e.state().extras[1]);
            if r.terminated {
                break;
            }
        }
        let expected = 0.5 + 4.0_f64.powi(2) / (2.0 * 9.81);
        assert!(
            (apex - expected).abs() <= 1e-3,
            "apex {apex} vs closed form {expected}"
        );
    }

    #[test]
    fn attached_block_rides_the_end_effector() {
        let mut e = env();
        e.reset(&mu(0.9), &mut RandomSource::new(1)).unwrap();
        for _ in 0..50 {
            e.step(&Action(vec![10.0, -5.0])).unwrap();
        }
        assert!(e.block_attached());
        let ee = e.ee_pos();
        let s = e.state();
        assert_abs_diff_eq!(s.extras[0], ee.x, epsilon = 1e-12);
        assert_abs_diff_eq!(s.extras[1], ee.z, epsilon = 1e-12);
    }

    #[test]
    fn timed_release_detaches_exactly_once() {
        let mut cfg = EnvConfig::default();
        cfg.arm.release_mode = ReleaseMode::Timed;
        cfg.arm.timed_release_step = 20;
        let mut e = ArmEnv::new(&cfg).unwrap();
        e.reset(&mu(0.4), &mut RandomSource::new(2)).unwrap();
        for k in 0..40 {
            e.step(&Action(vec![5.0, 5.0])).unwrap();
            let attached = e.block_attached();
            if k < 20 {
                assert!(attached, "released too early at step {k}");
            }
            if k >= 21 {
                assert!(!attached, "still attached at step {k}");
            }
        }
    }

    #[test]
    fn heavier_block_slows_the_same_swing() {
        // Same torque program, different block mass: the arm must end up in
        // measurably different configurations (the OSI signal).
        let mut light = env();
        let mut heavy = env();
        light.reset(&mu(0.1), &mut RandomSource::new(3)).unwrap();
        heavy.reset(&mu(1.0), &mut RandomSource::new(3)).unwrap();
        let zero = EnvState {
            q: vec![0.0, 0.0],
            qd: vec![0.0, 0.0],
            extras: light.state().extras.clone(),
        };
        light.set_state(&zero).unwrap();
        heavy.set_state(&zero).unwrap();
        for _ in 0..100 {
            light.step(&Action(vec![15.0, 0.0])).unwrap();
            heavy.step(&Action(vec![15.0, 0.0])).unwrap();
        }
        let dq = (light.state().q[0] - heavy.state().q[0]).abs();
        assert!(dq > 0.05, "mass had no effect on the swing (Δq = {dq})");
    }
}
