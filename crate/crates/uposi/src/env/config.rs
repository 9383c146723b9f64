//! Environment configuration.
//!
//! Reward weights and termination thresholds are fixed constants of the
//! benchmarks and live in the environment sources; everything chosen by this
//! implementation (masses, geometry, contact constants, μ ranges, actuator
//! limits) is overridable here. The CLI reads these from the `[env]` section
//! of a TOML config file.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Simulation timestep in seconds.
    pub dt: f64,
    /// Rollout horizon in steps.
    pub max_steps: usize,
    pub gravity: f64,
    pub dpend: DpendConfig,
    pub arm: ArmConfig,
    pub hopper: HopperConfig,
    pub cartpole: CartPoleConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.002,
            max_steps: 1000,
            gravity: 9.81,
            dpend: DpendConfig::default(),
            arm: ArmConfig::default(),
            hopper: HopperConfig::default(),
            cartpole: CartPoleConfig::default(),
        }
    }
}

/// Double inverted pendulum on a cart; μ is the lower-pole COM offset scalar,
/// applied as (μ, 0.2 μ) in the pole frame from its geometric center.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DpendConfig {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub force_limit: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    /// Reset draws every q and q̇ component from U(-noise, noise).
    pub reset_noise: f64,
}

impl Default for DpendConfig {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.5,
            pole_length: 0.5,
            force_limit: 40.0,
            mu_low: -0.6,
            mu_high: 0.6,
            reset_noise: 0.01,
        }
    }
}

/// Two-link planar arm throwing a block; μ is the block mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmConfig {
    pub link_mass: f64,
    pub link_length: f64,
    /// Shoulder height above the ground plane.
    pub base_height: f64,
    pub torque_limit: f64,
    pub mass_low: f64,
    pub mass_high: f64,
    pub reset_noise: f64,
    /// Steps the block stays rigidly attached before release can trigger.
    pub attach_min_steps: usize,
    /// "velocity": release when the end effector moves upward and the
    /// commanded torque norm is decreasing. "timed": release at a fixed step.
    pub release_mode: ReleaseMode,
    pub timed_release_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseMode {
    Velocity,
    Timed,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            link_mass: 1.0,
            link_length: 0.5,
            base_height: 1.0,
            torque_limit: 30.0,
            mass_low: 0.1,
            mass_high: 1.0,
            reset_noise: 0.01,
            attach_min_steps: 100,
            release_mode: ReleaseMode::Velocity,
            timed_release_step: 150,
        }
    }
}

/// Planar 4-link hopper; μ is the ground friction coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HopperConfig {
    pub torso_mass: f64,
    pub thigh_mass: f64,
    pub shank_mass: f64,
    pub foot_mass: f64,
    pub torso_length: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    /// Sole extent behind / ahead of the ankle.
    pub foot_heel: f64,
    pub foot_toe: f64,
    /// Sole depth below the ankle.
    pub sole_drop: f64,
    /// Contact spring, normal damper, tangential damper.
    pub contact_kn: f64,
    pub contact_dn: f64,
    pub contact_kt: f64,
    /// Integrator substeps per control step; the stiff contact spring against
    /// the light foot needs a finer step than the 0.002 s control interval.
    pub substeps: usize,
    pub mu_low: f64,
    pub mu_high: f64,
    /// Hip, knee, ankle torque limits.
    pub torque_limits: [f64; 3],
    /// Soft joint ranges enforced by a spring-damper beyond the limit.
    pub joint_low: [f64; 3],
    pub joint_high: [f64; 3],
    pub joint_limit_stiffness: f64,
    pub joint_limit_damping: f64,
    pub reset_noise: f64,
    /// Fall when torso height < frac × standing height or |pitch| > limit.
    pub fall_height_frac: f64,
    pub fall_pitch: f64,
    /// Optional varying-friction track: friction is `mu_inside` for contact
    /// x in [region_lo, region_hi] and the episode μ elsewhere.
    pub track: Option<FrictionTrack>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrictionTrack {
    pub region_lo: f64,
    pub region_hi: f64,
    pub mu_inside: f64,
}

impl Default for HopperConfig {
    fn default() -> Self {
        Self {
            torso_mass: 3.5,
            thigh_mass: 1.5,
            shank_mass: 1.0,
            foot_mass: 0.5,
            torso_length: 0.4,
            thigh_length: 0.45,
            shank_length: 0.5,
            foot_heel: 0.13,
            foot_toe: 0.26,
            sole_drop: 0.06,
            contact_kn: 2.0e5,
            contact_dn: 2.0e3,
            contact_kt: 2.0e3,
            substeps: 4,
            mu_low: 0.3,
            mu_high: 1.0,
            torque_limits: [90.0, 90.0, 50.0],
            joint_low: [-1.3, -2.4, -0.7],
            joint_high: [1.3, 0.02, 0.7],
            joint_limit_stiffness: 200.0,
            joint_limit_damping: 1.0,
            reset_noise: 0.005,
            fall_height_frac: 0.8,
            fall_pitch: 1.0,
            track: None,
        }
    }
}

/// Cart-pole swing-up; μ is (tip mass, pole length) and, for identification
/// purposes, the two velocities — the observation carries positions only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CartPoleConfig {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub force_limit: f64,
    pub mass_low: f64,
    pub mass_high: f64,
    pub length_low: f64,
    pub length_high: f64,
    /// Velocity components of μ are normalized against these scales.
    pub cart_vel_scale: f64,
    pub pole_vel_scale: f64,
    /// Std of the N(0, σ) noise added to the ±π initial pole angle.
    pub init_angle_noise: f64,
    pub cart_limit: f64,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.5,
            force_limit: 40.0,
            mass_low: 0.1,
            mass_high: 1.0,
            length_low: 0.2,
            length_high: 0.8,
            cart_vel_scale: 5.0,
            pole_vel_scale: 10.0,
            init_angle_noise: 0.005,
            cart_limit: 2.0,
        }
    }
}
