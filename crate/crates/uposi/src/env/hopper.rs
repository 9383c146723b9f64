//! Planar one-legged hopper with unknown ground friction.
//!
//! Four links (torso, thigh, shank, foot) on a 3-dof floating base. Ground
//! contact acts at the heel and toe of the foot sole: a spring-damper normal
//! force `f_n = max(0, k_n·δ − d_n·ż)` while penetrating, and a tangential
//! viscous force clamped to the Coulomb cone `|f_t| ≤ μ·f_n`. The friction
//! coefficient is the unknown model parameter and can vary along the track.
//!
//! Reward: `r = ẋ − 0.002‖u‖² + 3.0`. Termination: torso drops below 80% of
//! standing height or pitches past 1 rad. The observation omits forward
//! position.
//!
//! Generalized coordinates: `[x, z, pitch, hip, knee, ankle]` with the base
//! at the torso center; zero joint angles give a straight leg with the foot
//! flat. No state extras.

use super::chain::{rod_inertia, Chain, ExternalForce, JointKind, Link, Vec2};
use super::{
    check_finite, clamp_action, ContactForce, Env, EnvConfig, EnvSpec, EnvState, StepResult, Task,
};
use crate::types::{Action, ModelParams, MuBounds, Observation};
use crate::{RandomSource, Result};

const K_FORWARD: f64 = 1.0;
const K_EFFORT: f64 = 0.002;
const ALIVE_BONUS: f64 = 3.0;

const FOOT_LINK: usize = 5;
const N_JOINTS: usize = 3;

pub struct HopperEnv {
    spec: EnvSpec,
    config: EnvConfig,
    chain: Chain,
    mu: ModelParams,
    q: Vec<f64>,
    qd: Vec<f64>,
    standing_height: f64,
    last_contacts: Vec<ContactForce>,
}

impl HopperEnv {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let c = &config.hopper;
        let bounds = MuBounds::new(&[(c.mu_low, c.mu_high)])?;
        let spec = EnvSpec {
            task: Task::Hopper,
            obs_dim: 11,
            act_dim: N_JOINTS,
            mu_dim: 1,
            mu_bounds: bounds.clone(),
            action_limit: c.torque_limits.to_vec(),
            dt: config.dt,
            max_steps: config.max_steps,
        };
        let standing_height =
            c.sole_drop + c.shank_length + c.thigh_length + 0.5 * c.torso_length;
        let chain = Self::build_chain(config);
        let mut env = Self {
            spec,
            config: config.clone(),
            chain,
            mu: bounds.midpoint(),
            q: vec![0.0; 6],
            qd: vec![0.0; 6],
            standing_height,
            last_contacts: Vec::with_capacity(2),
        };
        env.q[1] = standing_height + 0.001;
        Ok(env)
    }

    fn build_chain(config: &EnvConfig) -> Chain {
        let c = &config.hopper;
        let sole_mid_x = 0.5 * (c.foot_toe - c.foot_heel);
        Chain::new(
            vec![
                Link::massless(JointKind::PrismaticX),
                Link::massless(JointKind::PrismaticZ),
                Link::revolute(
                    Vec2::ZERO,
                    c.torso_mass,
                    rod_inertia(c.torso_mass, c.torso_length),
                    Vec2::ZERO,
                ),
                Link::revolute(
                    Vec2::new(0.0, -0.5 * c.torso_length),
                    c.thigh_mass,
                    rod_inertia(c.thigh_mass, c.thigh_length),
                    Vec2::new(0.0, -0.5 * c.thigh_length),
                ),
                Link::revolute(
                    Vec2::new(0.0, -c.thigh_length),
                    c.shank_mass,
                    rod_inertia(c.shank_mass, c.shank_length),
                    Vec2::new(0.0, -0.5 * c.shank_length),
                ),
                Link::revolute(
                    Vec2::new(0.0, -c.shank_length),
                    c.foot_mass,
                    rod_inertia(c.foot_mass, c.foot_heel + c.foot_toe),
                    Vec2::new(sole_mid_x, -c.sole_drop),
                ),
            ],
            config.gravity,
        )
    }

    fn sole_points(&self) -> [Vec2; 2] {
        let c = &self.config.hopper;
        [
            Vec2::new(-c.foot_heel, -c.sole_drop),
            Vec2::new(c.foot_toe, -c.sole_drop),
        ]
    }

    /// Ground-collidable points: the foot sole plus the link endpoints, so a
    /// fallen robot comes to rest instead of passing through the plane. Only
    /// the sole ever touches during nominal hopping.
    fn collision_points(&self) -> [(usize, Vec2); 6] {
        let c = &self.config.hopper;
        let [heel, toe] = self.sole_points();
        [
            (FOOT_LINK, heel),
            (FOOT_LINK, toe),
            (FOOT_LINK, Vec2::ZERO),                          // ankle
            (4, Vec2::ZERO),                                  // knee
            (2, Vec2::new(0.0, -0.5 * c.torso_length)),       // hip
            (2, Vec2::new(0.0, 0.5 * c.torso_length)),        // torso top
        ]
    }

    /// Friction coefficient in effect at world coordinate `x`.
    fn friction_at(&self, x: f64) -> f64 {
        match &self.config.hopper.track {
            Some(t) if x >= t.region_lo && x <= t.region_hi => t.mu_inside,
            _ => self.mu.values()[0],
        }
    }

    /// Contact forces from the current state, recorded into `last_contacts`.
    ///
    /// The viscous coefficients are capped by the apparent mass at the
    /// contact point so the damping impulse over one explicit step can never
    /// exceed the momentum it damps; without the cap the configured d_n is
    /// unstable against the bare foot at touchdown.
    fn contact_forces_now(&mut self, mass: &[Vec<f64>], dt: f64) -> Vec<ExternalForce> {
        let c = &self.config.hopper;
        let mut out = Vec::with_capacity(2);
        for (link, local) in self.collision_points() {
            let p = self.chain.point_world(&self.q, link, local);
            if p.z < 0.0 {
                let v = self.chain.point_velocity(&self.q, &self.qd, link, local);
                let [jx, jz] = self.chain.point_jacobian(&self.q, link, local);
                let m_app_z = self.chain.apparent_mass(mass, &jz);
                let m_app_x = self.chain.apparent_mass(mass, &jx);
                let d_n = c.contact_dn.min(0.5 * m_app_z / dt);
                let k_t = c.contact_kt.min(0.5 * m_app_x / dt);

                let depth = -p.z;
                let f_n = (c.contact_kn * depth - d_n * v.z).max(0.0);
                let mu = self.friction_at(p.x);
                let f_t = (-k_t * v.x).clamp(-mu * f_n, mu * f_n);
                self.last_contacts.push(ContactForce {
                    normal: f_n,
                    tangential: f_t,
                    friction: mu,
                });
                out.push(ExternalForce {
                    link,
                    point: p,
                    force: Vec2::new(f_t, f_n),
                });
            }
        }
        out
    }

    /// Spring-damper torque pushing a joint back inside its soft range.
    fn joint_limit_torque(&self, joint: usize) -> f64 {
        let c = &self.config.hopper;
        let q = self.q[3 + joint];
        let qd = self.qd[3 + joint];
        let (lo, hi) = (c.joint_low[joint], c.joint_high[joint]);
        if q > hi {
            -c.joint_limit_stiffness * (q - hi) - c.joint_limit_damping * qd
        } else if q < lo {
            -c.joint_limit_stiffness * (q - lo) - c.joint_limit_damping * qd
        } else {
            0.0
        }
    }

    fn terminated(&self) -> bool {
        let c = &self.config.hopper;
        self.q[1] < c.fall_height_frac * self.standing_height || self.q[2].abs() > c.fall_pitch
    }

    pub fn standing_height(&self) -> f64 {
        self.standing_height
    }

    pub fn dynamics(&self) -> &Chain {
        &self.chain
    }

    /// World x of the sole midpoint (where the ground-truth friction is read).
    pub fn foot_x(&self) -> f64 {
        let c = &self.config.hopper;
        let mid = Vec2::new(0.5 * (c.foot_toe - c.foot_heel), -c.sole_drop);
        self.chain.point_world(&self.q, FOOT_LINK, mid).x
    }
}

impl Env for HopperEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, mu: &ModelParams, rng: &mut RandomSource) -> Result<Observation> {
        self.mu = ModelParams::new(mu.values().to_vec(), self.spec.mu_bounds.clone())?;
        let noise = self.config.hopper.reset_noise;
        for v in self.q.iter_mut() {
            *v = rng.uniform(-noise, noise);
        }
        for v in self.qd.iter_mut() {
            *v = rng.uniform(-noise, noise);
        }
        self.q[1] += self.standing_height;
        // Shift the base so the lowest sole point starts 1 mm above ground.
        let min_z = self
            .sole_points()
            .iter()
            .map(|&l| self.chain.point_world(&self.q, FOOT_LINK, l).z)
            .fold(f64::INFINITY, f64::min);
        self.q[1] += 0.001 - min_z.min(0.001);
        self.last_contacts.clear();
        Ok(self.observe())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        check_finite(&self.q, "hopper state")?;
        check_finite(action.as_slice(), "hopper action")?;
        let torque = clamp_action(action.as_slice(), &self.spec.action_limit);
        let substeps = self.config.hopper.substeps.max(1);
        let dt = self.spec.dt / substeps as f64;
        self.last_contacts.clear();
        for _ in 0..substeps {
            let mass = self.chain.mass_matrix(&self.q);
            let ext = self.contact_forces_now(&mass, dt);
            let mut tau = vec![0.0; 6];
            for j in 0..N_JOINTS {
                tau[3 + j] = torque[j] + self.joint_limit_torque(j);
            }
            let qdd = self
                .chain
                .forward_dynamics_with_mass(mass, &self.q, &self.qd, &tau, &ext);
            for i in 0..6 {
                self.qd[i] += qdd[i] * dt;
                self.q[i] += self.qd[i] * dt;
            }
        }

        let effort: f64 = torque.iter().map(|u| u * u).sum();
        let reward = K_FORWARD * self.qd[0] - K_EFFORT * effort + ALIVE_BONUS;
        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminated: self.terminated(),
        })
    }

    fn observe(&self) -> Observation {
        // Everything except the forward position x.
        Observation(vec![
            self.q[1], self.q[2], self.q[3], self.q[4], self.q[5], self.qd[0], self.qd[1],
            self.qd[2], self.qd[3], self.qd[4], self.qd[5],
        ])
    }

    fn current_mu(&self) -> ModelParams {
        ModelParams::new(vec![self.friction_at(self.foot_x())], self.spec.mu_bounds.clone())
            .expect("friction is 1-dim")
    }

    fn state(&self) -> EnvState {
        EnvState {
            q: self.q.clone(),
            qd: self.qd.clone(),
            extras: vec![],
        }
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        if state.q.len() != 6 || state.qd.len() != 6 {
            return Err(crate::error::Error::DimensionMismatch {
                expected: 6,
                got: state.q.len(),
                context: "hopper state",
            });
        }
        self.q.copy_from_slice(&state.q);
        self.qd.copy_from_slice(&state.qd);
        Ok(())
    }

    fn metric(&self) -> Option<f64> {
        Some(self.q[0])
    }

    fn contact_forces(&self) -> &[ContactForce] {
        &self.last_contacts
    }
}
