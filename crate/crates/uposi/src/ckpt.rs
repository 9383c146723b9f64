//! Checkpoint files for trained policies and identification networks.
//!
//! Both are versioned JSON containers wrapping the network format from
//! [`crate::net`], plus the metadata needed to run them: task name, input
//! split, μ bounds (and thereby the normalization).

use crate::env::EnvSpec;
use crate::error::Error;
use crate::net::{network_from_json, network_to_json, DenseNetwork, GaussianPolicy};
use crate::types::MuBounds;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

const POLICY_FORMAT: &str = "uposi-policy";
const OSI_FORMAT: &str = "uposi-osi";
const CKPT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    task: String,
    obs_dim: usize,
    mu_dim: usize,
    act_dim: usize,
    mu_bounds: Vec<(f64, f64)>,
    /// Exact log_std values (serde_json round-trips f64 losslessly).
    log_std: Vec<f64>,
    mean_net: serde_json::Value,
}

/// A trained policy with everything needed to drive an environment.
#[derive(Debug, Clone)]
pub struct PolicyCheckpoint {
    pub policy: GaussianPolicy,
    pub task: String,
    pub mu_bounds: MuBounds,
}

impl PolicyCheckpoint {
    pub fn from_policy(policy: &GaussianPolicy, spec: &EnvSpec) -> Self {
        Self {
            policy: policy.clone(),
            task: spec.task.name().to_string(),
            mu_bounds: spec.mu_bounds.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bounds = (0..self.mu_bounds.dim())
            .map(|i| (self.mu_bounds.low(i), self.mu_bounds.high(i)))
            .collect();
        let file = PolicyFile {
            format: POLICY_FORMAT.to_string(),
            version: CKPT_VERSION,
            task: self.task.clone(),
            obs_dim: self.policy.obs_dim(),
            mu_dim: self.policy.mu_dim(),
            act_dim: self.policy.act_dim(),
            mu_bounds: bounds,
            log_std: self.policy.log_std().to_vec(),
            mean_net: network_to_json(self.policy.mean_net()),
        };
        let text = serde_json::to_string_pretty(&file).expect("policy file serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
        let file: PolicyFile = serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
            path: display.clone(),
            reason: e.to_string(),
        })?;
        if file.format != POLICY_FORMAT {
            return Err(Error::MalformedFile {
                path: display,
                reason: format!("unexpected format tag `{}`", file.format),
            });
        }
        if file.version != CKPT_VERSION {
            return Err(Error::VersionMismatch {
                path: display,
                found: file.version,
                expected: CKPT_VERSION,
            });
        }
        let mean_net = network_from_json(file.mean_net, &display)?;
        let policy =
            GaussianPolicy::from_parts(mean_net, file.log_std, file.obs_dim, file.mu_dim)?;
        let mu_bounds = MuBounds::new(&file.mu_bounds)?;
        Ok(Self {
            policy,
            task: file.task,
            mu_bounds,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OsiFile {
    format: String,
    version: u32,
    task: String,
    obs_dim: usize,
    act_dim: usize,
    mu_bounds: Vec<(f64, f64)>,
    net: serde_json::Value,
}

/// A trained identification network plus its μ normalization.
#[derive(Debug, Clone)]
pub struct OsiCheckpoint {
    pub net: DenseNetwork,
    pub task: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub mu_bounds: MuBounds,
}

impl OsiCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let bounds = (0..self.mu_bounds.dim())
            .map(|i| (self.mu_bounds.low(i), self.mu_bounds.high(i)))
            .collect();
        let file = OsiFile {
            format: OSI_FORMAT.to_string(),
            version: CKPT_VERSION,
            task: self.task.clone(),
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            mu_bounds: bounds,
            net: network_to_json(&self.net),
        };
        let text = serde_json::to_string_pretty(&file).expect("osi file serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
        let file: OsiFile = serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
            path: display.clone(),
            reason: e.to_string(),
        })?;
        if file.format != OSI_FORMAT {
            return Err(Error::MalformedFile {
                path: display,
                reason: format!("unexpected format tag `{}`", file.format),
            });
        }
        if file.version != CKPT_VERSION {
            return Err(Error::VersionMismatch {
                path: display,
                found: file.version,
                expected: CKPT_VERSION,
            });
        }
        let net = network_from_json(file.net, &display)?;
        Ok(Self {
            net,
            task: file.task,
            obs_dim: file.obs_dim,
            act_dim: file.act_dim,
            mu_bounds: MuBounds::new(&file.mu_bounds)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, EnvConfig, Task};
    use crate::RandomSource;

    #[test]
    fn policy_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        let env = make_env(Task::Dpend, &EnvConfig::default()).unwrap();
        let mut rng = RandomSource::new(1);
        let policy = GaussianPolicy::new(6, 1, &[8, 8], 1, &mut rng).unwrap();
        let ckpt = PolicyCheckpoint::from_policy(&policy, env.spec());
        ckpt.save(&path).unwrap();
        let loaded = PolicyCheckpoint::load(&path).unwrap();
        assert_eq!(loaded.policy, policy);
        assert_eq!(loaded.task, "dpend");
        assert_eq!(loaded.mu_bounds, env.spec().mu_bounds);
    }

    #[test]
    fn osi_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("osi.json");
        let mut rng = RandomSource::new(2);
        let net =
            DenseNetwork::init_scaled_uniform(&[19, 32, 16, 1], 0.1, 1.0, &mut rng).unwrap();
        let ckpt = OsiCheckpoint {
            net: net.clone(),
            task: "dpend".into(),
            obs_dim: 4,
            act_dim: 1,
            mu_bounds: MuBounds::new(&[(-0.6, 0.6)]).unwrap(),
        };
        ckpt.save(&path).unwrap();
        let loaded = OsiCheckpoint::load(&path).unwrap();
        assert_eq!(loaded.net, net);
        assert_eq!(loaded.obs_dim, 4);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let mut rng = RandomSource::new(3);
        let net = DenseNetwork::init_scaled_uniform(&[4, 4, 1], 0.0, 1.0, &mut rng).unwrap();
        let ckpt = OsiCheckpoint {
            net,
            task: "arm".into(),
            obs_dim: 2,
            act_dim: 1,
            mu_bounds: MuBounds::new(&[(0.1, 1.0)]).unwrap(),
        };
        ckpt.save(&path).unwrap();
        assert!(PolicyCheckpoint::load(&path).is_err());
    }
}
