//! Result emission: one CSV per experiment plus a manifest that pins the
//! seed, config hash and code version of the run.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so a rerun
//! with the same seed and config reproduces files byte for byte.

use crate::error::Error;
use crate::experiments::{ExtrapolationResult, FrictionResult, SweepResult};
use crate::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Sweep CSV. Columns (μ dims expand with an index suffix):
/// `mu_true_i,...,mean_perf,std_perf,mean_mu_hat_i,...,std_mu_hat_i,...,n_eval`.
pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mu_dim = result.points.first().map_or(0, |p| p.mu_true.len());
    let hat_dim = result
        .points
        .first()
        .map_or(0, |p| p.mean_mu_hat.len());
    let mut out = String::new();
    for i in 0..mu_dim {
        let _ = write!(out, "mu_true_{i},");
    }
    out.push_str("mean_perf,std_perf");
    for i in 0..hat_dim {
        let _ = write!(out, ",mean_mu_hat_{i}");
    }
    for i in 0..hat_dim {
        let _ = write!(out, ",std_mu_hat_{i}");
    }
    out.push_str(",n_eval\n");
    for p in &result.points {
        for v in &p.mu_true {
            let _ = write!(out, "{v},");
        }
        let _ = write!(out, "{},{}", p.mean_perf, p.std_perf);
        for v in &p.mean_mu_hat {
            let _ = write!(out, ",{v}");
        }
        for v in &p.std_mu_hat {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", p.n_eval);
    }
    write_file(path, &out)
}

/// Varying-friction curve: distance per controller against μ_vary.
pub fn write_friction_csv(result: &FrictionResult, path: &Path) -> Result<()> {
    let mut out = String::from("mu_vary,dist_up_true,dist_up_osi,dist_up_fixed,steps\n");
    for p in &result.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.mu_vary, p.dist_up_true, p.dist_up_osi, p.dist_up_fixed, result.steps
        );
    }
    write_file(path, &out)
}

/// Predicted vs actual friction over time for the traced rollout.
pub fn write_mu_trace_csv(result: &FrictionResult, path: &Path) -> Result<()> {
    let trace = result
        .trace
        .as_ref()
        .ok_or(Error::Empty("friction trace (no rollout was traced)"))?;
    let mut out = String::from("time,predicted,actual\n");
    for i in 0..trace.time.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            trace.time[i], trace.predicted[i], trace.actual[i]
        );
    }
    write_file(path, &out)
}

/// Beyond-training-range curves along the coupled (length, mass) line.
pub fn write_extrapolation_csv(result: &ExtrapolationResult, path: &Path) -> Result<()> {
    let hat_dim = result
        .points
        .first()
        .map_or(0, |p| p.mean_mu_hat_norm.len());
    let mut out = String::from(
        "pole_length,tip_mass,perf_up_true,std_up_true,perf_up_osi,std_up_osi",
    );
    for i in 0..hat_dim {
        let _ = write!(out, ",mean_mu_hat_norm_{i}");
    }
    out.push('\n');
    for p in &result.points {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            p.pole_length, p.tip_mass, p.perf_up_true, p.std_up_true, p.perf_up_osi, p.std_up_osi
        );
        for v in &p.mean_mu_hat_norm {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Identity card of a run: what was executed, under which seed and config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub task: String,
    pub seed: u64,
    /// SHA-256 of the exact config text the run used.
    pub config_hash: String,
    pub code_version: String,
}

impl RunManifest {
    pub fn new(command: &str, task: &str, seed: u64, config_text: &str) -> Self {
        Self {
            command: command.to_string(),
            task: task.to_string(),
            seed,
            config_hash: sha256_hex(config_text),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(path, &text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
