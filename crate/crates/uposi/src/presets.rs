//! Ready-made training configurations.
//!
//! `paper(task)` mirrors the published schedules (500 policy iterations with
//! per-task sample counts; five identification rounds of 30 μ draws × 5 s).
//! `desk(task)` is the scaled-down profile the acceptance suite runs: small
//! enough for a workstation, large enough to reproduce the qualitative
//! trends.

use crate::env::{EnvConfig, Task};
use crate::osi::OsiConfig;
use crate::trpo::TrpoConfig;
use serde::{Deserialize, Serialize};

/// Everything one run needs; the CLI reads this from a TOML file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub trpo: TrpoConfig,
    pub osi: OsiConfig,
}

/// Published training scale.
pub fn paper(task: Task) -> RunConfig {
    let samples = match task {
        Task::Dpend => 150_000,
        Task::Arm => 50_000,
        Task::Hopper => 75_000,
        Task::Cartpole => 70_000,
    };
    RunConfig {
        env: EnvConfig::default(),
        trpo: TrpoConfig {
            iterations: 500,
            samples_per_iteration: samples,
            ..TrpoConfig::default()
        },
        osi: OsiConfig::default(),
    }
}

/// Workstation scale; tuned per task.
pub fn desk(task: Task) -> RunConfig {
    let trpo = match task {
        Task::Dpend => TrpoConfig {
            iterations: 200,
            samples_per_iteration: 30_000,
            ..TrpoConfig::default()
        },
        Task::Arm => TrpoConfig {
            iterations: 150,
            samples_per_iteration: 20_000,
            ..TrpoConfig::default()
        },
        Task::Hopper => TrpoConfig {
            iterations: 300,
            samples_per_iteration: 20_000,
            discount: 0.99,
            ..TrpoConfig::default()
        },
        Task::Cartpole => TrpoConfig {
            iterations: 250,
            samples_per_iteration: 20_000,
            discount: 0.99,
            ..TrpoConfig::default()
        },
    };
    let osi = match task {
        Task::Cartpole => OsiConfig {
            epochs: 15,
            ..OsiConfig::default()
        },
        _ => OsiConfig::default(),
    };
    RunConfig {
        env: EnvConfig::default(),
        trpo,
        osi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_matches_published_numbers() {
        assert_eq!(paper(Task::Dpend).trpo.samples_per_iteration, 150_000);
        assert_eq!(paper(Task::Arm).trpo.samples_per_iteration, 50_000);
        assert_eq!(paper(Task::Hopper).trpo.samples_per_iteration, 75_000);
        assert_eq!(paper(Task::Cartpole).trpo.samples_per_iteration, 70_000);
        for task in Task::all() {
            let p = paper(task);
            assert_eq!(p.trpo.iterations, 500);
            assert_eq!(p.osi.outer_iterations, 5);
            assert_eq!(p.osi.mu_samples, 30);
            assert_eq!(p.osi.seconds_per_mu, 5.0);
        }
    }

    #[test]
    fn desk_dpend_is_the_acceptance_profile() {
        let d = desk(Task::Dpend);
        assert_eq!(d.trpo.iterations, 200);
        assert_eq!(d.trpo.samples_per_iteration, 30_000);
    }

    #[test]
    fn run_config_round_trips_through_json() {
        let cfg = desk(Task::Hopper);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.trpo.iterations, cfg.trpo.iterations);
        assert_eq!(back.env.hopper.contact_kn, cfg.env.hopper.contact_kn);
    }
}
