//! Shared value types: model parameters and their normalization, history
//! queues, and rollout storage.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// History window length. Three steps is the shortest window that pins down a
/// second-order dynamic model.
pub const HISTORY_LEN: usize = 3;

/// Per-dimension `(low, high)` ranges for the dynamics parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuBounds {
    lows: Vec<f64>,
    highs: Vec<f64>,
}

impl MuBounds {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        for (i, &(lo, hi)) in pairs.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "mu bounds dimension {i} degenerate: low {lo} must be < high {hi}"
                )));
            }
        }
        Ok(Self {
            lows: pairs.iter().map(|p| p.0).collect(),
            highs: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lows.len()
    }

    pub fn low(&self, i: usize) -> f64 {
        self.lows[i]
    }

    pub fn high(&self, i: usize) -> f64 {
        self.highs[i]
    }

    /// Midpoint of every dimension; normalizes to the zero vector.
    pub fn midpoint(&self) -> ModelParams {
        let values = self
            .lows
            .iter()
            .zip(&self.highs)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect();
        ModelParams {
            values,
            bounds: self.clone(),
        }
    }

    /// Uniform draw over the box.
    pub fn sample(&self, rng: &mut crate::RandomSource) -> ModelParams {
        let values = self
            .lows
            .iter()
            .zip(&self.highs)
            .map(|(&lo, &hi)| rng.uniform(lo, hi))
            .collect();
        ModelParams {
            values,
            bounds: self.clone(),
        }
    }
}

/// Dynamics-model parameters μ together with the bounds they were drawn from.
///
/// Values may lie outside the bounds (extrapolation experiments do this on
/// purpose); [`ModelParams::in_range`] reports whether they do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    values: Vec<f64>,
    bounds: MuBounds,
}

impl ModelParams {
    pub fn new(values: Vec<f64>, bounds: MuBounds) -> Result<Self> {
        if values.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                got: values.len(),
                context: "model parameter values vs bounds",
            });
        }
        Ok(Self { values, bounds })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &MuBounds {
        &self.bounds
    }

    pub fn in_range(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, &v)| self.bounds.low(i) <= v && v <= self.bounds.high(i))
    }

    /// Affine map sending `low → -1` and `high → +1` per dimension.
    ///
    /// Out-of-range values keep extrapolating linearly past ±1.
    pub fn normalized(&self) -> Vec<f64> {
        normalize_mu(&self.values, &self.bounds)
    }
}

/// Normalize raw parameter values against `bounds`: `low → -1`, `high → +1`.
pub fn normalize_mu(values: &[f64], bounds: &MuBounds) -> Vec<f64> {
    assert_eq!(values.len(), bounds.dim(), "mu dimension mismatch");
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (lo, hi) = (bounds.low(i), bounds.high(i));
            2.0 * (v - lo) / (hi - lo) - 1.0
        })
        .collect()
}

/// Inverse of [`normalize_mu`].
pub fn denormalize_mu(normed: &[f64], bounds: &MuBounds) -> Result<ModelParams> {
    if normed.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            got: normed.len(),
            context: "normalized mu vs bounds",
        });
    }
    let values = normed
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let (lo, hi) = (bounds.low(i), bounds.high(i));
            lo + 0.5 * (z + 1.0) * (hi - lo)
        })
        .collect();
    ModelParams::new(values, bounds.clone())
}

/// Environment observation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Control vector (forces in N or torques in N·m, or their normalized form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action(pub Vec<f64>);

impl Action {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_observation: Observation,
    pub terminated: bool,
}

/// One episode simulated under a single ground-truth μ.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub mu: ModelParams,
    pub transitions: Vec<Transition>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// Fixed window of the last [`HISTORY_LEN`] (observation, action) pairs plus
/// the current observation.
///
/// Flattened layout, oldest first:
/// `[obs_{t-h}, act_{t-h}, ..., obs_{t-1}, act_{t-1}, obs_t]`,
/// total dimension `(h+1)·obs_dim + h·act_dim`. The layout is part of the
/// persisted-model contract and must not change.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    obs_dim: usize,
    act_dim: usize,
    pairs: VecDeque<(Observation, Action)>,
    current: Observation,
}

impl HistorySegment {
    /// All-zero history, used before any real steps have been taken.
    pub fn zeroed(obs_dim: usize, act_dim: usize) -> Self {
        let pairs = (0..HISTORY_LEN)
            .map(|_| (Observation::zeros(obs_dim), Action::zeros(act_dim)))
            .collect();
        Self {
            obs_dim,
            act_dim,
            pairs,
            current: Observation::zeros(obs_dim),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn current(&self) -> &Observation {
        &self.current
    }

    /// Flattened input dimension for the given sizes.
    pub fn flat_dim(obs_dim: usize, act_dim: usize) -> usize {
        (HISTORY_LEN + 1) * obs_dim + HISTORY_LEN * act_dim
    }

    /// Evict the oldest pair, append `(obs, act)`, make `next_obs` current.
    pub fn push(&mut self, obs: Observation, act: Action, next_obs: Observation) -> Result<()> {
        if obs.dim() != self.obs_dim || next_obs.dim() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                got: obs.dim().max(next_obs.dim()),
                context: "history observation",
            });
        }
        if act.dim() != self.act_dim {
            return Err(Error::DimensionMismatch {
                expected: self.act_dim,
                got: act.dim(),
                context: "history action",
            });
        }
        self.pairs.pop_front();
        self.pairs.push_back((obs, act));
        self.current = next_obs;
        debug_assert_eq!(self.pairs.len(), HISTORY_LEN);
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::flat_dim(self.obs_dim, self.act_dim));
        for (obs, act) in &self.pairs {
            out.extend_from_slice(obs.as_slice());
            out.extend_from_slice(act.as_slice());
        }
        out.extend_from_slice(self.current.as_slice());
        out
    }
}
