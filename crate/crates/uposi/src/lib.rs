//! Universal control policies coupled with online system identification.
//!
//! The library trains a policy conditioned on dynamics-model parameters over a
//! randomized family of analytic rigid-body environments, trains a regressor
//! that recovers those parameters from a short state-action history, and runs
//! the combined controller plus the evaluation experiments around it.
//!
//! Everything is double precision and deterministic: a fixed seed and config
//! reproduce training and evaluation outputs byte for byte, independent of the
//! worker thread count.

pub mod ckpt;
pub mod env;
pub mod error;
pub mod experiments;
pub mod net;
pub mod osi;
pub mod presets;
pub mod report;
pub mod rng;
pub mod runtime;
pub mod trpo;
pub mod types;
pub mod verify;

pub use error::Error;
pub use rng::RandomSource;
pub use types::{Action, HistorySegment, ModelParams, MuBounds, Observation, Rollout, Transition};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
