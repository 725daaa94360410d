//! Drone-based quantification of a greenhouse-gas hotspot.
//!
//! The crate couples four pieces:
//!
//! * [`plume`]: a steady-state Gaussian plume that maps a surface flux
//!   (mg CO₂ m⁻² s⁻¹) to a concentration (ppm) at any receptor.
//! * [`prior`] and [`enkf`]: a lognormal prior over the flux, carried as a
//!   log-space ensemble and updated by an iterative ensemble Kalman filter
//!   (ES-MDA) with one scalar observation per step.
//! * [`scoring`]: the three per-step rewards (negative ensemble CRPS,
//!   KL information gain, negative differential entropy).
//! * [`environment`] and [`qlearning`]: the 10×10 gridworld in which a drone
//!   takes 16 observations, and the tabular Q-learner that learns where to
//!   sample.
//!
//! [`harness`] ties them into evaluation campaigns and data dumps. Each
//! capability has a runnable program under `examples/`.

pub mod enkf;
pub mod environment;
pub mod error;
pub mod harness;
pub mod plume;
pub mod prior;
pub mod qlearning;
pub mod rng;
pub mod scoring;

pub use enkf::{assimilate, sequential_assimilate_all, EnkfConfig, ForwardModel, Observation};
pub use environment::{
    Action, ActionSet, AgentState, EpisodeRecord, Environment, ResetOptions, ScenarioConfig,
    StepOutcome,
};
pub use error::{Error, Result};
pub use plume::{concentration, dispersion, downwind_frame, PlumeConfig, Point3, StabilityClass};
pub use prior::{EnsembleStats, FluxEnsemble, LognormalParams};
pub use qlearning::{EpsilonSchedule, Policy, QTable, TrainConfig};
pub use scoring::{crps_ensemble, entropy_lognormal, kl_lognormal, step_reward, RewardKind};
