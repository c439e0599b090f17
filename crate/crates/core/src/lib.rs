//! Opinion dynamics on a two-layer adaptive hypergraph.
//!
//! Every vertex belongs to one fixed household and one workplace. At each
//! micro-step a uniformly chosen vertex may adopt the other opinion under
//! peer pressure from both groups, or leave its workplace for one where its
//! opinion holds a majority. The crate covers:
//!
//! - [`model`]: the state and the stochastic update rule, absorbing-state detection;
//! - [`stats`]: per-timestep observables, homophily, components, run summaries;
//! - [`toy`]: exhaustive absorbing-state analysis of the ten-vertex system;
//! - [`sim`]: single trajectories in dataset or long-run mode;
//! - [`sweep`]: reproducible parameter-grid campaigns and the on-disk dataset format;
//! - [`regression`]: moment features, least squares and the held-out RMSE protocol.
//!
//! Independent runs are distributed with rayon when the `parallel` feature is
//! enabled (the default); see [`Execution`].

pub mod error;
pub mod exec;
pub mod model;
pub mod regression;
pub mod seed;
pub mod sim;
pub mod stats;
pub mod sweep;
pub mod toy;
mod unionfind;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{ModelParams, Opinion, Regime, SimState, StepKind, StepOutcome};
pub use stats::{RunSummary, StatRecord};
