//! Hierarchical Bayesian network for battery capacity fade.
//!
//! Trains the parameters of a cycling fade law with Metropolis-Hastings
//! within Gibbs, estimates fade posteriors for held-out or synthetic duty,
//! and composes daily driving/charging/grid-service scenarios.

pub mod app;
pub mod dist;
pub mod model;
pub mod posterior;
pub mod preprocess;
pub mod sampler;
pub mod scenario;
pub mod special;

pub use dist::{DistError, DistSpec, Family};
pub use model::{
    LatentState, ModelConfig, ModelError, Network, Observation, ObservationSet, ParameterSet, VarId,
};
pub use posterior::{FitMetrics, PosteriorSummary};
pub use preprocess::TimeSeries;
pub use sampler::{Chain, ChainSet, SamplerConfig, SamplerError};
pub use scenario::{DailyTaskSchedule, ScenarioConfig, TaskShares, VehicleSpec};
