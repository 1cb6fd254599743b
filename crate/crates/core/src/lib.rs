//! Learning in rich-observation MDPs: spectral clustering of observations
//! into auxiliary states, and UCRL-style optimistic control on top of them.

pub mod agents;
pub mod clustering;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod ucrl;

pub use agents::{run_sl_ucrl, run_ucrl_flat, AgentConfig, Algorithm, RunTrace};
pub use clustering::{merge_epochs, merge_overlapping, Clustering};
pub use error::{Error, Result};
pub use harness::{ExperimentSpec, ModelSource, RunMetadata};
pub use model::{generate_random_romdp, GeneratorConfig, Policy, RewardNoise, RomdpModel, Trajectory};
pub use spectral::{SpectralConfig, Threshold};
pub use ucrl::{AuxEstimates, ChainCounts, EviResult};
