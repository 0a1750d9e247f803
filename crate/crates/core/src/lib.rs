//! Double deep Q-learning with experience replay on a deterministic 2D
//! lunar lander.
//!
//! The crate is organized bottom-up:
//!
//! - [`nn`]: multilayer perceptron with analytic backpropagation
//! - [`optim`]: Adamax, plus plain SGD for debugging
//! - [`env`]: the lander environment and its reward contract
//! - [`replay`]: FIFO experience memory
//! - [`agent`]: epsilon-greedy acting, double/max targets, target sync
//! - [`harness`]: training loop, greedy evaluation, moving averages
//! - [`sweep`]: hyperparameter grids over the harness
//! - [`checkpoint`]: JSON persistence
//!
//! Trials in evaluation and sweeps run on rayon when the `parallel`
//! feature is on (the default); see [`exec::Execution`].

pub mod agent;
pub mod checkpoint;
pub mod env;
pub mod error;
pub mod exec;
pub mod harness;
pub mod nn;
pub mod optim;
pub mod replay;
pub mod seed;
pub mod sweep;

pub use agent::{compute_targets, epsilon, Agent, AgentConfig, EpsilonBasis, TargetMode};
pub use checkpoint::Checkpoint;
pub use env::{is_solved, Action, EnvConfig, LanderEnv, Observation, Outcome, StepResult};
pub use error::{Error, Result};
pub use exec::Execution;
pub use harness::{evaluate, moving_average, train, train_with, EvalResult, RunResult};
pub use nn::{copy_params, Activation, LayerSpec, MlpParams};
pub use optim::{adamax_step, AdamaxState};
pub use replay::{ReplayBuffer, Transition};
pub use sweep::{sweep, Axis, AxisName, AxisValue, SweepOptions, SweepTable};
