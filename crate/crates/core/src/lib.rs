//! Q-learning on grid-discretized continuous MDPs with Hamiltonian Monte
//! Carlo sampled Bellman updates and low-rank matrix completion.

pub mod covariance;
pub mod envs;
pub mod error;
pub mod grid;
pub mod hamq;
pub mod hmc;
pub mod matcomp;
pub mod mdp;
pub mod qtable;
pub mod seed;

pub use covariance::Covariance;
pub use envs::{make_env, EnvName, EnvOptions};
pub use error::{Error, Result};
pub use grid::{ActionSpace, GridSpace, Interval, StateSpace};
pub use hamq::{Mode, TrainConfig, TrainReport};
pub use hmc::{HmcConfig, TargetDensity};
pub use matcomp::{CompletionConfig, ObservedSet};
pub use mdp::{DiscreteMdp, RewardModel, TransitionModel};
pub use qtable::{frobenius_error, sup_error, QTable};
