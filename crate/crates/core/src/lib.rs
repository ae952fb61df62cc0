//! Trajectory-level prioritized experience replay with freshness-aware
//! priority decay, plus the pieces needed to exercise it: gridworld
//! environments, a tabular policy-gradient trainer and exact
//! importance-sampling diagnostics.

pub mod buffer;
pub mod config;
pub mod env;
pub mod error;
pub mod ess;
pub mod policy;
pub mod priority;
pub mod staleness;
pub mod sum_tree;
pub mod trainer;
pub mod trajectory;

pub use buffer::{BufferEntry, PrioritizedBatch, ReplayBuffer, SharedBuffer};
pub use config::{BaseKind, EnvKind, EvictionPolicy, Method, PriorityConfig, RunConfig};
pub use error::{Error, Result};
pub use priority::PrioritySignal;
pub use trajectory::{Step, Trajectory};
pub use trainer::{TrainMetrics, Trainer};
