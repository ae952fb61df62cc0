//! Episode records stored in the replay buffer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One environment transition together with the behavior policy's
/// log-probability of the chosen action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state_id: usize,
    pub action_id: usize,
    pub reward: f64,
    pub behavior_logprob: f64,
    pub next_state_id: usize,
    pub terminal: bool,
}

/// A complete episode. Returns are undiscounted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    steps: Vec<Step>,
    episode_return: f64,
    /// Global gradient step at which the episode was collected.
    pub collection_step: u64,
    /// Version of the behavior policy that generated the episode.
    pub behavior_version: u64,
}

impl Trajectory {
    /// Builds a trajectory, deriving the return as the sum of step rewards.
    pub fn new(steps: Vec<Step>, collection_step: u64, behavior_version: u64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidTrajectory("no steps".into()));
        }
        for (i, s) in steps.iter().enumerate() {
            if !(s.behavior_logprob <= 0.0) {
                return Err(Error::InvalidTrajectory(format!(
                    "step {i}: behavior log-probability {} is not <= 0",
                    s.behavior_logprob
                )));
            }
            if !s.reward.is_finite() {
                return Err(Error::InvalidTrajectory(format!("step {i}: reward is not finite")));
            }
            if s.terminal && i + 1 != steps.len() {
                return Err(Error::InvalidTrajectory(format!(
                    "step {i} is terminal but not the last step"
                )));
            }
        }
        let episode_return = steps.iter().map(|s| s.reward).sum();
        Ok(Self {
            steps,
            episode_return,
            collection_step,
            behavior_version,
        })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn episode_return(&self) -> f64 {
        self.episode_return
    }

    /// Checks index bounds and the horizon against an environment's shape.
    pub fn check_bounds(&self, n_states: usize, n_actions: usize, horizon: usize) -> Result<()> {
        if self.steps.len() > horizon {
            return Err(Error::InvalidTrajectory(format!(
                "length {} exceeds horizon {horizon}",
                self.steps.len()
            )));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.state_id >= n_states || s.next_state_id >= n_states || s.action_id >= n_actions {
                return Err(Error::InvalidTrajectory(format!("step {i}: index out of bounds")));
            }
        }
        Ok(())
    }

    /// Undiscounted reward-to-go for every step.
    pub fn returns_to_go(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (i, s) in self.steps.iter().enumerate().rev() {
            acc += s.reward;
            out[i] = acc;
        }
        out
    }
}
