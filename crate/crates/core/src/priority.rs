//! Base priorities, exponential age decay and the freshness-aware priority.

use serde::{Deserialize, Serialize};

use crate::config::{BaseKind, PriorityConfig};
use crate::error::{Error, Result};

/// Smallest decay factor ever applied. Keeps very old entries at a positive
/// (and therefore still evictable and samplable) priority.
pub const MIN_DECAY: f64 = 1e-300;

/// The scalars a base priority can be derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrioritySignal {
    pub reward: f64,
    pub advantage: Option<f64>,
    pub td_error: Option<f64>,
}

impl PrioritySignal {
    pub fn reward(reward: f64) -> Self {
        Self {
            reward,
            advantage: None,
            td_error: None,
        }
    }

    pub fn with_advantage(mut self, advantage: f64) -> Self {
        self.advantage = Some(advantage);
        self
    }

    pub fn with_td_error(mut self, td_error: f64) -> Self {
        self.td_error = Some(td_error);
        self
    }

    fn select(&self, kind: BaseKind) -> Result<f64> {
        match kind {
            BaseKind::RewardMagnitude => Ok(self.reward),
            BaseKind::AdvantageMagnitude => self.advantage.ok_or(Error::MissingSignal("advantage")),
            BaseKind::TdErrorMagnitude => self.td_error.ok_or(Error::MissingSignal("td_error")),
        }
    }
}

/// `|signal| + epsilon` for the configured signal kind.
pub fn base_priority(signal: &PrioritySignal, config: &PriorityConfig) -> Result<f64> {
    let v = signal.select(config.base_kind)?;
    if !v.is_finite() {
        return Err(Error::NonFiniteSignal(v));
    }
    Ok(v.abs() + config.epsilon)
}

/// `exp(-age / tau)`, floored at [`MIN_DECAY`]. Infinite `tau` never decays.
pub fn age_decay(age: f64, tau: f64) -> Result<f64> {
    if !(age >= 0.0) || age.is_infinite() {
        return Err(Error::NegativeAge(age));
    }
    if tau == f64::INFINITY || age == 0.0 {
        return Ok(1.0);
    }
    Ok((-age / tau).exp().max(MIN_DECAY))
}

/// Base priority scaled by the age decay factor.
pub fn effective_priority(base: f64, age: f64, config: &PriorityConfig) -> Result<f64> {
    if !(base > 0.0) || !base.is_finite() {
        return Err(Error::NonPositiveBase(base));
    }
    if config.tau == f64::INFINITY {
        if !(age >= 0.0) {
            return Err(Error::NegativeAge(age));
        }
        return Ok(base);
    }
    Ok(base * age_decay(age, config.tau)?)
}

/// IS exponent at a training step: linear from `beta_start` to `beta_end`.
pub fn beta_at(step: u64, config: &PriorityConfig) -> f64 {
    if config.beta_anneal_steps == 0 {
        return config.beta_start;
    }
    let frac = (step as f64 / config.beta_anneal_steps as f64).min(1.0);
    config.beta_start + frac * (config.beta_end - config.beta_start)
}

/// Age beyond which an old entry with base `old_base` ranks below a fresh
/// entry with base `new_base`.
pub fn crossover_age(old_base: f64, new_base: f64, tau: f64) -> f64 {
    tau * (old_base / new_base).ln()
}
