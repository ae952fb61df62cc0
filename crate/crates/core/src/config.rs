//! Run configuration and its flat `key = value` file format.
//!
//! Keys use dotted section names, one per line; `#` starts a comment.
//!
//! ```text
//! method = fresh_per
//! env = cliffwalking
//! seed = 42
//! sync_refresh = true
//! priority.alpha = 0.6
//! priority.beta_start = 0.4
//! priority.beta_end = 1
//! priority.beta_anneal_steps = 0
//! priority.tau = 500            # `inf` disables age decay
//! priority.epsilon = 0.01
//! priority.base_kind = reward_magnitude
//! buffer.capacity = 50000
//! buffer.eviction = lowest_effective_priority
//! train.replay_ratio = 2
//! train.batch_size = 128
//! train.rollout_batch = 128
//! train.clip_epsilon = 0.2
//! train.advantage_clip = 0.2
//! train.learning_rate = 2
//! train.max_iterations = 400
//! ```
//!
//! Unknown keys, duplicate keys and malformed values are parse errors.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which scalar a base priority is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    RewardMagnitude,
    AdvantageMagnitude,
    TdErrorMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictionPolicy {
    LowestEffectivePriority,
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OnPolicy,
    StandardPer,
    FreshPer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    CliffWalking,
    FrozenLake,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(BaseKind {
    RewardMagnitude => "reward_magnitude",
    AdvantageMagnitude => "advantage_magnitude",
    TdErrorMagnitude => "td_error_magnitude",
});
keyword_enum!(EvictionPolicy {
    LowestEffectivePriority => "lowest_effective_priority",
    Fifo => "fifo",
});
keyword_enum!(Method {
    OnPolicy => "on_policy",
    StandardPer => "standard_per",
    FreshPer => "fresh_per",
});
keyword_enum!(EnvKind {
    CliffWalking => "cliffwalking",
    FrozenLake => "frozenlake",
});

/// Priority exponents, age decay and the base-priority signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Zero keeps beta fixed at `beta_start`.
    pub beta_anneal_steps: u64,
    /// Age decay constant in gradient steps; `f64::INFINITY` disables decay.
    pub tau: f64,
    pub epsilon: f64,
    pub base_kind: BaseKind,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta_start: 0.4,
            beta_end: 1.0,
            beta_anneal_steps: 0,
            tau: 500.0,
            epsilon: 0.01,
            base_kind: BaseKind::RewardMagnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub priority: PriorityConfig,
    pub buffer_capacity: usize,
    pub eviction_policy: EvictionPolicy,
    pub replay_ratio_k: usize,
    pub batch_size_b: usize,
    pub rollout_batch: usize,
    pub clip_epsilon: f64,
    pub advantage_clip: f64,
    pub learning_rate: f64,
    /// Weight of the baseline regression term in the loss.
    pub value_coef: f64,
    /// Gradients are rescaled to at most this Euclidean norm before each step.
    pub max_grad_norm: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub method: Method,
    pub env: EnvKind,
    /// Run the priority refresh inline instead of on a background thread.
    pub sync_refresh: bool,
}

impl Default for RunConfig {
    /// Desk-scale defaults: the published replay settings with step sizes
    /// suited to a tabular softmax policy. The baseline's effective step is
    /// `learning_rate * value_coef`, kept below one.
    fn default() -> Self {
        Self {
            learning_rate: 3000.0,
            value_coef: 3e-4,
            ..Self::published()
        }
    }
}

impl RunConfig {
    /// Large-scale settings: learning rate 1e-6 and the baseline trained at the same rate.
    pub fn published() -> Self {
        Self {
            priority: PriorityConfig::default(),
            buffer_capacity: 50_000,
            eviction_policy: EvictionPolicy::LowestEffectivePriority,
            replay_ratio_k: 2,
            batch_size_b: 128,
            rollout_batch: 128,
            clip_epsilon: 0.2,
            advantage_clip: 0.2,
            learning_rate: 1e-6,
            value_coef: 1.0,
            max_grad_norm: 1.0,
            max_iterations: 400,
            seed: 42,
            method: Method::FreshPer,
            env: EnvKind::CliffWalking,
            sync_refresh: true,
        }
    }

    /// Standard PER is fresh PER with decay disabled; a fresh-PER run with
    /// `tau = inf` is reported as standard PER.
    pub fn effective_method(&self) -> Method {
        match self.method {
            Method::FreshPer if self.priority.tau == f64::INFINITY => Method::StandardPer,
            m => m,
        }
    }

    /// The age decay constant actually used by the buffer.
    pub fn effective_tau(&self) -> f64 {
        match self.method {
            Method::StandardPer => f64::INFINITY,
            _ => self.priority.tau,
        }
    }

    /// Returns every violated invariant, or `Ok(())`.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let p = &self.priority;
        if !(0.0..=1.0).contains(&p.alpha) {
            errs.push(format!("alpha must lie in [0, 1], got {}", p.alpha));
        }
        if !(0.0..=1.0).contains(&p.beta_start) {
            errs.push(format!("beta_start must lie in [0, 1], got {}", p.beta_start));
        }
        if !(0.0..=1.0).contains(&p.beta_end) {
            errs.push(format!("beta_end must lie in [0, 1], got {}", p.beta_end));
        }
        if p.beta_start > p.beta_end {
            errs.push(format!(
                "beta_start ({}) must not exceed beta_end ({})",
                p.beta_start, p.beta_end
            ));
        }
        if p.tau.is_nan() || p.tau <= 0.0 {
            errs.push("tau must be positive".to_string());
        }
        if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
            errs.push(format!("epsilon must be positive, got {}", p.epsilon));
        }
        if self.buffer_capacity == 0 {
            errs.push("buffer capacity must be positive".to_string());
        }
        if self.batch_size_b == 0 {
            errs.push("batch size must be positive".to_string());
        }
        if self.batch_size_b > self.buffer_capacity {
            errs.push(format!(
                "batch size {} exceeds buffer capacity {}",
                self.batch_size_b, self.buffer_capacity
            ));
        }
        if self.rollout_batch == 0 {
            errs.push("rollout batch must be positive".to_string());
        }
        for (name, v) in [
            ("clip_epsilon", self.clip_epsilon),
            ("advantage_clip", self.advantage_clip),
            ("learning_rate", self.learning_rate),
            ("value_coef", self.value_coef),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.max_iterations == 0 {
            errs.push("max_iterations must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Every key accepted by [`RunConfig::set`], in file order.
    pub const KEYS: &'static [&'static str] = &[
        "method",
        "env",
        "seed",
        "sync_refresh",
        "priority.alpha",
        "priority.beta_start",
        "priority.beta_end",
        "priority.beta_anneal_steps",
        "priority.tau",
        "priority.epsilon",
        "priority.base_kind",
        "buffer.capacity",
        "buffer.eviction",
        "train.replay_ratio",
        "train.batch_size",
        "train.rollout_batch",
        "train.clip_epsilon",
        "train.advantage_clip",
        "train.learning_rate",
        "train.value_coef",
        "train.max_grad_norm",
        "train.max_iterations",
    ];

    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "method" => self.method = value.parse()?,
            "env" => self.env = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            "sync_refresh" => self.sync_refresh = parse_num(key, value)?,
            "priority.alpha" => self.priority.alpha = parse_num(key, value)?,
            "priority.beta_start" => self.priority.beta_start = parse_num(key, value)?,
            "priority.beta_end" => self.priority.beta_end = parse_num(key, value)?,
            "priority.beta_anneal_steps" => {
                self.priority.beta_anneal_steps = parse_num(key, value)?
            }
            "priority.tau" => self.priority.tau = parse_num(key, value)?,
            "priority.epsilon" => self.priority.epsilon = parse_num(key, value)?,
            "priority.base_kind" => self.priority.base_kind = value.parse()?,
            "buffer.capacity" => self.buffer_capacity = parse_num(key, value)?,
            "buffer.eviction" => self.eviction_policy = value.parse()?,
            "train.replay_ratio" => self.replay_ratio_k = parse_num(key, value)?,
            "train.batch_size" => self.batch_size_b = parse_num(key, value)?,
            "train.rollout_batch" => self.rollout_batch = parse_num(key, value)?,
            "train.clip_epsilon" => self.clip_epsilon = parse_num(key, value)?,
            "train.advantage_clip" => self.advantage_clip = parse_num(key, value)?,
            "train.learning_rate" => self.learning_rate = parse_num(key, value)?,
            "train.value_coef" => self.value_coef = parse_num(key, value)?,
            "train.max_grad_norm" => self.max_grad_norm = parse_num(key, value)?,
            "train.max_iterations" => self.max_iterations = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Textual value of one key, in the form [`RunConfig::set`] accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let p = &self.priority;
        Some(match key {
            "method" => self.method.to_string(),
            "env" => self.env.to_string(),
            "seed" => self.seed.to_string(),
            "sync_refresh" => self.sync_refresh.to_string(),
            "priority.alpha" => p.alpha.to_string(),
            "priority.beta_start" => p.beta_start.to_string(),
            "priority.beta_end" => p.beta_end.to_string(),
            "priority.beta_anneal_steps" => p.beta_anneal_steps.to_string(),
            "priority.tau" => p.tau.to_string(),
            "priority.epsilon" => p.epsilon.to_string(),
            "priority.base_kind" => p.base_kind.to_string(),
            "buffer.capacity" => self.buffer_capacity.to_string(),
            "buffer.eviction" => self.eviction_policy.to_string(),
            "train.replay_ratio" => self.replay_ratio_k.to_string(),
            "train.batch_size" => self.batch_size_b.to_string(),
            "train.rollout_batch" => self.rollout_batch.to_string(),
            "train.clip_epsilon" => self.clip_epsilon.to_string(),
            "train.advantage_clip" => self.advantage_clip.to_string(),
            "train.learning_rate" => self.learning_rate.to_string(),
            "train.value_coef" => self.value_coef.to_string(),
            "train.max_grad_norm" => self.max_grad_norm.to_string(),
            "train.max_iterations" => self.max_iterations.to_string(),
            _ => return None,
        })
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (lineno, key, value) in key_values(text)? {
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {lineno}: {e}")))?;
        }
        Ok(cfg)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.get(key).expect("listed key"));
            out.push('\n');
        }
        out
    }
}

/// Splits a `key = value` body into trimmed pairs, skipping blanks and comments.
pub fn key_values(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, key, value.trim()));
    }
    Ok(out)
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}
