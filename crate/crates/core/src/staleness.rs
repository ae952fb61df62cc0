//! Scripted workload showing how undecayed priorities let old, once-valuable
//! entries dominate sampling, and how age decay removes them.
//!
//! One entry is inserted per step. Entries collected before `early_steps`
//! get base priority `early_base`, later ones `late_base`. Priorities are
//! refreshed every step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::ReplayBuffer;
use crate::config::{EvictionPolicy, PriorityConfig};
use crate::error::Result;
use crate::priority::PrioritySignal;
use crate::trajectory::{Step, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StalenessWorkload {
    pub steps: u64,
    pub early_steps: u64,
    pub early_base: f64,
    pub late_base: f64,
    pub alpha: f64,
    /// Stratified draws per step for the empirical age column.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for StalenessWorkload {
    fn default() -> Self {
        Self {
            steps: 2000,
            early_steps: 100,
            early_base: 10.0,
            late_base: 1.0,
            alpha: 0.6,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl StalenessWorkload {
    pub fn base_at(&self, collection_step: u64) -> f64 {
        if collection_step < self.early_steps {
            self.early_base
        } else {
            self.late_base
        }
    }

    /// Expected age of one draw at step `t` straight from the closed-form
    /// priorities, with entries `0..=t` present.
    pub fn expected_age(&self, t: u64, tau: f64) -> f64 {
        let (mut mass, mut weighted) = (0.0, 0.0);
        for c in 0..=t {
            let age = (t - c) as f64;
            let decay = if tau.is_infinite() { 1.0 } else { (-age / tau).exp() };
            let m = (self.base_at(c) * decay).powf(self.alpha);
            mass += m;
            weighted += m * age;
        }
        weighted / mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StalenessRow {
    pub step: u64,
    /// Expected sampled age from the buffer's exact sampling distribution.
    pub exact_age: f64,
    /// Same quantity from the closed-form priorities.
    pub analytic_age: f64,
    /// Mean age of one stratified batch.
    pub empirical_age: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessTrace {
    pub tau: f64,
    pub rows: Vec<StalenessRow>,
}

impl StalenessTrace {
    /// Expected sampled age averaged over every step of the workload.
    pub fn mean_exact_age(&self) -> f64 {
        self.rows.iter().map(|r| r.exact_age).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_empirical_age(&self) -> f64 {
        self.rows.iter().map(|r| r.empirical_age).sum::<f64>() / self.rows.len() as f64
    }

    /// Largest gap between the buffer's distribution and the closed form.
    pub fn max_oracle_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.exact_age - r.analytic_age).abs() / r.analytic_age.max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Drives a real buffer through the workload at decay constant `tau`.
pub fn run_workload(w: &StalenessWorkload, tau: f64) -> Result<StalenessTrace> {
    let cfg = PriorityConfig {
        alpha: w.alpha,
        tau,
        ..PriorityConfig::default()
    };
    let capacity = w.steps.max(1) as usize;
    let mut buffer = ReplayBuffer::new(capacity, cfg, EvictionPolicy::LowestEffectivePriority);
    let mut rng = ChaCha8Rng::seed_from_u64(w.seed);
    let mut rows = Vec::with_capacity(w.steps as usize);
    for t in 0..w.steps {
        // Reward chosen so that |r| + epsilon is the scripted base.
        let reward = w.base_at(t) - cfg.epsilon;
        let step = Step {
            state_id: 0,
            action_id: 0,
            reward,
            behavior_logprob: 0.0,
            next_state_id: 0,
            terminal: true,
        };
        buffer.insert(Trajectory::new(vec![step], t, 0)?, PrioritySignal::reward(reward), t)?;
        buffer.refresh_priorities(t);

        let exact_age = buffer
            .sampling_distribution()
            .into_iter()
            .map(|(id, p)| {
                let c = buffer.get(id).expect("listed id").trajectory.collection_step;
                p * (t - c) as f64
            })
            .sum();
        let batch = buffer.sample_stratified(w.batch_size, 0.0, &mut rng)?;
        let empirical_age = batch
            .entries
            .iter()
            .map(|e| (t - e.trajectory.collection_step) as f64)
            .sum::<f64>()
            / batch.len() as f64;
        rows.push(StalenessRow {
            step: t,
            exact_age,
            analytic_age: w.expected_age(t, tau),
            empirical_age,
        });
    }
    Ok(StalenessTrace { tau, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessComparison {
    pub decayed: StalenessTrace,
    pub reference: StalenessTrace,
}

impl StalenessComparison {
    /// Relative reduction of the mean sampled age against the reference.
    pub fn gap(&self) -> f64 {
        let r = self.reference.mean_exact_age();
        if r <= 0.0 {
            return 0.0;
        }
        (r - self.decayed.mean_exact_age()) / r
    }
}

pub fn compare(w: &StalenessWorkload, tau: f64, reference_tau: f64) -> Result<StalenessComparison> {
    Ok(StalenessComparison {
        decayed: run_workload(w, tau)?,
        reference: run_workload(w, reference_tau)?,
    })
}
