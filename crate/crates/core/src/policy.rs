//! Tabular softmax policy with a state-value baseline, and the clipped,
//! importance-weighted policy-gradient loss used for both fresh and
//! replayed batches.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Logits and state values, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    n_states: usize,
    n_actions: usize,
    pub logits: Vec<f64>,
    pub value_baseline: Vec<f64>,
    /// Number of gradient steps applied so far.
    pub version: u64,
}

impl PolicyState {
    /// All-zero logits (uniform policy) and a zero baseline.
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            logits: vec![0.0; n_states * n_actions],
            value_baseline: vec![0.0; n_states],
            version: 0,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn row(&self, state: usize) -> &[f64] {
        &self.logits[state * self.n_actions..(state + 1) * self.n_actions]
    }

    /// Log-softmax of the logits at `state`.
    pub fn log_probs(&self, state: usize) -> Vec<f64> {
        let row = self.row(state);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        row.iter().map(|l| l - lse).collect()
    }

    pub fn probs(&self, state: usize) -> Vec<f64> {
        self.log_probs(state).into_iter().map(f64::exp).collect()
    }

    pub fn log_prob(&self, state: usize, action: usize) -> f64 {
        self.log_probs(state)[action]
    }

    /// Samples an action by inverse CDF; returns it with its log-probability.
    pub fn sample_action<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> (usize, f64) {
        let lp = self.log_probs(state);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, l) in lp.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return (a, *l);
            }
        }
        let last = lp.len() - 1;
        (last, lp[last])
    }

    pub fn apply(&mut self, grad: &Gradient, learning_rate: f64) {
        for (p, g) in self.logits.iter_mut().zip(&grad.logits) {
            *p -= learning_rate * g;
        }
        for (v, g) in self.value_baseline.iter_mut().zip(&grad.value) {
            *v -= learning_rate * g;
        }
        self.version += 1;
    }

    /// Versioned little-endian checkpoint:
    /// magic `FRPC`, u32 format version (1), u64 policy version,
    /// u32 states, u32 actions, then `states*actions` f64 logits and
    /// `states` f64 baseline values.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&self.version.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n_states as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n_actions as u32).to_le_bytes()).map_err(io)?;
        for x in self.logits.iter().chain(&self.value_baseline) {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(io)?;
        let fmt = u32::from_le_bytes(b4);
        if fmt != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {fmt}")));
        }
        r.read_exact(&mut b8).map_err(io)?;
        let version = u64::from_le_bytes(b8);
        r.read_exact(&mut b4).map_err(io)?;
        let n_states = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4).map_err(io)?;
        let n_actions = u32::from_le_bytes(b4) as usize;
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| {
                    r.read_exact(&mut b8).map_err(io)?;
                    Ok(f64::from_le_bytes(b8))
                })
                .collect()
        };
        let logits = read_f64s(n_states * n_actions)?;
        let value_baseline = read_f64s(n_states)?;
        Ok(Self {
            n_states,
            n_actions,
            logits,
            value_baseline,
            version,
        })
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FRPC";
const CHECKPOINT_VERSION: u32 = 1;

/// Gradient of the batch loss with respect to logits and baseline values.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub logits: Vec<f64>,
    pub value: Vec<f64>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.logits
            .iter()
            .chain(&self.value)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales to at most `max_norm` in Euclidean norm; returns the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm {
            let c = max_norm / norm;
            self.logits.iter_mut().chain(self.value.iter_mut()).for_each(|g| *g *= c);
        }
        norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub clip_epsilon: f64,
    pub advantage_clip: f64,
    pub value_coef: f64,
}

/// A batch with advantages fixed against one baseline snapshot. The loss
/// treats the advantages as constants.
#[derive(Debug, Clone)]
pub struct PreparedBatch<'a> {
    items: Vec<(&'a Trajectory, f64)>,
    /// Per-trajectory, per-step `(return_to_go, advantage)`.
    targets: Vec<Vec<(f64, f64)>>,
}

impl<'a> PreparedBatch<'a> {
    /// Computes return-to-go minus baseline for every step, whitens over all
    /// steps in the batch (skipped when the spread is zero), then clips.
    pub fn new(
        policy: &PolicyState,
        items: Vec<(&'a Trajectory, f64)>,
        advantage_clip: f64,
    ) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut raw: Vec<Vec<(f64, f64)>> = items
            .iter()
            .map(|(t, _)| {
                t.returns_to_go()
                    .into_iter()
                    .zip(t.steps())
                    .map(|(g, s)| (g, g - policy.value_baseline[s.state_id]))
                    .collect()
            })
            .collect();
        whiten(&mut raw);
        for row in &mut raw {
            for (_, a) in row.iter_mut() {
                *a = a.clamp(-advantage_clip, advantage_clip);
            }
        }
        Ok(Self {
            items,
            targets: raw,
        })
    }

    pub fn advantages(&self) -> impl Iterator<Item = f64> + '_ {
        self.targets.iter().flatten().map(|&(_, a)| a)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// In-place whitening of the advantage component; zero spread leaves
/// values untouched.
pub fn whiten(rows: &mut [Vec<(f64, f64)>]) {
    let n = rows.iter().map(Vec::len).sum::<usize>() as f64;
    if n == 0.0 {
        return;
    }
    let mean = rows.iter().flatten().map(|&(_, a)| a).sum::<f64>() / n;
    let var = rows
        .iter()
        .flatten()
        .map(|&(_, a)| (a - mean) * (a - mean))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if !(std > 1e-12) {
        return;
    }
    for (_, a) in rows.iter_mut().flatten() {
        *a = (*a - mean) / std;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub loss: f64,
    pub steps: usize,
    pub clipped_steps: usize,
    pub mean_ratio: f64,
}

impl UpdateStats {
    pub fn clip_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.clipped_steps as f64 / self.steps as f64
        }
    }
}

/// Batch loss `(1/B) sum_i w_i * mean_t [ -min(rho A, clip(rho) A) + c (V - G)^2 / 2 ]`.
pub fn batch_loss(policy: &PolicyState, batch: &PreparedBatch, cfg: &LossConfig) -> f64 {
    evaluate(policy, batch, cfg, None).loss
}

/// Analytic gradient of [`batch_loss`] plus clipping statistics.
pub fn batch_gradient(
    policy: &PolicyState,
    batch: &PreparedBatch,
    cfg: &LossConfig,
) -> (Gradient, UpdateStats) {
    let mut grad = Gradient {
        logits: vec![0.0; policy.logits.len()],
        value: vec![0.0; policy.value_baseline.len()],
    };
    let stats = evaluate(policy, batch, cfg, Some(&mut grad));
    (grad, stats)
}

fn evaluate(
    policy: &PolicyState,
    batch: &PreparedBatch,
    cfg: &LossConfig,
    mut grad: Option<&mut Gradient>,
) -> UpdateStats {
    let b = batch.items.len() as f64;
    let k = policy.n_actions;
    let (lo, hi) = (1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    let mut stats = UpdateStats::default();
    let mut ratio_sum = 0.0;
    for ((traj, w), targets) in batch.items.iter().zip(&batch.targets) {
        let scale = w / (b * traj.len() as f64);
        let mut traj_loss = 0.0;
        for (step, &(ret, adv)) in traj.steps().iter().zip(targets) {
            let s = step.state_id;
            let lp = policy.log_probs(s);
            let ratio = (lp[step.action_id] - step.behavior_logprob).exp();
            let clipped = ratio.clamp(lo, hi);
            let unclipped_obj = ratio * adv;
            let clipped_obj = clipped * adv;
            let clip_active = clipped_obj < unclipped_obj;
            let v = policy.value_baseline[s];
            traj_loss += -unclipped_obj.min(clipped_obj) + 0.5 * cfg.value_coef * (v - ret) * (v - ret);
            stats.steps += 1;
            ratio_sum += ratio;
            if clip_active {
                stats.clipped_steps += 1;
            }
            if let Some(g) = grad.as_deref_mut() {
                if !clip_active {
                    // d(-rho A)/d logit_j = -A rho (1[j = a] - pi_j)
                    let c = -adv * ratio * scale;
                    for (j, l) in lp.iter().enumerate() {
                        let ind = if j == step.action_id { 1.0 } else { 0.0 };
                        g.logits[s * k + j] += c * (ind - l.exp());
                    }
                }
                g.value[s] += scale * cfg.value_coef * (v - ret);
            }
        }
        stats.loss += w * traj_loss / (b * traj.len() as f64);
    }
    stats.mean_ratio = if stats.steps > 0 {
        ratio_sum / stats.steps as f64
    } else {
        0.0
    };
    stats
}
