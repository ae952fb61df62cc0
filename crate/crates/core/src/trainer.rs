//! The training loop: roll out the frozen behavior policy, store the
//! episodes, take one on-policy step, refresh priorities, take `K`
//! prioritized replay steps, then sync the behavior policy.

use std::thread;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{RefreshReport, ReplayBuffer};
use crate::config::{BaseKind, Method, PriorityConfig, RunConfig};
use crate::env::{make_env, Action, Environment};
use crate::error::{Error, Result};
use crate::policy::{batch_gradient, LossConfig, PolicyState, PreparedBatch, UpdateStats};
use crate::priority::{beta_at, PrioritySignal};
use crate::trajectory::{Step, Trajectory};

/// Per-iteration observability record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub iteration: usize,
    pub mean_return: f64,
    /// Mean age in gradient steps of replayed entries; absent without replay.
    pub mean_sampled_age: Option<f64>,
    pub mean_is_weight: Option<f64>,
    pub clip_fraction: f64,
    pub buffer_occupancy: usize,
    pub gradient_steps: u64,
    /// Seconds. Kept out of the deterministic metrics stream.
    #[serde(skip)]
    pub refresh_wall_time: f64,
}

/// Samples `count` complete episodes from `policy`, recording the log-probability
/// of every chosen action.
pub fn rollout<R: RngCore + ?Sized>(
    policy: &PolicyState,
    env: &mut dyn Environment,
    count: usize,
    collection_step: u64,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut state = env.reset(rng.next_u64());
        let mut steps = Vec::new();
        loop {
            let (action, logprob) = policy.sample_action(state, rng);
            let outcome = env.step(Action::from_index(action).expect("four actions"))?;
            steps.push(Step {
                state_id: state,
                action_id: action,
                reward: outcome.reward,
                behavior_logprob: logprob,
                next_state_id: outcome.next_state,
                terminal: outcome.terminal,
            });
            state = outcome.next_state;
            if outcome.done {
                break;
            }
        }
        out.push(Trajectory::new(steps, collection_step, policy.version)?);
    }
    Ok(out)
}

/// Base-priority signal for a stored episode under the current baseline.
/// The TD signal is the mean absolute one-step TD error along the episode.
pub fn priority_signal(trajectory: &Trajectory, policy: &PolicyState) -> PrioritySignal {
    let v = &policy.value_baseline;
    let steps = trajectory.steps();
    let advantage = trajectory.episode_return() - v[steps[0].state_id];
    let td = steps
        .iter()
        .map(|s| {
            let next = if s.terminal { 0.0 } else { v[s.next_state_id] };
            (s.reward + next - v[s.state_id]).abs()
        })
        .sum::<f64>()
        / steps.len() as f64;
    PrioritySignal::reward(trajectory.episode_return())
        .with_advantage(advantage)
        .with_td_error(td)
}

/// Full training state for one run.
pub struct Trainer {
    config: RunConfig,
    env: Box<dyn Environment + Send>,
    policy: PolicyState,
    behavior: PolicyState,
    buffer: Option<ReplayBuffer>,
    global_step: u64,
    iteration: usize,
    rollout_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    refresh_threads: usize,
}

impl Trainer {
    pub fn new(config: RunConfig) -> std::result::Result<Self, Vec<String>> {
        config.validate()?;
        let env = make_env(config.env);
        let policy = PolicyState::new(env.n_states(), env.n_actions());
        let buffer = (config.method != Method::OnPolicy).then(|| {
            let priority = PriorityConfig {
                tau: config.effective_tau(),
                ..config.priority
            };
            ReplayBuffer::new(config.buffer_capacity, priority, config.eviction_policy)
        });
        let rollout_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed);
        sample_rng.set_stream(1);
        Ok(Self {
            behavior: policy.clone(),
            policy,
            env,
            buffer,
            global_step: 0,
            iteration: 0,
            rollout_rng,
            sample_rng,
            refresh_threads: 1,
            config,
        })
    }

    pub fn with_refresh_threads(mut self, threads: usize) -> Self {
        self.refresh_threads = threads.max(1);
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn policy(&self) -> &PolicyState {
        &self.policy
    }

    pub fn behavior(&self) -> &PolicyState {
        &self.behavior
    }

    pub fn buffer(&self) -> Option<&ReplayBuffer> {
        self.buffer.as_ref()
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    fn loss_config(&self) -> LossConfig {
        LossConfig {
            clip_epsilon: self.config.clip_epsilon,
            advantage_clip: self.config.advantage_clip,
            value_coef: self.config.value_coef,
        }
    }

    fn gradient_step(&mut self, items: Vec<(&Trajectory, f64)>) -> Result<UpdateStats> {
        let cfg = self.loss_config();
        let batch = PreparedBatch::new(&self.policy, items, cfg.advantage_clip)?;
        let (mut grad, stats) = batch_gradient(&self.policy, &batch, &cfg);
        grad.clip_norm(self.config.max_grad_norm);
        self.policy.apply(&grad, self.config.learning_rate);
        self.global_step += 1;
        Ok(stats)
    }

    /// One full iteration of the training loop.
    pub fn run_iteration(&mut self) -> Result<TrainMetrics> {
        let fresh = rollout(
            &self.behavior,
            self.env.as_mut(),
            self.config.rollout_batch,
            self.global_step,
            &mut self.rollout_rng,
        )?;
        debug_assert!(fresh.iter().all(|t| t.behavior_version == self.behavior.version));
        let mean_return =
            fresh.iter().map(Trajectory::episode_return).sum::<f64>() / fresh.len() as f64;

        if let Some(buffer) = self.buffer.as_mut() {
            for t in &fresh {
                let signal = priority_signal(t, &self.policy);
                buffer.insert(t.clone(), signal, self.global_step)?;
            }
        }

        // On-policy step, overlapped with the refresh when allowed. The
        // refresh is keyed to the step count after the on-policy update.
        let refresh_step = self.global_step + 1;
        let mut clip = (0usize, 0usize);
        let refresh: Option<RefreshReport>;
        if self.config.sync_refresh || self.buffer.is_none() {
            let stats = self.gradient_step(fresh.iter().map(|t| (t, 1.0)).collect())?;
            clip = (clip.0 + stats.clipped_steps, clip.1 + stats.steps);
            refresh = self
                .buffer
                .as_mut()
                .map(|b| b.refresh_priorities_with(refresh_step, self.refresh_threads));
        } else {
            let buffer = self.buffer.take().expect("checked above");
            let threads = self.refresh_threads;
            let (stats, plan, elapsed) = thread::scope(|s| {
                let worker = s.spawn(|| {
                    let start = std::time::Instant::now();
                    let plan = buffer.plan_refresh(refresh_step, threads);
                    (plan, start.elapsed())
                });
                let stats = self.gradient_step(fresh.iter().map(|t| (t, 1.0)).collect());
                let (plan, elapsed) = worker.join().expect("refresh worker panicked");
                (stats, plan, elapsed)
            });
            let stats = stats?;
            clip = (clip.0 + stats.clipped_steps, clip.1 + stats.steps);
            let mut buffer = buffer;
            let scanned = buffer.len();
            let applied = buffer.apply_refresh(plan);
            debug_assert!(applied);
            self.buffer = Some(buffer);
            refresh = Some(RefreshReport {
                entries_scanned: scanned,
                wall_time: elapsed,
            });
        }

        let mut ages = Vec::new();
        let mut weights = Vec::new();
        if self.buffer.is_some() {
            for _ in 0..self.config.replay_ratio_k {
                let beta = beta_at(self.global_step, &self.config.priority);
                let batch = self.buffer.as_ref().expect("replay enabled").sample_stratified(
                    self.config.batch_size_b,
                    beta,
                    &mut self.sample_rng,
                )?;
                for e in &batch.entries {
                    ages.push((self.global_step - e.trajectory.collection_step) as f64);
                }
                weights.extend_from_slice(&batch.is_weights);
                let items = batch
                    .entries
                    .iter()
                    .zip(&batch.is_weights)
                    .map(|(e, &w)| (e.trajectory.as_ref(), w))
                    .collect();
                let stats = self.gradient_step(items)?;
                clip = (clip.0 + stats.clipped_steps, clip.1 + stats.steps);

                if self.config.priority.base_kind != BaseKind::RewardMagnitude {
                    let buffer = self.buffer.as_mut().expect("replay enabled");
                    for e in &batch.entries {
                        let signal = priority_signal(&e.trajectory, &self.policy);
                        buffer.update_base_priority(e.trajectory_id, signal)?;
                    }
                }
            }
        }

        self.behavior = self.policy.clone();
        self.iteration += 1;

        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Ok(TrainMetrics {
            iteration: self.iteration,
            mean_return,
            mean_sampled_age: mean(&ages),
            mean_is_weight: mean(&weights),
            clip_fraction: if clip.1 == 0 {
                0.0
            } else {
                clip.0 as f64 / clip.1 as f64
            },
            buffer_occupancy: self.buffer.as_ref().map_or(0, ReplayBuffer::len),
            gradient_steps: self.global_step,
            refresh_wall_time: refresh.map_or(0.0, |r| r.wall_time.as_secs_f64()),
        })
    }

    /// Runs `max_iterations` iterations, handing each record to `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(&TrainMetrics)) -> Result<Vec<TrainMetrics>> {
        let mut all = Vec::with_capacity(self.config.max_iterations);
        for _ in 0..self.config.max_iterations {
            let m = self.run_iteration()?;
            sink(&m);
            all.push(m);
        }
        Ok(all)
    }
}

impl std::fmt::Debug for Trainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trainer")
            .field("config", &self.config)
            .field("global_step", &self.global_step)
            .field("iteration", &self.iteration)
            .finish_non_exhaustive()
    }
}

impl From<Vec<String>> for Error {
    fn from(errs: Vec<String>) -> Self {
        Error::Config(errs.join("; "))
    }
}
