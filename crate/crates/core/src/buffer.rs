//! Trajectory-level prioritized replay buffer.
//!
//! Each slot holds one complete episode. Sampling is proportional to
//! `p^alpha` where `p` is the freshness-aware priority, drawn with one
//! uniform position per equal-mass stratum. Importance weights are
//! normalized by the largest weight over the whole buffer, which comes from
//! the smallest leaf in the min tracker.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::config::{BaseKind, EvictionPolicy, PriorityConfig};
use crate::error::{Error, Result};
use crate::priority::{base_priority, effective_priority, PrioritySignal};
use crate::sum_tree::{MinTree, SumTree};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub struct BufferEntry {
    pub trajectory_id: u64,
    pub trajectory: Arc<Trajectory>,
    pub base_priority: f64,
    pub effective_priority: f64,
    pub signal: PrioritySignal,
    pub slot: usize,
}

/// Result of a successful insert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inserted {
    pub trajectory_id: u64,
    pub slot: usize,
    pub evicted: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct PrioritizedBatch {
    pub entries: Vec<BufferEntry>,
    /// `P(i)` of each drawn entry at sampling time.
    pub sample_probs: Vec<f64>,
    pub is_weights: Vec<f64>,
    /// Prefix-sum position that selected each entry.
    pub positions: Vec<f64>,
    /// Total transformed mass at sampling time.
    pub total_mass: f64,
    pub buffer_size_at_sample: usize,
}

impl PrioritizedBatch {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefreshReport {
    pub entries_scanned: usize,
    pub wall_time: Duration,
}

/// Recomputed priorities and index structures, built without mutating the
/// buffer. Applying a plan is an O(N) copy with no arithmetic.
#[derive(Debug, Clone)]
pub struct RefreshPlan {
    current_step: u64,
    effective: Vec<f64>,
    tree: SumTree,
    evict: MinTree,
    generation: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    priority: PriorityConfig,
    capacity: usize,
    eviction: EvictionPolicy,
    slots: Vec<BufferEntry>,
    tree: SumTree,
    evict: MinTree,
    fifo: VecDeque<u64>,
    ids: HashMap<u64, usize>,
    next_id: u64,
    current_step: u64,
    /// Bumped by every mutation; a stale refresh plan is rejected.
    generation: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, priority: PriorityConfig, eviction: EvictionPolicy) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            priority,
            capacity,
            eviction,
            slots: Vec::with_capacity(capacity.min(1 << 16)),
            tree: SumTree::new(capacity),
            evict: MinTree::new(capacity),
            fifo: VecDeque::new(),
            ids: HashMap::new(),
            next_id: 0,
            current_step: 0,
            generation: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn priority_config(&self) -> &PriorityConfig {
        &self.priority
    }

    /// Latest step seen by `insert` or `refresh_priorities`.
    pub fn current_step(&self) -> u64 {
        self.current_step
    }

    pub fn total_mass(&self) -> f64 {
        self.tree.total()
    }

    pub fn entries(&self) -> impl Iterator<Item = &BufferEntry> {
        self.slots.iter()
    }

    pub fn get(&self, trajectory_id: u64) -> Option<&BufferEntry> {
        self.ids.get(&trajectory_id).map(|&s| &self.slots[s])
    }

    /// Transformed priority `p^alpha` stored in a slot.
    pub fn leaf(&self, slot: usize) -> f64 {
        self.tree.leaf(slot)
    }

    fn transform(&self, p: f64) -> f64 {
        p.powf(self.priority.alpha)
    }

    fn age(&self, trajectory: &Trajectory, current_step: u64) -> f64 {
        current_step.saturating_sub(trajectory.collection_step) as f64
    }

    /// Stores an episode, evicting one entry first when full.
    pub fn insert(
        &mut self,
        trajectory: Trajectory,
        signal: PrioritySignal,
        current_step: u64,
    ) -> Result<Inserted> {
        if trajectory.collection_step > current_step {
            return Err(Error::InvalidTrajectory(format!(
                "collected at step {} after current step {current_step}",
                trajectory.collection_step
            )));
        }
        let base = base_priority(&signal, &self.priority)?;
        let eff = effective_priority(base, self.age(&trajectory, current_step), &self.priority)?;

        let (slot, evicted) = if self.slots.len() < self.capacity {
            (self.slots.len(), None)
        } else {
            let victim = self.pick_victim();
            let slot = self.ids.remove(&victim).expect("victim is stored");
            (slot, Some(victim))
        };

        let id = self.next_id;
        self.next_id += 1;
        let entry = BufferEntry {
            trajectory_id: id,
            trajectory: Arc::new(trajectory),
            base_priority: base,
            effective_priority: eff,
            signal,
            slot,
        };
        if slot == self.slots.len() {
            self.slots.push(entry);
        } else {
            self.slots[slot] = entry;
        }
        self.ids.insert(id, slot);
        if self.eviction == EvictionPolicy::Fifo {
            self.fifo.push_back(id);
        }
        self.tree.set_leaf(slot, self.transform(eff))?;
        self.evict.set(slot, eff, id);
        self.current_step = self.current_step.max(current_step);
        self.generation += 1;
        Ok(Inserted {
            trajectory_id: id,
            slot,
            evicted,
        })
    }

    fn pick_victim(&mut self) -> u64 {
        match self.eviction {
            EvictionPolicy::Fifo => self.fifo.pop_front().expect("full buffer has a fifo head"),
            EvictionPolicy::LowestEffectivePriority => {
                let (_, slot) = self.evict.min().expect("full buffer has a minimum");
                self.slots[slot].trajectory_id
            }
        }
    }

    /// Draws `batch_size` entries, one per equal-mass stratum of the total
    /// transformed priority. Duplicates are allowed.
    pub fn sample_stratified<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<PrioritizedBatch> {
        if batch_size == 0 {
            return Err(Error::ZeroBatch);
        }
        if self.slots.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let total = self.tree.total();
        if !(total > 0.0) {
            return Err(Error::EmptyTree);
        }
        let n = self.slots.len() as f64;
        let p_min = self.tree.min_transformed()? / total;
        let max_weight = (n * p_min).powf(-beta);
        let segment = total / batch_size as f64;
        let below_total = f64::from_bits(total.to_bits() - 1);

        let mut batch = PrioritizedBatch {
            entries: Vec::with_capacity(batch_size),
            sample_probs: Vec::with_capacity(batch_size),
            is_weights: Vec::with_capacity(batch_size),
            positions: Vec::with_capacity(batch_size),
            total_mass: total,
            buffer_size_at_sample: self.slots.len(),
        };
        for k in 0..batch_size {
            let u: f64 = rng.gen();
            let x = ((k as f64 + u) * segment).min(below_total);
            let slot = self.tree.prefix_find(x)?;
            let p = self.tree.leaf(slot) / total;
            let w = (n * p).powf(-beta) / max_weight;
            batch.entries.push(self.slots[slot].clone());
            batch.sample_probs.push(p);
            batch.is_weights.push(w);
            batch.positions.push(x);
        }
        Ok(batch)
    }

    /// Exact sampling probability of every stored entry, by trajectory id.
    pub fn sampling_distribution(&self) -> Vec<(u64, f64)> {
        let total = self.tree.total();
        let mut out: Vec<(u64, f64)> = self
            .slots
            .iter()
            .map(|e| (e.trajectory_id, self.tree.leaf(e.slot) / total))
            .collect();
        out.sort_by_key(|&(id, _)| id);
        out
    }

    /// Recomputes priorities for the current step without mutating the buffer.
    pub fn plan_refresh(&self, current_step: u64, threads: usize) -> RefreshPlan {
        let effective = self.compute_effective(current_step, threads.max(1));
        let leaves: Vec<f64> = effective.iter().map(|&p| self.transform(p)).collect();
        let tree = SumTree::from_leaves(self.capacity, &leaves).expect("finite positive leaves");
        let mut evict = MinTree::new(self.capacity);
        for (e, &p) in self.slots.iter().zip(&effective) {
            evict.set_leaf_raw(e.slot, p, e.trajectory_id);
        }
        evict.rebuild();
        RefreshPlan {
            current_step,
            effective,
            tree,
            evict,
            generation: self.generation,
        }
    }

    fn compute_effective(&self, current_step: u64, threads: usize) -> Vec<f64> {
        let one = |e: &BufferEntry| {
            effective_priority(
                e.base_priority,
                self.age(&e.trajectory, current_step),
                &self.priority,
            )
            .expect("stored bases are positive")
        };
        if threads <= 1 || self.slots.len() < 4096 {
            return self.slots.iter().map(one).collect();
        }
        let chunk = self.slots.len().div_ceil(threads);
        thread::scope(|s| {
            let handles: Vec<_> = self
                .slots
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("refresh worker panicked"))
                .collect()
        })
    }

    /// Installs a plan built by [`ReplayBuffer::plan_refresh`]. Returns false
    /// and leaves the buffer untouched when the buffer changed in between.
    pub fn apply_refresh(&mut self, plan: RefreshPlan) -> bool {
        if plan.generation != self.generation {
            return false;
        }
        for (e, p) in self.slots.iter_mut().zip(plan.effective) {
            e.effective_priority = p;
        }
        self.tree = plan.tree;
        self.evict = plan.evict;
        self.current_step = self.current_step.max(plan.current_step);
        self.generation += 1;
        true
    }

    /// Recomputes every effective priority at `current_step` and rebuilds
    /// the index from scratch.
    pub fn refresh_priorities(&mut self, current_step: u64) -> RefreshReport {
        self.refresh_priorities_with(current_step, 1)
    }

    pub fn refresh_priorities_with(&mut self, current_step: u64, threads: usize) -> RefreshReport {
        let start = Instant::now();
        let plan = self.plan_refresh(current_step, threads);
        let applied = self.apply_refresh(plan);
        debug_assert!(applied);
        RefreshReport {
            entries_scanned: self.slots.len(),
            wall_time: start.elapsed(),
        }
    }

    /// Replaces the base-priority signal of one entry. Only valid for the
    /// advantage and TD-error variants; reward bases are fixed at collection.
    pub fn update_base_priority(&mut self, trajectory_id: u64, signal: PrioritySignal) -> Result<()> {
        if self.priority.base_kind == BaseKind::RewardMagnitude {
            return Err(Error::FrozenBase);
        }
        let slot = *self
            .ids
            .get(&trajectory_id)
            .ok_or(Error::UnknownTrajectory(trajectory_id))?;
        let base = base_priority(&signal, &self.priority)?;
        let age = self.age(&self.slots[slot].trajectory, self.current_step);
        let eff = effective_priority(base, age, &self.priority)?;
        let leaf = self.transform(eff);
        let entry = &mut self.slots[slot];
        entry.signal = signal;
        entry.base_priority = base;
        entry.effective_priority = eff;
        self.tree.set_leaf(slot, leaf)?;
        self.evict.set(slot, eff, trajectory_id);
        self.generation += 1;
        Ok(())
    }

    /// Line-oriented dump of every entry, ordered by trajectory id.
    ///
    /// ```text
    /// # freshreplay-snapshot v1
    /// # trajectory_id<TAB>collection_step<TAB>base_priority<TAB>effective_priority
    /// 0 0 1.01 0.3715582355
    /// ```
    ///
    /// Floats use the shortest representation that parses back to the same bits.
    pub fn snapshot(&self) -> String {
        let mut rows: Vec<&BufferEntry> = self.slots.iter().collect();
        rows.sort_by_key(|e| e.trajectory_id);
        let mut out = String::from(SNAPSHOT_HEADER);
        for e in rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.trajectory_id,
                e.trajectory.collection_step,
                e.base_priority,
                e.effective_priority
            );
        }
        out
    }
}

const SNAPSHOT_HEADER: &str = "# freshreplay-snapshot v1\n\
# trajectory_id\tcollection_step\tbase_priority\teffective_priority\n";

/// One row of a buffer snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub trajectory_id: u64,
    pub collection_step: u64,
    pub base_priority: f64,
    pub effective_priority: f64,
}

pub fn parse_snapshot(text: &str) -> Result<Vec<SnapshotRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("# freshreplay-snapshot v1") {
        return Err(Error::Config("missing snapshot header".into()));
    }
    let bad = |l: &str| Error::Config(format!("malformed snapshot row `{l}`"));
    lines
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(l));
            }
            Ok(SnapshotRow {
                trajectory_id: f[0].parse().map_err(|_| bad(l))?,
                collection_step: f[1].parse().map_err(|_| bad(l))?,
                base_priority: f[2].parse().map_err(|_| bad(l))?,
                effective_priority: f[3].parse().map_err(|_| bad(l))?,
            })
        })
        .collect()
}

/// A buffer shared between a training loop, samplers and a background
/// refresher.
///
/// Refreshes build a complete [`RefreshPlan`] under the read lock and swap it
/// in under the write lock, so samplers observe either the old or the new
/// priorities in full and the write lock is held only for the swap.
#[derive(Debug, Clone)]
pub struct SharedBuffer {
    inner: Arc<RwLock<ReplayBuffer>>,
}

impl SharedBuffer {
    pub fn new(buffer: ReplayBuffer) -> Self {
        Self {
            inner: Arc::new(RwLock::new(buffer)),
        }
    }

    pub fn insert(
        &self,
        trajectory: Trajectory,
        signal: PrioritySignal,
        current_step: u64,
    ) -> Result<Inserted> {
        self.inner
            .write()
            .expect("buffer lock poisoned")
            .insert(trajectory, signal, current_step)
    }

    pub fn sample_stratified<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<PrioritizedBatch> {
        self.inner
            .read()
            .expect("buffer lock poisoned")
            .sample_stratified(batch_size, beta, rng)
    }

    /// Runs a full refresh on a background thread.
    pub fn refresh_in_background(
        &self,
        current_step: u64,
        threads: usize,
    ) -> thread::JoinHandle<RefreshReport> {
        let inner = Arc::clone(&self.inner);
        thread::spawn(move || loop {
            let start = Instant::now();
            let (plan, scanned) = {
                let guard = inner.read().expect("buffer lock poisoned");
                (guard.plan_refresh(current_step, threads), guard.len())
            };
            if inner.write().expect("buffer lock poisoned").apply_refresh(plan) {
                return RefreshReport {
                    entries_scanned: scanned,
                    wall_time: start.elapsed(),
                };
            }
        })
    }

    pub fn with<T>(&self, f: impl FnOnce(&ReplayBuffer) -> T) -> T {
        f(&self.inner.read().expect("buffer lock poisoned"))
    }

    pub fn with_mut<T>(&self, f: impl FnOnce(&mut ReplayBuffer) -> T) -> T {
        f(&mut self.inner.write().expect("buffer lock poisoned"))
    }
}
