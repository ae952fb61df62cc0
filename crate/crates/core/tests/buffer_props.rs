use freshreplay::buffer::parse_snapshot;
use freshreplay::priority::{base_priority, effective_priority};
use freshreplay::{
    EvictionPolicy, PriorityConfig, PrioritySignal, ReplayBuffer, SharedBuffer, Step, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn traj(reward: f64, collection_step: u64) -> Trajectory {
    let step = Step {
        state_id: 0,
        action_id: 0,
        reward,
        behavior_logprob: 0.0,
        next_state_id: 0,
        terminal: true,
    };
    Trajectory::new(vec![step], collection_step, 0).unwrap()
}

fn filled(rewards: &[f64], cfg: PriorityConfig) -> ReplayBuffer {
    let mut b = ReplayBuffer::new(rewards.len(), cfg, EvictionPolicy::LowestEffectivePriority);
    for &r in rewards {
        b.insert(traj(r, 0), PrioritySignal::reward(r), 0).unwrap();
    }
    b
}

#[test]
fn stratified_draws_match_target_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rewards: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..10.0)).collect();
    let cfg = PriorityConfig::default();
    let buffer = filled(&rewards, cfg);

    let weights: Vec<f64> = rewards
        .iter()
        .map(|r| (r.abs() + cfg.epsilon).powf(cfg.alpha))
        .collect();
    let z: f64 = weights.iter().sum();

    let (batch, batches) = (64, 15_625);
    let draws = (batch * batches) as f64;
    let mut counts = vec![0u64; 64];
    let start = Instant::now();
    for _ in 0..batches {
        for e in buffer.sample_stratified(batch, 0.4, &mut rng).unwrap().entries {
            counts[e.slot] += 1;
        }
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
    for (i, (&c, w)) in counts.iter().zip(&weights).enumerate() {
        let p = w / z;
        let sigma = (draws * p * (1.0 - p)).sqrt();
        let dev = (c as f64 - draws * p).abs();
        assert!(dev <= 4.0 * sigma, "entry {i}: {c} draws vs {:.1} expected", draws * p);
    }
}

#[test]
fn self_normalized_weights_are_unbiased_at_full_correction() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rewards: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..20.0)).collect();
    let f: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..3.0)).collect();
    let buffer = filled(&rewards, PriorityConfig::default());
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..100_000 {
        let b = buffer.sample_stratified(4, 1.0, &mut rng).unwrap();
        for (e, w) in b.entries.iter().zip(&b.is_weights) {
            num += w * f[e.slot];
            den += w;
        }
    }
    let uniform = f.iter().sum::<f64>() / 8.0;
    let est = num / den;
    assert!((est - uniform).abs() <= 0.01 * uniform.abs(), "{est} vs {uniform}");
}

#[test]
fn weights_are_normalized_by_the_global_minimum() {
    let rewards = [0.0, 1.0, 4.0, 9.0, 16.0];
    let buffer = filled(&rewards, PriorityConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let b = buffer.sample_stratified(3, 0.7, &mut rng).unwrap();
        for (e, w) in b.entries.iter().zip(&b.is_weights) {
            assert!(*w > 0.0 && *w <= 1.0);
            if e.slot == 0 {
                assert!((w - 1.0).abs() < 1e-12);
            }
        }
    }
}

struct RefEntry {
    id: u64,
    base: f64,
    collected: u64,
    eff: f64,
}

fn reference_survivors(policy: EvictionPolicy, seed: u64) -> (Vec<u64>, ReplayBuffer) {
    let cfg = PriorityConfig {
        tau: 40.0,
        ..PriorityConfig::default()
    };
    let capacity = 37;
    let mut buffer = ReplayBuffer::new(capacity, cfg, policy);
    let mut reference: Vec<RefEntry> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = 0u64;
    for id in 0..600u64 {
        step += rng.gen_range(0..3);
        // Coarse rewards force ties on priority.
        let r = rng.gen_range(0..6) as f64;
        let signal = PrioritySignal::reward(r);
        if rng.gen_bool(0.2) {
            buffer.refresh_priorities(step);
            for e in &mut reference {
                e.eff = effective_priority(e.base, (step - e.collected) as f64, &cfg).unwrap();
            }
        }
        let collected = step.saturating_sub(rng.gen_range(0..5));
        buffer.insert(traj(r, collected), signal, step).unwrap();
        if reference.len() == capacity {
            let victim = match policy {
                EvictionPolicy::Fifo => 0,
                EvictionPolicy::LowestEffectivePriority => {
                    let mut best = 0;
                    for (i, e) in reference.iter().enumerate() {
                        let b = &reference[best];
                        if e.eff < b.eff || (e.eff == b.eff && e.id < b.id) {
                            best = i;
                        }
                    }
                    best
                }
            };
            reference.remove(victim);
        }
        let base = base_priority(&signal, &cfg).unwrap();
        reference.push(RefEntry {
            id,
            base,
            collected,
            eff: effective_priority(base, (step - collected) as f64, &cfg).unwrap(),
        });
    }
    let mut ids: Vec<u64> = reference.iter().map(|e| e.id).collect();
    ids.sort_unstable();
    (ids, buffer)
}

#[test]
fn eviction_matches_reference_simulation() {
    for policy in [EvictionPolicy::LowestEffectivePriority, EvictionPolicy::Fifo] {
        for seed in 0..5 {
            let (expected, buffer) = reference_survivors(policy, seed);
            assert_eq!(buffer.len(), 37);
            let mut got: Vec<u64> = buffer.entries().map(|e| e.trajectory_id).collect();
            got.sort_unstable();
            assert_eq!(got, expected, "{policy} seed {seed}");
        }
    }
}

fn big_buffer(n: usize) -> ReplayBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let mut b = ReplayBuffer::new(n, PriorityConfig::default(), EvictionPolicy::LowestEffectivePriority);
    for i in 0..n as u64 {
        let r = rng.gen_range(0.0..5.0);
        b.insert(traj(r, i / 10), PrioritySignal::reward(r), i / 10).unwrap();
    }
    b
}

#[test]
fn refresh_at_ten_thousand_entries() {
    let mut b = big_buffer(10_000);
    let report = b.refresh_priorities(1500);
    assert_eq!(report.entries_scanned, 10_000);
    let tau = b.priority_config().tau;
    for e in b.entries() {
        let age = (1500 - e.trajectory.collection_step) as f64;
        let want = e.base_priority * (-age / tau).exp();
        assert!((e.effective_priority - want).abs() <= 1e-12 * want);
    }
    let total: f64 = b.entries().map(|e| e.effective_priority.powf(0.6)).sum();
    assert!((b.total_mass() - total).abs() <= 1e-9 * total);
}

#[test]
fn refresh_of_one_hundred_thousand_entries_is_fast() {
    let mut b = big_buffer(100_000);
    let mut times: Vec<f64> = (0..5)
        .map(|k| {
            let r = b.refresh_priorities(10_000 + k);
            assert_eq!(r.entries_scanned, 100_000);
            r.wall_time.as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    assert!(times[2] <= 0.1, "median {:.1} ms", times[2] * 1e3);
}

#[test]
fn threaded_refresh_matches_single_threaded() {
    let mut a = big_buffer(5000);
    let mut b = a.clone();
    a.refresh_priorities(900);
    b.refresh_priorities_with(900, 4);
    assert_eq!(a.snapshot(), b.snapshot());
}

#[test]
fn samplers_see_old_or_new_priorities_in_full() {
    let mut inner = big_buffer(20_000);
    let before = inner.clone();
    let shared = SharedBuffer::new(inner.clone());
    inner.refresh_priorities(3000);
    let after_total = inner.total_mass();
    let before_total = before.total_mass();

    let handle = shared.refresh_in_background(3000, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let b = shared.sample_stratified(16, 0.4, &mut rng).unwrap();
        assert!(b.total_mass == before_total || b.total_mass == after_total);
    }
    let report = handle.join().unwrap();
    assert_eq!(report.entries_scanned, 20_000);
    assert_eq!(shared.with(|b| b.snapshot()), inner.snapshot());
    assert_eq!(parse_snapshot(&inner.snapshot()).unwrap().len(), 20_000);
}

#[test]
fn background_refresh_retries_after_concurrent_insert() {
    let shared = SharedBuffer::new(big_buffer(2000));
    let handle = shared.refresh_in_background(500, 1);
    shared.insert(traj(3.0, 400), PrioritySignal::reward(3.0), 450).unwrap();
    handle.join().unwrap();
    shared.with(|b| {
        assert_eq!(b.current_step(), 500);
        assert_eq!(b.len(), 2000);
        assert!(b.get(2000).is_some());
    });
}
