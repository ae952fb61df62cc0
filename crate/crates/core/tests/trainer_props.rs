use freshreplay::policy::{batch_gradient, batch_loss, LossConfig, PolicyState, PreparedBatch};
use freshreplay::{EnvKind, Method, RunConfig, Step, Trainer, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_policy(rng: &mut ChaCha8Rng, states: usize, actions: usize) -> PolicyState {
    let mut p = PolicyState::new(states, actions);
    p.logits.iter_mut().for_each(|l| *l = rng.gen_range(-2.0..2.0));
    p.value_baseline.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    p
}

fn random_episode(rng: &mut ChaCha8Rng, behavior: &PolicyState) -> Trajectory {
    let len = rng.gen_range(1..6);
    let mut s = rng.gen_range(0..behavior.n_states());
    let steps = (0..len)
        .map(|t| {
            let (a, lp) = behavior.sample_action(s, rng);
            let next = rng.gen_range(0..behavior.n_states());
            let step = Step {
                state_id: s,
                action_id: a,
                reward: rng.gen_range(-1.0..1.0),
                behavior_logprob: lp,
                next_state_id: next,
                terminal: t + 1 == len,
            };
            s = next;
            step
        })
        .collect();
    Trajectory::new(steps, 0, 0).unwrap()
}

fn near_clip_boundary(policy: &PolicyState, episodes: &[Trajectory], eps: f64) -> bool {
    episodes.iter().flat_map(Trajectory::steps).any(|s| {
        let rho = (policy.log_prob(s.state_id, s.action_id) - s.behavior_logprob).exp();
        (rho - (1.0 - eps)).abs() < 1e-3 || (rho - (1.0 + eps)).abs() < 1e-3
    })
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = LossConfig {
        clip_epsilon: 0.2,
        advantage_clip: 1.5,
        value_coef: 0.5,
    };
    let h = 1e-5;
    let mut instances = 0;
    let mut worst: f64 = 0.0;
    while instances < 100 {
        let policy = random_policy(&mut rng, 3, 4);
        let mut behavior = policy.clone();
        behavior.logits.iter_mut().for_each(|l| *l += rng.gen_range(-0.3..0.3));
        let episodes: Vec<Trajectory> = (0..rng.gen_range(1..5))
            .map(|_| random_episode(&mut rng, &behavior))
            .collect();
        if near_clip_boundary(&policy, &episodes, cfg.clip_epsilon) {
            continue;
        }
        let items = episodes.iter().map(|e| (e, rng.gen_range(0.1..1.0))).collect();
        let batch = PreparedBatch::new(&policy, items, cfg.advantage_clip).unwrap();
        let (grad, _) = batch_gradient(&policy, &batch, &cfg);

        let numeric = |edit: &dyn Fn(&mut PolicyState, f64)| {
            let (mut up, mut down) = (policy.clone(), policy.clone());
            edit(&mut up, h);
            edit(&mut down, -h);
            (batch_loss(&up, &batch, &cfg) - batch_loss(&down, &batch, &cfg)) / (2.0 * h)
        };
        let mut check = |analytic: f64, num: f64| {
            let scale = analytic.abs().max(num.abs());
            let err = if scale < 1e-8 { (analytic - num).abs() } else { (analytic - num).abs() / scale };
            worst = worst.max(err);
        };
        for i in 0..policy.logits.len() {
            check(grad.logits[i], numeric(&|p, d| p.logits[i] += d));
        }
        for i in 0..policy.value_baseline.len() {
            check(grad.value[i], numeric(&|p, d| p.value_baseline[i] += d));
        }
        instances += 1;
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

fn quick(method: Method, seed: u64) -> RunConfig {
    RunConfig {
        method,
        seed,
        env: EnvKind::FrozenLake,
        rollout_batch: 32,
        batch_size_b: 16,
        buffer_capacity: 500,
        max_iterations: 30,
        learning_rate: 50.0,
        value_coef: 0.01,
        ..RunConfig::default()
    }
}

fn run(cfg: RunConfig) -> (Vec<freshreplay::TrainMetrics>, PolicyState) {
    let mut t = Trainer::new(cfg).unwrap();
    let mut m = t.run(|_| {}).unwrap();
    // Timing is the only nondeterministic field.
    m.iter_mut().for_each(|x| x.refresh_wall_time = 0.0);
    (m, t.policy().clone())
}

#[test]
fn infinite_tau_is_standard_per() {
    for seed in [1, 2] {
        let mut fresh = quick(Method::FreshPer, seed);
        fresh.priority.tau = f64::INFINITY;
        let (a, pa) = run(fresh);
        let (b, pb) = run(quick(Method::StandardPer, seed));
        assert_eq!(a, b);
        assert_eq!(pa, pb);
    }
}

#[test]
fn zero_replay_ratio_is_on_policy() {
    for method in [Method::FreshPer, Method::StandardPer] {
        let mut cfg = quick(method, 3);
        cfg.replay_ratio_k = 0;
        let (a, pa) = run(cfg);
        let (b, pb) = run(quick(Method::OnPolicy, 3));
        let returns = |m: &[freshreplay::TrainMetrics]| m.iter().map(|x| x.mean_return).collect::<Vec<_>>();
        assert_eq!(returns(&a), returns(&b));
        assert_eq!(pa, pb);
    }
}

#[test]
fn decay_changes_what_is_replayed() {
    let mut short = quick(Method::FreshPer, 4);
    short.priority.tau = 5.0;
    let (a, _) = run(short);
    let (b, _) = run(quick(Method::StandardPer, 4));
    let age = |m: &[freshreplay::TrainMetrics]| m.iter().filter_map(|x| x.mean_sampled_age).sum::<f64>();
    assert!(age(&a) < age(&b));
}

#[test]
fn behavior_snapshot_tracks_policy_each_iteration() {
    let mut t = Trainer::new(quick(Method::FreshPer, 5)).unwrap();
    for i in 1..=5u64 {
        let m = t.run_iteration().unwrap();
        assert_eq!(m.gradient_steps, 3 * i);
        assert_eq!(t.behavior(), t.policy());
        let newest = t.buffer().unwrap().entries().map(|e| e.trajectory.behavior_version).max();
        assert_eq!(newest, Some(3 * (i - 1)));
    }
}

#[test]
fn same_seed_same_run() {
    let (a, pa) = run(quick(Method::FreshPer, 6));
    let (b, pb) = run(quick(Method::FreshPer, 6));
    assert_eq!(a, b);
    assert_eq!(pa, pb);
}
