use freshreplay::env::{Action, CliffWalking, Environment, FrozenLake};

#[test]
fn frozen_lake_slips_evenly() {
    let mut env = FrozenLake::new();
    env.reset(17);
    // From (2,2) moving down: intended (3,2), sideways (2,1) or (2,3).
    let (intended, left, right) = (14, 9, 11);
    let mut counts = [0u64; 3];
    let n = 1_000_000;
    for _ in 0..n {
        env.place_agent(10);
        let out = env.step(Action::Down).unwrap();
        match out.next_state {
            s if s == intended => counts[0] += 1,
            s if s == left => counts[1] += 1,
            s if s == right => counts[2] += 1,
            s => panic!("unexpected cell {s}"),
        }
    }
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 1.0 / 3.0).abs() <= 0.002, "{counts:?}");
    }
}

#[test]
fn cliff_optimal_path_scores_zero() {
    let mut env = CliffWalking::new();
    env.reset(0);
    let mut plan = vec![Action::Up];
    plan.extend(std::iter::repeat(Action::Right).take(11));
    plan.push(Action::Down);
    let mut ret = 0.0;
    let mut done = false;
    for a in plan {
        let out = env.step(a).unwrap();
        ret += out.reward;
        done = out.done;
    }
    assert!(done);
    assert_eq!(ret, 0.0);
}

#[test]
fn cliff_horizon_counts_resets() {
    let mut env = CliffWalking::new();
    env.reset(0);
    let mut ret = 0.0;
    let mut steps = 0;
    loop {
        let out = env.step(Action::Right).unwrap();
        ret += out.reward;
        steps += 1;
        if out.done {
            assert!(!out.terminal);
            break;
        }
    }
    assert_eq!(steps, 200);
    assert_eq!(ret, -100.0 * 200.0);
}
