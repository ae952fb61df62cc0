use std::time::Instant;

use freshreplay::{EvictionPolicy, PriorityConfig, PrioritySignal, ReplayBuffer, Step, Trajectory};

use crate::error::{CliError, CliResult};

/// A full buffer of `n` single-step episodes spread over `n / 10` steps.
pub fn filled_buffer(n: usize) -> ReplayBuffer {
    let mut b = ReplayBuffer::new(n, PriorityConfig::default(), EvictionPolicy::LowestEffectivePriority);
    for i in 0..n as u64 {
        let reward = (i % 17) as f64 * 0.25;
        let step = Step {
            state_id: 0,
            action_id: 0,
            reward,
            behavior_logprob: 0.0,
            next_state_id: 0,
            terminal: true,
        };
        let t = Trajectory::new(vec![step], i / 10, 0).expect("valid episode");
        b.insert(t, PrioritySignal::reward(reward), i / 10).expect("insert");
    }
    b
}

/// Median refresh wall time in milliseconds over `runs` refreshes.
pub fn median_refresh_ms(n: usize, runs: usize, threads: usize) -> f64 {
    let mut b = filled_buffer(n);
    let base = b.current_step();
    let mut times: Vec<f64> = (0..runs.max(1) as u64)
        .map(|k| {
            let start = Instant::now();
            let report = b.refresh_priorities_with(base + 1 + k, threads);
            debug_assert_eq!(report.entries_scanned, n);
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let m = times.len() / 2;
    if times.len() % 2 == 0 {
        (times[m - 1] + times[m]) / 2.0
    } else {
        times[m]
    }
}

/// Coefficient of determination of a least-squares line through the points.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

pub fn run(n: usize, runs: usize, budget_ms: f64, scaling: bool, threads: usize) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::Config("--n must be positive".into()));
    }
    let median = median_refresh_ms(n, runs, threads);
    println!("n={n} runs={runs} threads={threads} median_ms={median:.3}");
    if scaling {
        let sizes = [10_000.0, 30_000.0, 100_000.0];
        let times: Vec<f64> = sizes
            .iter()
            .map(|&s| median_refresh_ms(s as usize, runs, threads))
            .collect();
        for (s, t) in sizes.iter().zip(&times) {
            println!("scaling n={s} median_ms={t:.3}");
        }
        println!("scaling r2={:.4}", r_squared(&sizes, &times));
    }
    if median <= budget_ms {
        Ok(())
    } else {
        Err(CliError::RefreshBudget {
            median_ms: median,
            budget_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_squared_of_a_line_is_one() {
        assert!((r_squared(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 3.0, 1.0]) < 0.1);
    }
}
