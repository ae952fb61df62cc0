use std::fmt::Write as _;
use std::path::Path;

use freshreplay::ess::{drift_ess_curve, linear_logit_drift};
use freshreplay::staleness::{compare, StalenessWorkload};

use crate::error::{CliError, CliResult};
use crate::run::{make_dir, write_file};

pub fn staleness(
    tau: f64,
    reference_tau: f64,
    required_gap: f64,
    seed: u64,
    out: Option<&Path>,
) -> CliResult<()> {
    if !(tau > 0.0) || !(reference_tau > 0.0) {
        return Err(CliError::Config("tau must be positive".into()));
    }
    let workload = StalenessWorkload {
        seed,
        ..StalenessWorkload::default()
    };
    let c = compare(&workload, tau, reference_tau)?;

    let mut csv = String::from(
        "step,exact_age_tau,exact_age_ref,analytic_age_tau,analytic_age_ref,empirical_age_tau,empirical_age_ref\n",
    );
    for (a, b) in c.decayed.rows.iter().zip(&c.reference.rows) {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            a.step, a.exact_age, b.exact_age, a.analytic_age, b.analytic_age, a.empirical_age, b.empirical_age
        );
    }
    if let Some(dir) = out {
        make_dir(dir)?;
        write_file(&dir.join("staleness.csv"), &csv)?;
    }

    let gap = c.gap();
    println!("tau,mean_sampled_age,mean_empirical_age");
    println!("{tau},{:.4},{:.4}", c.decayed.mean_exact_age(), c.decayed.mean_empirical_age());
    println!(
        "{reference_tau},{:.4},{:.4}",
        c.reference.mean_exact_age(),
        c.reference.mean_empirical_age()
    );
    println!("gap {:.2}% (required {:.2}%)", gap * 100.0, required_gap * 100.0);
    if gap >= required_gap {
        Ok(())
    } else {
        Err(CliError::StalenessGate {
            gap,
            required: required_gap,
        })
    }
}

pub fn ess(actions: usize, gap: f64, steps: usize, n: f64, out: Option<&Path>) -> CliResult<()> {
    let path = linear_logit_drift(actions, gap, steps)?;
    let curve = drift_ess_curve(&path, 0, n)?;
    let mut csv = String::from("delta,var_rho,chi2,kl,renyi2,ess,ess_kl_bound\n");
    for p in curve {
        let r = p.report;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            p.delta, r.var_rho, r.chi2, r.kl, r.renyi2, r.ess, r.ess_kl_bound
        );
    }
    match out {
        Some(file) => write_file(file, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
