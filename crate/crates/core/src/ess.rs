//! Importance ratios, divergences and effective sample size over finite
//! supports, computed by exact enumeration.
//!
//! All logarithms are natural. Terms with zero target mass contribute zero
//! to the KL divergence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// A probability vector over a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes arbitrary non-negative masses.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidDistribution("weights must have positive finite mass".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    /// Softmax of logits, computed with the max subtracted.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        Self::from_weights(&w)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn check_support(target: &DiscreteDist, behavior: &DiscreteDist) -> Result<()> {
    if target.len() != behavior.len() {
        return Err(Error::InvalidDistribution(format!(
            "support sizes differ: {} vs {}",
            target.len(),
            behavior.len()
        )));
    }
    match target
        .probs
        .iter()
        .zip(&behavior.probs)
        .position(|(&p, &q)| p > 0.0 && q == 0.0)
    {
        Some(i) => Err(Error::SupportViolation(i)),
        None => Ok(()),
    }
}

/// `target / behavior` per support point; zero where both are zero.
pub fn importance_ratios(target: &DiscreteDist, behavior: &DiscreteDist) -> Result<Vec<f64>> {
    check_support(target, behavior)?;
    Ok(target
        .probs
        .iter()
        .zip(&behavior.probs)
        .map(|(&p, &q)| if q > 0.0 { p / q } else { 0.0 })
        .collect())
}

/// Expectation of the ratios under the behavior distribution.
pub fn mean_ratio(behavior: &DiscreteDist, ratios: &[f64]) -> f64 {
    behavior.probs.iter().zip(ratios).map(|(q, r)| q * r).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub var_rho: f64,
    pub chi2: f64,
    pub kl: f64,
    pub renyi2: f64,
    pub ess: f64,
    pub n: f64,
    pub ess_kl_bound: f64,
}

pub fn kl_divergence(target: &DiscreteDist, behavior: &DiscreteDist) -> Result<f64> {
    check_support(target, behavior)?;
    Ok(target
        .probs
        .iter()
        .zip(&behavior.probs)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &q)| p * (p / q).ln())
        .sum::<f64>()
        .max(0.0))
}

/// Every divergence between `target` and `behavior`, with the ESS of `n`
/// importance-weighted samples.
pub fn divergence_report(
    target: &DiscreteDist,
    behavior: &DiscreteDist,
    n: f64,
) -> Result<DivergenceReport> {
    if !(n >= 1.0) {
        return Err(Error::InvalidWeights);
    }
    let rho = importance_ratios(target, behavior)?;
    let q = &behavior.probs;

    // Variance from raw moments.
    let m1: f64 = q.iter().zip(&rho).map(|(q, r)| q * r).sum();
    let m2: f64 = q.iter().zip(&rho).map(|(q, r)| q * r * r).sum();
    let var_rho = (m2 - m1 * m1).max(0.0);

    // Chi-square from squared deviations around one.
    let chi2: f64 = q
        .iter()
        .zip(&rho)
        .map(|(q, r)| q * (r - 1.0) * (r - 1.0))
        .sum();

    // Renyi-2 straight from the ratio of squared target mass.
    let renyi2 = target
        .probs
        .iter()
        .zip(q)
        .filter(|(&p, _)| p > 0.0)
        .map(|(p, q)| p * p / q)
        .sum::<f64>()
        .ln()
        .max(0.0);

    let kl = kl_divergence(target, behavior)?;
    Ok(DivergenceReport {
        var_rho,
        chi2,
        kl,
        renyi2,
        ess: n / (1.0 + var_rho),
        n,
        ess_kl_bound: n * (-kl).exp(),
    })
}

/// `(sum w)^2 / sum w^2` for sampled weights.
pub fn empirical_ess(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidWeights);
    }
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    Ok((s * s / s2).min(weights.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub delta: usize,
    pub report: DivergenceReport,
}

/// Divergence between `path[behavior_index + delta]` and
/// `path[behavior_index]` for every available `delta`, starting at zero.
pub fn drift_ess_curve(
    path: &[DiscreteDist],
    behavior_index: usize,
    n: f64,
) -> Result<Vec<DriftPoint>> {
    if path.len() < 2 {
        return Err(Error::InvalidDistribution("policy path needs at least two points".into()));
    }
    if behavior_index >= path.len() {
        return Err(Error::OutOfRange {
            what: "behavior",
            index: behavior_index,
            len: path.len(),
        });
    }
    let behavior = &path[behavior_index];
    path[behavior_index..]
        .iter()
        .enumerate()
        .map(|(delta, target)| {
            Ok(DriftPoint {
                delta,
                report: divergence_report(target, behavior, n)?,
            })
        })
        .collect()
}

/// A policy over `k` actions whose first logit grows by `gap` per step,
/// for `steps + 1` points.
pub fn linear_logit_drift(k: usize, gap: f64, steps: usize) -> Result<Vec<DiscreteDist>> {
    if k < 2 {
        return Err(Error::InvalidDistribution("need at least two actions".into()));
    }
    (0..=steps)
        .map(|d| {
            let mut logits = vec![0.0; k];
            logits[0] = gap * d as f64;
            DiscreteDist::softmax(&logits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: &[f64]) -> DiscreteDist {
        DiscreteDist::new(p.to_vec()).unwrap()
    }

    #[test]
    fn identical_policies_have_unit_ratios() {
        let u = DiscreteDist::uniform(4).unwrap();
        assert_eq!(importance_ratios(&u, &u).unwrap(), vec![1.0; 4]);
        let r = divergence_report(&u, &u, 100.0).unwrap();
        assert_eq!(r.var_rho, 0.0);
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.kl, 0.0);
        assert_eq!(r.ess, 100.0);
    }

    #[test]
    fn two_point_ratios() {
        let r = importance_ratios(&d(&[0.8, 0.2]), &d(&[0.5, 0.5])).unwrap();
        assert!((r[0] - 1.6).abs() < 1e-15 && (r[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn support_violation() {
        assert_eq!(
            importance_ratios(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])),
            Err(Error::SupportViolation(1))
        );
        // Behavior mass where target has none is fine.
        assert!(importance_ratios(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).is_ok());
    }

    #[test]
    fn two_point_report() {
        let r = divergence_report(&d(&[0.8, 0.2]), &d(&[0.5, 0.5]), 100.0).unwrap();
        // 0.8 ln 1.6 + 0.2 ln 0.4 and friends, evaluated by hand.
        assert!((r.var_rho - 0.36).abs() < 1e-4);
        assert!((r.chi2 - 0.36).abs() < 1e-4);
        assert!((r.renyi2 - 0.307_485).abs() < 1e-4);
        assert!((r.kl - 0.192_745).abs() < 1e-4);
        assert!((r.ess - 73.5294).abs() < 1e-4);
        assert!((r.ess_kl_bound - 82.469_244).abs() < 1e-4);
    }

    #[test]
    fn zero_target_mass_contributes_nothing_to_kl() {
        let kl = kl_divergence(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn empirical_ess_examples() {
        assert_eq!(empirical_ess(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(empirical_ess(&[2.0, 2.0]).unwrap(), 2.0);
        assert!((empirical_ess(&[3.0, 1.0]).unwrap() - 1.6).abs() < 1e-15);
        assert!(empirical_ess(&[]).is_err());
        assert!(empirical_ess(&[1.0, 0.0]).is_err());
        assert!(empirical_ess(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn constant_path_keeps_full_ess() {
        let p = d(&[0.3, 0.7]);
        let curve = drift_ess_curve(&[p.clone(), p.clone(), p], 0, 50.0).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve.iter().all(|c| c.report.ess == 50.0));
    }

    #[test]
    fn drifting_softmax_loses_ess_within_kl_bound() {
        let path = linear_logit_drift(2, 0.1, 50).unwrap();
        let curve = drift_ess_curve(&path, 0, 100.0).unwrap();
        assert_eq!(curve.len(), 51);
        for w in curve.windows(2) {
            assert!(w[1].report.ess < w[0].report.ess);
        }
        for c in &curve {
            assert!((c.report.ess / 100.0).ln() <= -c.report.kl + 1e-12);
        }
    }

    #[test]
    fn drift_errors() {
        let p = d(&[0.5, 0.5]);
        assert!(drift_ess_curve(&[p.clone()], 0, 10.0).is_err());
        assert!(matches!(
            drift_ess_curve(&[p.clone(), p], 2, 10.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(DiscreteDist::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDist::new(vec![]).is_err());
        assert!(DiscreteDist::new(vec![1.5, -0.5]).is_err());
    }
}
