//! Pointwise upper confidence bounds for the selected-set risk.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ipcw::{RiskEstimate, RiskProfile, WeightVector};
use crate::seed::derived_rng;
use crate::stats::{binomial_cdf, normal_quantile, upper_quantile};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UcbMethod {
    Delta,
    Bootstrap,
    FiniteSample,
}

impl std::fmt::Display for UcbMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UcbMethod::Delta => "delta",
            UcbMethod::Bootstrap => "bootstrap",
            UcbMethod::FiniteSample => "finite_sample",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcbResult {
    pub lambda: f64,
    pub r_hat: f64,
    /// Unclamped bound.
    pub ucb: f64,
    /// `ucb` clamped to `[0, 1]`.
    pub ucb_clamped: f64,
    pub method: UcbMethod,
    pub delta_level: f64,
    pub fallback_triggered: bool,
    /// Bootstrap replicates skipped because nobody was selected.
    pub degenerate_resamples: usize,
}

impl UcbResult {
    fn new(est: &RiskEstimate, r_hat: f64, ucb: f64, method: UcbMethod, delta: f64) -> Self {
        Self {
            lambda: est.lambda,
            r_hat,
            ucb,
            ucb_clamped: ucb.clamp(0.0, 1.0),
            method,
            delta_level: delta,
            fallback_triggered: false,
            degenerate_resamples: 0,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence level delta = {delta} outside (0, 1)")))
    }
}

fn selected_r(est: &RiskEstimate) -> Result<f64> {
    est.r_hat.ok_or(Error::EmptySelection { lambda: est.lambda })
}

/// `r_hat + z_{1-delta} * sigma_hat / sqrt(n)`.
pub fn ucb_delta(est: &RiskEstimate, delta: f64) -> Result<UcbResult> {
    check_delta(delta)?;
    let r = selected_r(est)?;
    let sigma = crate::ipcw::variance_of_r(est)?.sqrt();
    let ucb = r + normal_quantile(1.0 - delta) * sigma / (est.n as f64).sqrt();
    Ok(UcbResult::new(est, r, ucb, UcbMethod::Delta, delta))
}

/// Nonparametric bootstrap: the upper `(1 - delta)` quantile of `B`
/// resampled ratio estimates. Replicate `b` draws from its own derived
/// stream, so the result does not depend on scheduling.
pub fn ucb_bootstrap(profile: &RiskProfile, lambda: f64, delta: f64, b: usize, seed: u64) -> Result<UcbResult> {
    check_delta(delta)?;
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one replicate".into()));
    }
    let est = profile.estimate(lambda);
    let r = selected_r(&est)?;
    let n = profile.n();
    let (scores, outcomes) = (profile.scores(), profile.outcomes());
    let draws: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derived_rng(seed, "bootstrap", rep as u64);
            let (mut k, mut sum) = (0usize, 0.0);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                if scores[i] > lambda {
                    k += 1;
                    sum += outcomes[i];
                }
            }
            (k > 0).then(|| sum / k as f64)
        })
        .collect();
    let mut kept: Vec<f64> = draws.iter().flatten().copied().collect();
    let skipped = b - kept.len();
    if kept.is_empty() {
        return Err(Error::EmptySelection { lambda });
    }
    let ucb = upper_quantile(&mut kept, delta);
    let mut out = UcbResult::new(&est, r, ucb, UcbMethod::Bootstrap, delta);
    out.degenerate_resamples = skipped;
    Ok(out)
}

/// Exact Clopper-Pearson lower bound: the `p` solving
/// `P(Binomial(n, p) <= k - 1) = 1 - delta`, found by bisection.
pub fn cp_lower(n: u64, k: u64, delta: f64) -> f64 {
    assert!(k <= n && n >= 1, "cp_lower needs 0 <= k <= n and n >= 1");
    if k == 0 {
        return 0.0;
    }
    let target = 1.0 - delta;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binomial_cdf(k as i64 - 1, n, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Empirical-Bernstein numerator over a Clopper-Pearson denominator, each at
/// level `delta / 2`.
pub fn ucb_finite_sample(est: &RiskEstimate, weights: &WeightVector, delta: f64) -> Result<UcbResult> {
    check_delta(delta)?;
    let n = est.n;
    if n < 2 {
        return Err(Error::InsufficientData(format!("finite-sample bound needs n >= 2, got {n}")));
    }
    let r = selected_r(est)?;
    let half = delta / 2.0;
    let log_term = (4.0 / half).ln();
    let nf = n as f64;
    let v = est.psi_theta.iter().map(|p| p * p).sum::<f64>() / (nf - 1.0);
    let numerator = est.theta_hat + (2.0 * v * log_term / nf).sqrt() + 7.0 * weights.cap * log_term / (3.0 * (nf - 1.0));
    let denominator = cp_lower(n as u64, est.n_selected as u64, half);
    if denominator <= 0.0 {
        return Err(Error::EmptySelection { lambda: est.lambda });
    }
    Ok(UcbResult::new(est, r, numerator / denominator, UcbMethod::FiniteSample, delta))
}

/// Delta method when at least `n_min` subjects are selected, finite-sample
/// bound below that.
pub fn ucb_pointwise(est: &RiskEstimate, weights: &WeightVector, delta: f64, n_min: usize) -> Result<UcbResult> {
    if est.n_selected >= n_min {
        ucb_delta(est, delta)
    } else {
        let mut out = ucb_finite_sample(est, weights, delta)?;
        out.fallback_triggered = true;
        Ok(out)
    }
}
