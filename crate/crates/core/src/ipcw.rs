//! Inverse-probability-of-censoring weights and selected-set risk estimates.
//!
//! For a threshold `lambda` the selected-set risk is `r = theta / mu` with
//! `mu = P(s(X) > lambda)` and `theta = P(T <= t0, s(X) > lambda)`. Both
//! estimators below are averages `theta_hat = mean(A_i * y_i)` of a
//! per-subject outcome `y_i`:
//!
//! * event-time weighting: `y_i = 1{T_i <= t0, E_i = 1} / G(T_i- | X_i)`
//! * fixed-time weighting: `y_i = 1 - 1{T_i >= t0} / G(t0 | X_i)`
//!
//! The linear form is what lets the influence contributions, the bootstrap and
//! the multiplier band share one representation.

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;
use crate::types::{CensoredDataset, ConditionalSurvival};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// Weights `1 / G(T-|X)` on observed events before the horizon.
    EventTime,
    /// Weights `1 / G(t0|X)` on subjects still at risk at the horizon.
    FixedTime,
}

impl std::str::FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "et" => Ok(Flavor::EventTime),
            "ft" => Ok(Flavor::FixedTime),
            other => Err(Error::InvalidArgument(format!("unknown IPCW flavor '{other}' (et|ft)"))),
        }
    }
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flavor::EventTime => "et",
            Flavor::FixedTime => "ft",
        })
    }
}

/// Winsorized IPCW weights aligned with the calibration records.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    /// Winsorization ceiling `M`; every weight is `<= cap`.
    pub cap: f64,
    pub flavor: Flavor,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Caps raw weights at a fixed ceiling.
pub fn cap_weights(raw: &[f64], cap: f64, flavor: Flavor) -> WeightVector {
    WeightVector {
        weights: raw.iter().map(|w| w.min(cap)).collect(),
        cap,
        flavor,
    }
}

/// Caps raw weights at their empirical `winsor_pct` percentile (linear
/// interpolation between order statistics). `winsor_pct = 100` keeps them.
pub fn winsorize(raw: &[f64], winsor_pct: f64, flavor: Flavor) -> Result<WeightVector> {
    if !(0.0..=100.0).contains(&winsor_pct) {
        return Err(Error::InvalidArgument(format!("winsorization percentile {winsor_pct} outside [0, 100]")));
    }
    if raw.is_empty() {
        return Ok(WeightVector {
            weights: Vec::new(),
            cap: 1.0,
            flavor,
        });
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cap = quantile_sorted(&sorted, winsor_pct / 100.0);
    Ok(cap_weights(raw, cap, flavor))
}

fn reciprocal_weights(data: &CensoredDataset, eval: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    data.iter()
        .enumerate()
        .map(|(i, r)| {
            let g = eval(i);
            if g > 0.0 {
                Ok(1.0 / g)
            } else {
                Err(Error::PositivityViolation { id: r.id.clone() })
            }
        })
        .collect()
}

fn check_aligned(data: &CensoredDataset, ghat: &dyn ConditionalSurvival) -> Result<()> {
    if ghat.n_subjects() != data.len() {
        return Err(Error::Alignment(format!(
            "{} censoring curves for {} records",
            ghat.n_subjects(),
            data.len()
        )));
    }
    Ok(())
}

/// `w_i = 1 / G(T_i- | X_i)`, winsorized.
pub fn event_time_weights(
    data: &CensoredDataset,
    ghat: &dyn ConditionalSurvival,
    winsor_pct: f64,
) -> Result<WeightVector> {
    check_aligned(data, ghat)?;
    let recs = data.records();
    let raw = reciprocal_weights(data, |i| ghat.survival_before(i, recs[i].observed_time))?;
    winsorize(&raw, winsor_pct, Flavor::EventTime)
}

/// `w_i = 1 / G(t0 | X_i)`, winsorized.
pub fn fixed_time_weights(
    data: &CensoredDataset,
    ghat: &dyn ConditionalSurvival,
    t0: f64,
    winsor_pct: f64,
) -> Result<WeightVector> {
    check_aligned(data, ghat)?;
    let raw = reciprocal_weights(data, |i| ghat.survival(i, t0))?;
    winsorize(&raw, winsor_pct, Flavor::FixedTime)
}

pub fn weights_for(
    flavor: Flavor,
    data: &CensoredDataset,
    ghat: &dyn ConditionalSurvival,
    t0: f64,
    winsor_pct: f64,
) -> Result<WeightVector> {
    match flavor {
        Flavor::EventTime => event_time_weights(data, ghat, winsor_pct),
        Flavor::FixedTime => fixed_time_weights(data, ghat, t0, winsor_pct),
    }
}

/// Per-subject outcomes `y_i` with `theta_hat = mean(A_i y_i)`.
///
/// Ties at `T = t0` count as events under event-time weighting
/// (`1{T <= t0}`) and as survivors under fixed-time weighting (`1{T >= t0}`).
pub fn risk_contributions(data: &CensoredDataset, weights: &WeightVector, t0: f64) -> Result<Vec<f64>> {
    if weights.len() != data.len() {
        return Err(Error::Alignment(format!("{} weights for {} records", weights.len(), data.len())));
    }
    Ok(data
        .iter()
        .zip(&weights.weights)
        .map(|(r, &w)| match weights.flavor {
            Flavor::EventTime => {
                if r.event && r.observed_time <= t0 {
                    w
                } else {
                    0.0
                }
            }
            Flavor::FixedTime => {
                if r.observed_time >= t0 {
                    1.0 - w
                } else {
                    1.0
                }
            }
        })
        .collect())
}

/// Point estimates at one threshold with centred influence contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    pub lambda: f64,
    pub theta_hat: f64,
    pub mu_hat: f64,
    /// `theta_hat / mu_hat`; `None` flags an empty selection.
    pub r_hat: Option<f64>,
    pub n_selected: usize,
    pub n: usize,
    pub flavor: Flavor,
    /// `A_i y_i - theta_hat`
    pub psi_theta: Vec<f64>,
    /// `A_i - mu_hat`
    pub psi_mu: Vec<f64>,
}

impl RiskEstimate {
    pub fn is_empty_selection(&self) -> bool {
        self.n_selected == 0
    }

    fn require_selection(&self) -> Result<f64> {
        self.r_hat.ok_or(Error::EmptySelection { lambda: self.lambda })
    }
}

/// Scores and outcomes of one calibration sample, prepared for repeated
/// evaluation over many thresholds.
#[derive(Debug, Clone)]
pub struct RiskProfile {
    scores: Vec<f64>,
    outcomes: Vec<f64>,
    flavor: Flavor,
    /// subject indices by decreasing score
    order: Vec<usize>,
    /// prefix sums of outcomes along `order`
    prefix: Vec<f64>,
}

impl RiskProfile {
    pub fn new(data: &CensoredDataset, scores: &[f64], weights: &WeightVector, t0: f64) -> Result<Self> {
        if scores.len() != data.len() {
            return Err(Error::Alignment(format!("{} scores for {} records", scores.len(), data.len())));
        }
        let outcomes = risk_contributions(data, weights, t0)?;
        Ok(Self::from_outcomes(scores.to_vec(), outcomes, weights.flavor))
    }

    pub fn from_outcomes(scores: Vec<f64>, outcomes: Vec<f64>, flavor: Flavor) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut prefix = Vec::with_capacity(order.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &i in &order {
            acc += outcomes[i];
            prefix.push(acc);
        }
        Self {
            scores,
            outcomes,
            flavor,
            order,
            prefix,
        }
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    /// Subject indices sorted by decreasing score.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of subjects with score strictly above `lambda`.
    pub fn count_selected(&self, lambda: f64) -> usize {
        self.order.partition_point(|&i| self.scores[i] > lambda)
    }

    /// `(n_selected, theta_hat, mu_hat)` in O(log n).
    pub fn summary(&self, lambda: f64) -> (usize, f64, f64) {
        let k = self.count_selected(lambda);
        let n = self.n().max(1) as f64;
        (k, self.prefix[k] / n, k as f64 / n)
    }

    pub fn estimate(&self, lambda: f64) -> RiskEstimate {
        let n = self.n();
        let (k, theta, mu) = self.summary(lambda);
        let (psi_theta, psi_mu) = self
            .scores
            .iter()
            .zip(&self.outcomes)
            .map(|(&s, &y)| {
                let a = if s > lambda { 1.0 } else { 0.0 };
                (a * y - theta, a - mu)
            })
            .unzip();
        RiskEstimate {
            lambda,
            theta_hat: theta,
            mu_hat: mu,
            r_hat: (k > 0).then(|| theta / mu),
            n_selected: k,
            n,
            flavor: self.flavor,
            psi_theta,
            psi_mu,
        }
    }
}

/// IPCW estimate of the selected-set risk at `lambda`.
pub fn estimate_risk(
    data: &CensoredDataset,
    scores: &[f64],
    weights: &WeightVector,
    lambda: f64,
    t0: f64,
) -> Result<RiskEstimate> {
    Ok(RiskProfile::new(data, scores, weights, t0)?.estimate(lambda))
}

/// Delta-method variance `sigma^2(lambda)` written as one sample variance of
/// the combined contributions `psi_theta / mu - theta / mu^2 * psi_mu`.
pub fn variance_of_r(est: &RiskEstimate) -> Result<f64> {
    est.require_selection()?;
    let (theta, mu) = (est.theta_hat, est.mu_hat);
    let n = est.n as f64;
    Ok(est
        .psi_theta
        .iter()
        .zip(&est.psi_mu)
        .map(|(pt, pm)| (pt / mu - theta / (mu * mu) * pm).powi(2))
        .sum::<f64>()
        / n)
}

/// The same variance through the gradient and the 2x2 empirical covariance
/// of `(theta_hat, mu_hat)`.
pub fn variance_of_r_expanded(est: &RiskEstimate) -> Result<f64> {
    est.require_selection()?;
    let n = est.n as f64;
    let mean_t = est.psi_theta.iter().sum::<f64>() / n;
    let mean_m = est.psi_mu.iter().sum::<f64>() / n;
    let (mut stt, mut stm, mut smm) = (0.0, 0.0, 0.0);
    for (pt, pm) in est.psi_theta.iter().zip(&est.psi_mu) {
        let (a, b) = (pt - mean_t, pm - mean_m);
        stt += a * a;
        stm += a * b;
        smm += b * b;
    }
    let (stt, stm, smm) = (stt / n, stm / n, smm / n);
    let (theta, mu) = (est.theta_hat, est.mu_hat);
    Ok(stt / mu.powi(2) - 2.0 * theta / mu.powi(3) * stm + theta.powi(2) / mu.powi(4) * smm)
}
