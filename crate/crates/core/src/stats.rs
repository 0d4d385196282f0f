//! Small numerical helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_binomial;

/// Standard normal quantile `z_p`.
pub fn normal_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(p)
}

/// Binomial CDF `P(X <= k)` for `X ~ Binomial(n, p)`, by direct summation of
/// the probability mass in log space.
pub fn binomial_cdf(k: i64, n: u64, p: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let total: f64 = (0..=k)
        .map(|j| (ln_binomial(n, j) + j as f64 * lp + (n - j) as f64 * lq).exp())
        .sum();
    total.min(1.0)
}

/// Linear-interpolation quantile (type 7) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = level.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Upper `(1 - delta)` order statistic of a Monte Carlo sample: the
/// `ceil((1 - delta)(B + 1))`-th smallest value, capped at the maximum.
/// At `delta = 1/B` this is the sample maximum.
pub fn upper_quantile(values: &mut [f64], delta: f64) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let b = values.len();
    let rank = ((1.0 - delta) * (b as f64 + 1.0) - 1e-9).ceil() as usize;
    values[rank.clamp(1, b) - 1]
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean with the `n - 1` sample variance; zero for a
/// single observation.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}
