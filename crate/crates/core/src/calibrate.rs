//! High-probability threshold calibration: greedy pointwise, uniform bands
//! (Bonferroni and Gaussian multiplier) and Learn-Then-Test.
//!
//! All calibrators share the same inputs: a [`RiskProfile`] built from the
//! calibration sample and the winsorized weights it was built with (the
//! finite-sample bound needs their cap).

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bounds::{ucb_finite_sample, ucb_pointwise};
use crate::error::{Error, Result};
use crate::ipcw::{RiskProfile, WeightVector};
use crate::seed::derived_rng;
use crate::stats::{quantile_sorted, upper_quantile};
use crate::types::ScreeningRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridProvenance {
    Quantile(usize),
    Explicit,
}

/// Candidate thresholds, strictly decreasing, within `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    lambdas: Vec<f64>,
    provenance: GridProvenance,
}

impl ThresholdGrid {
    pub fn explicit(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidArgument("thresholds must lie in [0, 1]".into()));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        lambdas.dedup();
        Ok(Self {
            lambdas,
            provenance: GridProvenance::Explicit,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn provenance(&self) -> GridProvenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// `k` equally spaced empirical quantiles of the calibration scores.
pub fn build_grid(scores: &[f64], k: usize) -> Result<ThresholdGrid> {
    if scores.is_empty() || k < 2 {
        return Err(Error::InvalidArgument("grid needs nonempty scores and K >= 2".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut lambdas: Vec<f64> = (0..k)
        .map(|j| quantile_sorted(&sorted, j as f64 / (k - 1) as f64).clamp(0.0, 1.0))
        .collect();
    lambdas.dedup();
    lambdas.reverse();
    Ok(ThresholdGrid {
        lambdas,
        provenance: GridProvenance::Quantile(k),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationMethod {
    Greedy,
    Bonferroni,
    Multiplier,
    Ltt,
}

impl CalibrationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationMethod::Greedy => "greedy",
            CalibrationMethod::Bonferroni => "bonferroni",
            CalibrationMethod::Multiplier => "multiplier",
            CalibrationMethod::Ltt => "ltt",
        }
    }
}

impl std::fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CalibrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(CalibrationMethod::Greedy),
            "bonferroni" => Ok(CalibrationMethod::Bonferroni),
            "multiplier" => Ok(CalibrationMethod::Multiplier),
            "ltt" => Ok(CalibrationMethod::Ltt),
            other => Err(Error::InvalidArgument(format!("unknown calibration method '{other}'"))),
        }
    }
}

/// One evaluated threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub lambda: f64,
    pub n_selected: usize,
    pub mu_hat: f64,
    pub r_hat: Option<f64>,
    /// `None` when the selection is empty (infeasible).
    pub ucb: Option<f64>,
    pub fallback: bool,
    /// LTT path index (1 or 2); 0 for the other methods.
    pub path: u8,
}

impl GridEntry {
    pub fn feasible(&self, alpha: f64) -> bool {
        self.ucb.is_some_and(|u| u <= alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub method: CalibrationMethod,
    /// `None` abstains. LTT reports `Some(1.0)` when no threshold passes,
    /// which selects nobody.
    pub lambda_hat: Option<f64>,
    pub alpha: f64,
    pub delta: f64,
    pub table: Vec<GridEntry>,
    /// LTT stop points of the two paths.
    pub ltt_stops: Option<[f64; 2]>,
    /// Multiplier band half-width.
    pub band_halfwidth: Option<f64>,
}

impl CalibrationResult {
    pub fn abstained(&self) -> bool {
        self.lambda_hat.is_none_or(|l| l >= 1.0)
    }

    pub fn rule(&self, horizon: f64) -> ScreeningRule {
        match self.lambda_hat {
            Some(l) => ScreeningRule {
                threshold: Some(l),
                score: crate::types::ScoreDefinition::SurvivalAt { horizon },
            },
            None => ScreeningRule::abstain(horizon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub alpha: f64,
    pub delta: f64,
    /// Selections below this size use the finite-sample bound.
    pub n_min: usize,
    /// Multiplier draws.
    pub multiplier_draws: usize,
    pub seed: u64,
}

impl CalibrationOptions {
    pub fn new(alpha: f64, delta: f64) -> Self {
        Self {
            alpha,
            delta,
            n_min: 10,
            multiplier_draws: 1000,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

fn entry_at(profile: &RiskProfile, weights: &WeightVector, lambda: f64, delta: f64, n_min: usize) -> Result<GridEntry> {
    let est = profile.estimate(lambda);
    let (ucb, fallback) = if est.n_selected == 0 {
        (None, false)
    } else {
        let u = ucb_pointwise(&est, weights, delta, n_min)?;
        (Some(u.ucb), u.fallback_triggered)
    };
    Ok(GridEntry {
        lambda,
        n_selected: est.n_selected,
        mu_hat: est.mu_hat,
        r_hat: est.r_hat,
        ucb,
        fallback,
        path: 0,
    })
}

fn pointwise_table(
    profile: &RiskProfile,
    weights: &WeightVector,
    grid: &ThresholdGrid,
    delta: f64,
    n_min: usize,
) -> Result<Vec<GridEntry>> {
    grid.lambdas()
        .par_iter()
        .map(|&l| entry_at(profile, weights, l, delta, n_min))
        .collect()
}

/// Feasible entry with the largest `mu_hat`; ties go to the smaller threshold.
pub fn select_feasible(entries: &[GridEntry], alpha: f64) -> Option<f64> {
    entries
        .iter()
        .filter(|e| e.feasible(alpha))
        .fold(None::<&GridEntry>, |best, e| match best {
            Some(b) if b.mu_hat > e.mu_hat || (b.mu_hat == e.mu_hat && b.lambda <= e.lambda) => Some(b),
            _ => Some(e),
        })
        .map(|e| e.lambda)
}

/// Largest estimated selection whose pointwise bound at `delta` is below
/// `alpha`. Carries no simultaneous guarantee.
pub fn calibrate_greedy(
    profile: &RiskProfile,
    weights: &WeightVector,
    grid: &ThresholdGrid,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    opts.validate()?;
    let table = pointwise_table(profile, weights, grid, opts.delta, opts.n_min)?;
    Ok(CalibrationResult {
        method: CalibrationMethod::Greedy,
        lambda_hat: select_feasible(&table, opts.alpha),
        alpha: opts.alpha,
        delta: opts.delta,
        table,
        ltt_stops: None,
        band_halfwidth: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Bonferroni,
    Multiplier,
}

/// `T^(b) = max_k |Z_k^(b)|` for each multiplier draw, where
/// `Z_k = n^{-1/2} sum_i xi_i phi_i(lambda_k)`.
///
/// `phi_i(lambda) = A_i (y_i - r_hat) / mu_hat`, so along subjects sorted by
/// decreasing score every `Z_k` is a prefix sum and one draw costs
/// `O(n + K)`.
pub fn multiplier_maxima(profile: &RiskProfile, lambdas: &[f64], draws: usize, seed: u64) -> Vec<f64> {
    let n = profile.n();
    let order = profile.order();
    let outcomes = profile.outcomes();
    let cols: Vec<(usize, f64, f64)> = lambdas
        .iter()
        .map(|&l| {
            let (k, theta, mu) = profile.summary(l);
            (k, theta / mu, mu)
        })
        .collect();
    let root_n = (n as f64).sqrt();
    (0..draws)
        .into_par_iter()
        .map(|b| {
            let mut rng = derived_rng(seed, "multiplier", b as u64);
            let mut sum_xy = Vec::with_capacity(n + 1);
            let mut sum_x = Vec::with_capacity(n + 1);
            let (mut ay, mut ax) = (0.0, 0.0);
            sum_xy.push(0.0);
            sum_x.push(0.0);
            for &i in order {
                let xi: f64 = StandardNormal.sample(&mut rng);
                ay += xi * outcomes[i];
                ax += xi;
                sum_xy.push(ay);
                sum_x.push(ax);
            }
            cols.iter()
                .map(|&(k, r, mu)| ((sum_xy[k] - r * sum_x[k]) / (mu * root_n)).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Simultaneous band over the grid, then the largest feasible selection.
///
/// The multiplier band covers the thresholds with at least `n_min`
/// selections; sparser thresholds fall back to the finite-sample bound at
/// `delta / K`.
pub fn calibrate_uniform(
    profile: &RiskProfile,
    weights: &WeightVector,
    grid: &ThresholdGrid,
    band: Band,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    opts.validate()?;
    let k = grid.len().max(1) as f64;
    let (method, table, halfwidth) = match band {
        Band::Bonferroni => (
            CalibrationMethod::Bonferroni,
            pointwise_table(profile, weights, grid, opts.delta / k, opts.n_min)?,
            None,
        ),
        Band::Multiplier => {
            if opts.multiplier_draws == 0 {
                return Err(Error::InvalidArgument("multiplier band needs at least one draw".into()));
            }
            let banded: Vec<f64> = grid
                .lambdas()
                .iter()
                .copied()
                .filter(|&l| profile.count_selected(l) >= opts.n_min.max(1))
                .collect();
            let h = if banded.is_empty() {
                None
            } else {
                let mut maxima = multiplier_maxima(profile, &banded, opts.multiplier_draws, opts.seed);
                Some(upper_quantile(&mut maxima, opts.delta) / (profile.n() as f64).sqrt())
            };
            let table = grid
                .lambdas()
                .iter()
                .map(|&l| {
                    let est = profile.estimate(l);
                    let (ucb, fallback) = match (est.r_hat, h) {
                        (None, _) => (None, false),
                        (Some(r), Some(h)) if est.n_selected >= opts.n_min => (Some(r + h), false),
                        _ => (Some(ucb_finite_sample(&est, weights, opts.delta / k)?.ucb), true),
                    };
                    Ok(GridEntry {
                        lambda: l,
                        n_selected: est.n_selected,
                        mu_hat: est.mu_hat,
                        r_hat: est.r_hat,
                        ucb,
                        fallback,
                        path: 0,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (CalibrationMethod::Multiplier, table, h)
        }
    };
    Ok(CalibrationResult {
        method,
        lambda_hat: select_feasible(&table, opts.alpha),
        alpha: opts.alpha,
        delta: opts.delta,
        table,
        ltt_stops: None,
        band_halfwidth: halfwidth,
    })
}

/// Scans `path` in order and returns the last threshold accepted before the
/// first failure. `ucb` returning `None` counts as a failure.
pub fn fixed_sequence_scan(path: &[f64], mut ucb: impl FnMut(f64) -> Option<f64>, alpha: f64) -> Option<f64> {
    let mut accepted = None;
    for &l in path {
        match ucb(l) {
            Some(u) if u <= alpha => accepted = Some(l),
            _ => break,
        }
    }
    accepted
}

/// Anchor followed by the grid thresholds strictly below it, decreasing.
pub fn ltt_path(anchor: f64, grid: &ThresholdGrid) -> Vec<f64> {
    std::iter::once(anchor)
        .chain(grid.lambdas().iter().copied().filter(|&l| l < anchor))
        .collect()
}

/// Learn-Then-Test over two fixed-sequence paths anchored at `1 - alpha` and
/// `1 - alpha / 2`, each tested at `delta / 2`; returns the smaller stop.
pub fn calibrate_ltt(
    profile: &RiskProfile,
    weights: &WeightVector,
    grid: &ThresholdGrid,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    opts.validate()?;
    let level = opts.delta / 2.0;
    let mut table = Vec::new();
    let mut stops = [1.0; 2];
    for (p, anchor) in [1.0 - opts.alpha, 1.0 - opts.alpha / 2.0].into_iter().enumerate() {
        let path = ltt_path(anchor, grid);
        let mut failure = None;
        let stop = fixed_sequence_scan(
            &path,
            |l| match entry_at(profile, weights, l, level, opts.n_min) {
                Ok(mut e) => {
                    e.path = p as u8 + 1;
                    let u = e.ucb;
                    table.push(e);
                    u
                }
                Err(err) => {
                    failure = Some(err);
                    None
                }
            },
            opts.alpha,
        );
        if let Some(err) = failure {
            return Err(err);
        }
        stops[p] = stop.unwrap_or(1.0);
    }
    Ok(CalibrationResult {
        method: CalibrationMethod::Ltt,
        lambda_hat: Some(stops[0].min(stops[1])),
        alpha: opts.alpha,
        delta: opts.delta,
        table,
        ltt_stops: Some(stops),
        band_halfwidth: None,
    })
}

/// Dispatches on `method`.
pub fn calibrate(
    method: CalibrationMethod,
    profile: &RiskProfile,
    weights: &WeightVector,
    grid: &ThresholdGrid,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    match method {
        CalibrationMethod::Greedy => calibrate_greedy(profile, weights, grid, opts),
        CalibrationMethod::Bonferroni => calibrate_uniform(profile, weights, grid, Band::Bonferroni, opts),
        CalibrationMethod::Multiplier => calibrate_uniform(profile, weights, grid, Band::Multiplier, opts),
        CalibrationMethod::Ltt => calibrate_ltt(profile, weights, grid, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipcw::{cap_weights, Flavor};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use std::cell::Cell;

    fn entry(lambda: f64, mu: f64, ucb: Option<f64>) -> GridEntry {
        GridEntry {
            lambda,
            n_selected: (mu * 100.0) as usize,
            mu_hat: mu,
            r_hat: Some(0.0),
            ucb,
            fallback: false,
            path: 0,
        }
    }

    fn random_profile(n: usize, seed: u64) -> (RiskProfile, WeightVector) {
        let mut rng = crate::seed::rng_from_seed(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        // event probability falls with the score
        let outcomes = scores
            .iter()
            .map(|&s| if rng.random_bool(0.4 * (1.0 - s)) { 1.0 } else { 0.0 })
            .collect();
        (
            RiskProfile::from_outcomes(scores, outcomes, Flavor::EventTime),
            cap_weights(&vec![1.0; n], 1.0, Flavor::EventTime),
        )
    }

    #[test]
    fn grid_examples() {
        assert_eq!(build_grid(&[0.7; 10], 200).unwrap().lambdas(), &[0.7]);
        assert_eq!(build_grid(&[0.1, 0.9], 2).unwrap().lambdas(), &[0.9, 0.1]);
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let g = build_grid(&scores, 200).unwrap();
        assert!(g.len() <= 200);
        assert!(g.lambdas().windows(2).all(|w| w[0] > w[1]));
        assert!(build_grid(&[], 3).is_err());
    }

    #[test]
    fn greedy_hand_trace() {
        let entries = vec![
            entry(0.9, 0.2, Some(0.07)),
            entry(0.8, 0.4, Some(0.09)),
            entry(0.7, 0.6, Some(0.12)),
        ];
        assert_eq!(select_feasible(&entries, 0.1), Some(0.8));
        let none = vec![entry(0.9, 0.2, Some(0.2)), entry(0.8, 0.4, None)];
        assert_eq!(select_feasible(&none, 0.1), None);
        let single = vec![entry(0.9, 0.2, Some(0.2)), entry(0.5, 0.3, Some(0.01))];
        assert_eq!(select_feasible(&single, 0.1), Some(0.5));
        let tied = vec![entry(0.6, 0.3, Some(0.01)), entry(0.55, 0.3, Some(0.01))];
        assert_eq!(select_feasible(&tied, 0.1), Some(0.55));
    }

    #[test]
    fn greedy_abstains_when_nothing_passes() {
        let p = RiskProfile::from_outcomes(vec![0.5; 50], vec![1.0; 50], Flavor::EventTime);
        let w = cap_weights(&[1.0; 50], 1.0, Flavor::EventTime);
        let grid = ThresholdGrid::explicit(vec![0.1, 0.2]).unwrap();
        let r = calibrate_greedy(&p, &w, &grid, &CalibrationOptions::new(0.1, 0.1)).unwrap();
        assert!(r.abstained());
        assert_eq!(r.lambda_hat, None);
    }

    #[test]
    fn degenerate_multiplier_band() {
        // every selected subject has the same outcome, so phi vanishes
        let p = RiskProfile::from_outcomes((0..40).map(|i| i as f64 / 40.0).collect(), vec![0.0; 40], Flavor::EventTime);
        let w = cap_weights(&[1.0; 40], 1.0, Flavor::EventTime);
        let grid = ThresholdGrid::explicit(vec![0.2, 0.5]).unwrap();
        let r = calibrate_uniform(&p, &w, &grid, Band::Multiplier, &CalibrationOptions::new(0.1, 0.1)).unwrap();
        assert_eq!(r.band_halfwidth, Some(0.0));
        for e in &r.table {
            assert_eq!(e.ucb, e.r_hat);
        }
    }

    #[test]
    fn multiplier_prefix_sums_match_naive() {
        let (p, _) = random_profile(60, 5);
        let lambdas = [0.8, 0.5, 0.3, 0.1];
        let fast = multiplier_maxima(&p, &lambdas, 50, 9);
        let ests: Vec<_> = lambdas.iter().map(|&l| p.estimate(l)).collect();
        for (b, &t) in fast.iter().enumerate() {
            let mut rng = derived_rng(9, "multiplier", b as u64);
            // multipliers are drawn in decreasing-score order
            let mut xi = vec![0.0; 60];
            for &i in p.order() {
                xi[i] = StandardNormal.sample(&mut rng);
            }
            let naive = ests
                .iter()
                .map(|e| {
                    let (th, mu) = (e.theta_hat, e.mu_hat);
                    let z: f64 = (0..60)
                        .map(|i| xi[i] * (e.psi_theta[i] / mu - th / (mu * mu) * e.psi_mu[i]))
                        .sum();
                    (z / 60f64.sqrt()).abs()
                })
                .fold(0.0, f64::max);
            assert_relative_eq!(t, naive, epsilon = 1e-10);
        }
    }

    #[test]
    fn multiplier_golden_is_reproducible() {
        let (p, w) = random_profile(30, 2);
        let grid = ThresholdGrid::explicit(vec![0.2, 0.4]).unwrap();
        let mut opts = CalibrationOptions::new(0.3, 0.1);
        opts.seed = 17;
        let a = calibrate_uniform(&p, &w, &grid, Band::Multiplier, &opts).unwrap();
        let b = calibrate_uniform(&p, &w, &grid, Band::Multiplier, &opts).unwrap();
        assert_eq!(a, b);
        let h = a.band_halfwidth.unwrap();
        assert!(h > 0.0 && h.is_finite());
    }

    #[test]
    fn bonferroni_is_inside_greedy() {
        for seed in 0..20 {
            let (p, w) = random_profile(300, seed);
            let grid = build_grid(p.scores(), 50).unwrap();
            let opts = CalibrationOptions::new(0.15, 0.1);
            let g = calibrate_greedy(&p, &w, &grid, &opts).unwrap();
            let b = calibrate_uniform(&p, &w, &grid, Band::Bonferroni, &opts).unwrap();
            for (eg, eb) in g.table.iter().zip(&b.table) {
                assert!(!eb.feasible(0.15) || eg.feasible(0.15));
            }
            let yield_of = |l: Option<f64>| l.map_or(0, |l| p.count_selected(l));
            assert!(yield_of(b.lambda_hat) <= yield_of(g.lambda_hat));
        }
    }

    #[test]
    fn ltt_path_trace() {
        let ucbs = [(0.90, 0.08), (0.85, 0.09), (0.80, 0.12), (0.75, 0.05)];
        let look = |l: f64| ucbs.iter().find(|(x, _)| *x == l).map(|(_, u)| *u);
        let path: Vec<f64> = ucbs.iter().map(|(l, _)| *l).collect();
        assert_eq!(fixed_sequence_scan(&path, look, 0.1), Some(0.85));
        assert_eq!(fixed_sequence_scan(&path[2..], look, 0.1), None);
        let calls = Cell::new(0);
        fixed_sequence_scan(
            &path,
            |l| {
                calls.set(calls.get() + 1);
                look(l)
            },
            0.1,
        );
        assert_eq!(calls.get(), 3);
    }

    #[test]
    fn ltt_paths_and_min() {
        let grid = ThresholdGrid::explicit(vec![0.97, 0.93, 0.85, 0.5]).unwrap();
        assert_eq!(ltt_path(0.9, &grid), vec![0.9, 0.85, 0.5]);
        assert_eq!(ltt_path(0.95, &grid), vec![0.95, 0.93, 0.85, 0.5]);

        // safe everywhere: both paths run to the bottom of the grid
        let p = RiskProfile::from_outcomes((0..200).map(|i| i as f64 / 200.0).collect(), vec![0.0; 200], Flavor::EventTime);
        let w = cap_weights(&[1.0; 200], 1.0, Flavor::EventTime);
        let mut opts = CalibrationOptions::new(0.1, 0.1);
        opts.n_min = 5;
        let r = calibrate_ltt(&p, &w, &grid, &opts).unwrap();
        assert_eq!(r.ltt_stops, Some([0.5, 0.5]));
        assert_eq!(r.lambda_hat, Some(0.5));

        // unsafe everywhere: both anchors fail
        let bad = RiskProfile::from_outcomes((0..200).map(|i| i as f64 / 200.0).collect(), vec![1.0; 200], Flavor::EventTime);
        let r = calibrate_ltt(&bad, &w, &grid, &CalibrationOptions::new(0.1, 0.1)).unwrap();
        assert_eq!(r.lambda_hat, Some(1.0));
        assert!(r.abstained());
        assert_eq!(r.table.len(), 2);
    }

    proptest! {
        #[test]
        fn calibrators_are_deterministic(seed in 0u64..50) {
            let (p, w) = random_profile(120, seed);
            let grid = build_grid(p.scores(), 30).unwrap();
            let mut opts = CalibrationOptions::new(0.2, 0.1);
            opts.seed = seed;
            opts.multiplier_draws = 200;
            for m in [CalibrationMethod::Greedy, CalibrationMethod::Bonferroni, CalibrationMethod::Multiplier, CalibrationMethod::Ltt] {
                let a = calibrate(m, &p, &w, &grid, &opts).unwrap();
                let b = calibrate(m, &p, &w, &grid, &opts).unwrap();
                prop_assert_eq!(&a, &b);
                if let (Some(l), true) = (a.lambda_hat, m != CalibrationMethod::Ltt) {
                    let e = a.table.iter().find(|e| e.lambda == l).unwrap();
                    prop_assert!(e.ucb.unwrap() <= 0.2);
                }
            }
        }
    }
}
