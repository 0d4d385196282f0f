//! Conformal screening with false discovery rate control.
//!
//! Calibration subjects whose event was observed by the horizon act as the
//! reference population of "failures". A test subject with a high conformity
//! score `S_hat(t0 + gamma | x)` receives a small weighted-rank p-value, and
//! the Benjamini-Hochberg step-up turns those p-values into a selection.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ipcw::{event_time_weights, WeightVector};
use crate::models::{fit_censoring, fit_cox, CoxModel, CoxOptions};
use crate::seed::derived_rng;
use crate::stats::quantile_sorted;
use crate::types::{CensoredDataset, ConditionalSurvival};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// Abstain when the estimated `P(R > 0)` falls below `nu`.
    pub nu: f64,
    pub bootstrap_b: usize,
    pub winsor_pct: f64,
    pub seed: u64,
    /// Evaluate curves past their last tabulated time instead of failing.
    pub extrapolate: bool,
}

impl ConformalConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            gamma: 0.0,
            nu: 0.9,
            bootstrap_b: 500,
            winsor_pct: 99.0,
            seed: 0,
            extrapolate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::InvalidArgument(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::InvalidArgument(format!("nu = {} outside [0, 1]", self.nu)));
        }
        Ok(())
    }
}

fn checked_eval(curves: &dyn ConditionalSurvival, i: usize, t: f64, extrapolate: bool) -> Result<f64> {
    if let Some(end) = curves.grid_end() {
        if t > end && !extrapolate {
            return Err(Error::CurveRange { time: t, grid_end: end });
        }
    }
    Ok(curves.survival(i, t))
}

/// Calibration scores `S_hat(T_i + gamma | X_i)` and test scores
/// `S_hat(t0 + gamma | X_j)`.
pub fn conformity_scores(
    cal_curves: &dyn ConditionalSurvival,
    cal: &CensoredDataset,
    test_curves: &dyn ConditionalSurvival,
    t0: f64,
    gamma: f64,
    extrapolate: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if cal_curves.n_subjects() != cal.len() {
        return Err(Error::Alignment(format!(
            "{} survival curves for {} calibration records",
            cal_curves.n_subjects(),
            cal.len()
        )));
    }
    let cal_scores = cal
        .iter()
        .enumerate()
        .map(|(i, r)| checked_eval(cal_curves, i, r.observed_time + gamma, extrapolate))
        .collect::<Result<Vec<_>>>()?;
    let test_scores = (0..test_curves.n_subjects())
        .map(|j| checked_eval(test_curves, j, t0 + gamma, extrapolate))
        .collect::<Result<Vec<_>>>()?;
    Ok((cal_scores, test_scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PValues {
    pub values: Vec<f64>,
    /// How many raw values exceeded 1 and were clipped.
    pub clipped: usize,
}

/// Weighted conformal p-values
/// `(1 + sum_i E_i 1{T_i <= t0} w_i 1{s_i >= s_j}) / (1 + n)`, clipped at 1.
pub fn conformal_pvalues(
    cal_scores: &[f64],
    cal: &CensoredDataset,
    weights: &WeightVector,
    test_scores: &[f64],
    t0: f64,
) -> Result<PValues> {
    if cal_scores.len() != cal.len() || weights.len() != cal.len() {
        return Err(Error::Alignment(format!(
            "{} scores and {} weights for {} calibration records",
            cal_scores.len(),
            weights.len(),
            cal.len()
        )));
    }
    let mut active: Vec<(f64, f64)> = cal
        .iter()
        .zip(cal_scores)
        .zip(&weights.weights)
        .filter(|((r, _), _)| r.event && r.observed_time <= t0)
        .map(|((_, &s), &w)| (s, w))
        .collect();
    active.sort_by(|a, b| a.0.total_cmp(&b.0));
    // tail[k] = total weight of active scores at positions >= k
    let mut tail = vec![0.0; active.len() + 1];
    for k in (0..active.len()).rev() {
        tail[k] = tail[k + 1] + active[k].1;
    }
    let denom = 1.0 + cal.len() as f64;
    let mut clipped = 0;
    let values = test_scores
        .iter()
        .map(|&s| {
            let k = active.partition_point(|a| a.0 < s);
            let p = (1.0 + tail[k]) / denom;
            if p > 1.0 {
                clipped += 1;
                1.0
            } else {
                p
            }
        })
        .collect();
    Ok(PValues { values, clipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BhResult {
    /// Rejected indices, ascending.
    pub rejected: Vec<usize>,
    /// `alpha * k* / m`; zero when nothing is rejected.
    pub q_hat: f64,
}

fn bh_level(alpha: f64, k: usize, m: usize) -> f64 {
    alpha * k as f64 / m as f64
}

/// Number of Benjamini-Hochberg rejections, `max{k : p_(k) <= alpha k / m}`.
fn bh_count(sorted: &[f64], alpha: f64) -> usize {
    let m = sorted.len();
    (1..=m).rev().find(|&k| sorted[k - 1] <= bh_level(alpha, k, m)).unwrap_or(0)
}

/// Benjamini-Hochberg step-up selection.
pub fn bh_select(p_values: &[f64], alpha: f64) -> BhResult {
    let m = p_values.len();
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = bh_count(&sorted, alpha);
    if k == 0 {
        return BhResult {
            rejected: Vec::new(),
            q_hat: 0.0,
        };
    }
    let q_hat = bh_level(alpha, k, m);
    BhResult {
        rejected: (0..m).filter(|&j| p_values[j] <= q_hat).collect(),
        q_hat,
    }
}

/// Smallest risk score among the rejected subjects.
pub fn implied_threshold(risk_scores: &[f64], rejected: &[usize]) -> Option<f64> {
    rejected.iter().map(|&j| risk_scores[j]).reduce(f64::min)
}

/// Bootstrap estimate of `P(R > 0)` over resampled test rows.
///
/// A test subject's p-value depends only on its own score and the fixed
/// calibration sample, so resampling rows is the same as resampling their
/// p-values.
pub fn abstention_probability(p_values: &[f64], alpha: f64, b: usize, seed: u64) -> f64 {
    let m = p_values.len();
    if m == 0 || b == 0 {
        return 0.0;
    }
    let positive = (0..b)
        .into_par_iter()
        .filter(|&rep| {
            let mut rng = derived_rng(seed, "abstention", rep as u64);
            let mut draw: Vec<f64> = (0..m).map(|_| p_values[rng.random_range(0..m)]).collect();
            draw.sort_by(f64::total_cmp);
            bh_count(&draw, alpha) > 0
        })
        .count();
    positive as f64 / b as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub p_values: Vec<f64>,
    pub clipped: usize,
    /// Final selection; empty when abstaining.
    pub rejected: Vec<usize>,
    /// BH selection before the abstention rule.
    pub bh_rejected: Vec<usize>,
    pub q_hat: f64,
    pub implied_lambda: Option<f64>,
    pub abstained: bool,
    pub p_positive_est: f64,
    pub test_scores: Vec<f64>,
    /// `S_hat(t0 | X_j)`.
    pub risk_scores: Vec<f64>,
}

impl SelectionResult {
    pub fn r(&self) -> usize {
        self.rejected.len()
    }
}

/// Scores, p-values, BH and the abstention rule, end to end.
pub fn fdr_screen(
    s_cal: &dyn ConditionalSurvival,
    g_cal: &dyn ConditionalSurvival,
    cal: &CensoredDataset,
    s_test: &dyn ConditionalSurvival,
    t0: f64,
    config: &ConformalConfig,
) -> Result<SelectionResult> {
    config.validate()?;
    let weights = event_time_weights(cal, g_cal, config.winsor_pct)?;
    let (cal_scores, test_scores) = conformity_scores(s_cal, cal, s_test, t0, config.gamma, config.extrapolate)?;
    let pv = conformal_pvalues(&cal_scores, cal, &weights, &test_scores, t0)?;
    let bh = bh_select(&pv.values, config.alpha);
    let p_positive = abstention_probability(&pv.values, config.alpha, config.bootstrap_b, config.seed);
    let abstained = p_positive < config.nu;
    let risk_scores: Vec<f64> = (0..s_test.n_subjects()).map(|j| s_test.survival(j, t0)).collect();
    let rejected = if abstained { Vec::new() } else { bh.rejected.clone() };
    Ok(SelectionResult {
        implied_lambda: implied_threshold(&risk_scores, &rejected),
        p_values: pv.values,
        clipped: pv.clipped,
        rejected,
        bh_rejected: bh.rejected,
        q_hat: bh.q_hat,
        abstained,
        p_positive_est: p_positive,
        test_scores,
        risk_scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneCriterion {
    BhCount,
    Fisher,
}

impl std::str::FromStr for TuneCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bh_count" => Ok(TuneCriterion::BhCount),
            "fisher" => Ok(TuneCriterion::Fisher),
            other => Err(Error::InvalidArgument(format!("unknown tuning criterion '{other}'"))),
        }
    }
}

/// `-2 sum_j log p_j`.
pub fn fisher_statistic(p_values: &[f64]) -> f64 {
    -2.0 * p_values.iter().map(|p| p.ln()).sum::<f64>()
}

/// `{0}` together with the deciles of the observed event times.
pub fn default_gamma_grid(data: &CensoredDataset) -> Vec<f64> {
    let mut times: Vec<f64> = data.iter().filter(|r| r.event).map(|r| r.observed_time).collect();
    let mut grid = vec![0.0];
    if !times.is_empty() {
        times.sort_by(f64::total_cmp);
        grid.extend((1..10).map(|k| quantile_sorted(&times, k as f64 / 10.0)));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Candidate with the largest mean criterion; ties go to the smallest gamma.
pub fn select_gamma(candidates: &[f64], means: &[f64]) -> f64 {
    let mut best = 0;
    for k in 1..candidates.len() {
        let better = means[k] > means[best] || (means[k] == means[best] && candidates[k] < candidates[best]);
        if better {
            best = k;
        }
    }
    candidates[best]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    /// Defaults to [`default_gamma_grid`] of the tuning data.
    pub candidates: Option<Vec<f64>>,
    pub reps: usize,
    /// Tune-train, tune-calibration and tune-test shares.
    pub fractions: (f64, f64, f64),
    pub criterion: TuneCriterion,
    pub winsor_pct: f64,
    pub seed: u64,
    pub cox: CoxOptions,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            candidates: None,
            reps: 20,
            fractions: (0.5, 0.25, 0.25),
            criterion: TuneCriterion::Fisher,
            winsor_pct: 99.0,
            seed: 0,
            cox: CoxOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub gamma: f64,
    pub candidates: Vec<f64>,
    /// Criterion averaged over the splits, per candidate.
    pub mean_criterion: Vec<f64>,
}

/// Chooses the offset `gamma` on data disjoint from the calibration sample.
///
/// Each repetition splits the tuning data three ways. With `models = None`
/// the survival and censoring models are refit on the tune-train part;
/// otherwise the supplied pair is used and the tune-train part is unused.
pub fn tune_gamma(
    data: &CensoredDataset,
    t0: f64,
    alpha: f64,
    opts: &TuneOptions,
    models: Option<(&CoxModel, &CoxModel)>,
) -> Result<TuneResult> {
    let mut candidates = opts.candidates.clone().unwrap_or_else(|| default_gamma_grid(data));
    if candidates.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::InvalidArgument("gamma candidates must be >= 0".into()));
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    if candidates.len() == 1 {
        return Ok(TuneResult {
            gamma: candidates[0],
            mean_criterion: vec![0.0],
            candidates,
        });
    }
    if opts.reps == 0 {
        return Err(Error::InvalidArgument("tuning needs at least one repetition".into()));
    }
    let n = data.len();
    let (f_tr, f_cal, _) = opts.fractions;
    let n_tr = (f_tr * n as f64).round() as usize;
    let n_cal = (f_cal * n as f64).round() as usize;
    if n_cal == 0 || n_tr + n_cal >= n {
        return Err(Error::InsufficientData(format!("{n} tuning records cannot be split three ways")));
    }
    let per_rep: Vec<Vec<f64>> = (0..opts.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derived_rng(opts.seed, "tune-split", rep as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
            let train = data.subset(&idx[..n_tr]);
            let cal = data.subset(&idx[n_tr..n_tr + n_cal]);
            let test = data.subset(&idx[n_tr + n_cal..]);
            if cal.n_events() == 0 {
                return Err(Error::InsufficientData(format!("tuning split {rep} has no calibration events")));
            }
            let fitted;
            let (s_model, g_model) = match models {
                Some(pair) => pair,
                None => {
                    if train.n_events() == 0 {
                        return Err(Error::InsufficientData(format!("tuning split {rep} has no training events")));
                    }
                    fitted = (fit_cox(&train, opts.cox)?, fit_censoring(&train, opts.cox)?);
                    (&fitted.0, &fitted.1)
                }
            };
            let s_cal = s_model.curves_for(&cal)?;
            let s_test = s_model.curves_for(&test)?;
            let weights = event_time_weights(&cal, &g_model.curves_for(&cal)?, opts.winsor_pct)?;
            candidates
                .iter()
                .map(|&gamma| {
                    let (cs, ts) = conformity_scores(&s_cal, &cal, &s_test, t0, gamma, true)?;
                    let pv = conformal_pvalues(&cs, &cal, &weights, &ts, t0)?;
                    Ok(match opts.criterion {
                        TuneCriterion::Fisher => fisher_statistic(&pv.values),
                        TuneCriterion::BhCount => bh_select(&pv.values, alpha).rejected.len() as f64,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mean_criterion: Vec<f64> = (0..candidates.len())
        .map(|k| per_rep.iter().map(|r| r[k]).sum::<f64>() / opts.reps as f64)
        .collect();
    Ok(TuneResult {
        gamma: select_gamma(&candidates, &mean_criterion),
        candidates,
        mean_criterion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipcw::{cap_weights, Flavor};
    use crate::types::{CensoredRecord, SurvivalCurveSet, TimeGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit(n: usize) -> WeightVector {
        cap_weights(&vec![1.0; n], 1.0, Flavor::EventTime)
    }

    fn events(n: usize, t: f64) -> CensoredDataset {
        CensoredDataset::new((0..n).map(|i| CensoredRecord::new(i.to_string(), vec![], t, true)).collect()).unwrap()
    }

    fn curves(rows: Vec<Vec<f64>>, times: Vec<f64>) -> SurvivalCurveSet {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        SurvivalCurveSet::new(ids, TimeGrid::new(times).unwrap(), rows).unwrap()
    }

    #[test]
    fn pvalue_counts() {
        let cal = events(3, 1.0);
        let p = conformal_pvalues(&[0.2, 0.5, 0.8], &cal, &unit(3), &[0.9, 0.5, 0.1], 2.0).unwrap();
        assert_eq!(p.values, vec![0.25, 0.75, 1.0]);
        let empty = CensoredDataset::default();
        let p = conformal_pvalues(&[], &empty, &unit(0), &[0.3, 0.9], 2.0).unwrap();
        assert_eq!(p.values, vec![1.0, 1.0]);
    }

    #[test]
    fn pvalue_full_mass_and_clipping() {
        let cal = events(3, 1.0);
        let w = cap_weights(&[0.5, 0.25, 0.5], 1.0, Flavor::EventTime);
        let p = conformal_pvalues(&[0.2, 0.5, 0.8], &cal, &w, &[0.0], 2.0).unwrap();
        assert_relative_eq!(p.values[0], (1.0 + 1.25) / 4.0);
        let heavy = cap_weights(&[5.0, 5.0, 5.0], 5.0, Flavor::EventTime);
        let p = conformal_pvalues(&[0.2, 0.5, 0.8], &cal, &heavy, &[0.0, 0.9], 2.0).unwrap();
        assert_eq!(p.values, vec![1.0, 0.25]);
        assert_eq!(p.clipped, 1);
    }

    #[test]
    fn censored_and_late_records_are_inactive() {
        let recs = vec![
            CensoredRecord::new("a", vec![], 1.0, false),
            CensoredRecord::new("b", vec![], 5.0, true),
            CensoredRecord::new("c", vec![], 1.0, true),
        ];
        let cal = CensoredDataset::new(recs).unwrap();
        let p = conformal_pvalues(&[0.9, 0.9, 0.1], &cal, &unit(3), &[0.05], 2.0).unwrap();
        assert_eq!(p.values, vec![0.5]);
    }

    #[test]
    fn scores_with_offset() {
        let s = curves(vec![vec![0.9, 0.7, 0.4]], vec![1.0, 2.0, 3.0]);
        let cal = events(1, 1.0);
        let (c, t) = conformity_scores(&s, &cal, &s, 2.0, 0.0, false).unwrap();
        assert_eq!((c[0], t[0]), (0.9, 0.7));
        let (c, t) = conformity_scores(&s, &cal, &s, 2.0, 1.0, false).unwrap();
        assert_eq!((c[0], t[0]), (0.7, 0.4));
        let flat = curves(vec![vec![0.6, 0.6, 0.6]], vec![1.0, 2.0, 3.0]);
        let (c, t) = conformity_scores(&flat, &cal, &flat, 2.0, 0.5, false).unwrap();
        assert_eq!((c[0], t[0]), (0.6, 0.6));
        assert!(matches!(
            conformity_scores(&s, &cal, &s, 2.0, 5.0, false),
            Err(Error::CurveRange { .. })
        ));
        assert!(conformity_scores(&s, &cal, &s, 2.0, 5.0, true).is_ok());
    }

    #[test]
    fn bh_examples() {
        let r = bh_select(&[0.01, 0.02, 0.30], 0.1);
        assert_eq!(r.rejected, vec![0, 1]);
        assert_relative_eq!(r.q_hat, 0.2 / 3.0);
        let r = bh_select(&[1.0, 1.0], 0.1);
        assert!(r.rejected.is_empty());
        assert_eq!(r.q_hat, 0.0);
        assert_eq!(bh_select(&[0.05], 0.1).rejected, vec![0]);
        // step-up: a later order statistic can rescue earlier ones
        assert_eq!(bh_select(&[0.06, 0.07], 0.1).rejected, vec![0, 1]);
    }

    #[test]
    fn implied_threshold_examples() {
        let s = [0.95, 0.9, 0.3];
        assert_eq!(implied_threshold(&s, &[0, 1]), Some(0.9));
        assert_eq!(implied_threshold(&s, &[]), None);
        assert_eq!(implied_threshold(&s, &[0, 1, 2]), Some(0.3));
    }

    #[test]
    fn abstention_extremes_and_golden() {
        assert_eq!(abstention_probability(&[1e-6; 20], 0.1, 200, 1), 1.0);
        assert_eq!(abstention_probability(&[1.0; 20], 0.1, 200, 1), 0.0);
        let p: Vec<f64> = (0..20).map(|j| 0.002 + j as f64 * 0.05).collect();
        let a = abstention_probability(&p, 0.1, 500, 8);
        assert_eq!(a, abstention_probability(&p, 0.1, 500, 8));
        assert!(a > 0.0 && a < 1.0);
    }

    fn screen_fixture(n: usize) -> (SurvivalCurveSet, SurvivalCurveSet, CensoredDataset, SurvivalCurveSet) {
        let grid = vec![1.0, 2.0, 3.0, 4.0];
        // calibration: half early events on low-survival curves
        let mut rows = Vec::new();
        let mut recs = Vec::new();
        for i in 0..n {
            let level = 0.3 + 0.6 * i as f64 / n as f64;
            rows.push(vec![level, level * 0.9, level * 0.8, level * 0.7]);
            let early = i % 2 == 0 && i < n / 2;
            recs.push(CensoredRecord::new(i.to_string(), vec![], if early { 1.5 } else { 3.5 }, true));
        }
        let s = curves(rows, grid.clone());
        let g = curves(vec![vec![1.0; 4]; n], grid.clone());
        let test = curves(
            (0..10).map(|j| vec![0.5 + 0.05 * j as f64; 4]).collect(),
            grid,
        );
        (s, g, CensoredDataset::new(recs).unwrap(), test)
    }

    #[test]
    fn screen_is_deterministic_and_nu_zero_disables_abstention() {
        let (s, g, cal, test) = screen_fixture(40);
        let mut cfg = ConformalConfig::new(0.3);
        cfg.nu = 0.0;
        cfg.bootstrap_b = 200;
        let a = fdr_screen(&s, &g, &cal, &test, 2.0, &cfg).unwrap();
        assert!(!a.abstained);
        assert_eq!(a.rejected, a.bh_rejected);
        assert_eq!(a, fdr_screen(&s, &g, &cal, &test, 2.0, &cfg).unwrap());
        cfg.nu = 1.0;
        let b = fdr_screen(&s, &g, &cal, &test, 2.0, &cfg).unwrap();
        if b.p_positive_est < 1.0 {
            assert!(b.abstained);
            assert!(b.rejected.is_empty());
            assert_eq!(b.bh_rejected, a.bh_rejected);
        }
    }

    #[test]
    fn fisher_and_gamma_selection() {
        let p = [(-1.0f64).exp(), (-2.0f64).exp()];
        assert_relative_eq!(fisher_statistic(&p), 6.0, epsilon = 1e-12);
        assert_eq!(fisher_statistic(&[1.0, 1.0]), 0.0);
        assert_eq!(select_gamma(&[0.0, 0.5, 1.0], &[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(select_gamma(&[0.0, 0.5, 1.0], &[1.0, 3.0, 3.0]), 0.5);
    }

    #[test]
    fn single_candidate_short_circuits() {
        let data = events(5, 1.0);
        let opts = TuneOptions {
            candidates: Some(vec![0.0]),
            ..TuneOptions::default()
        };
        assert_eq!(tune_gamma(&data, 2.0, 0.1, &opts, None).unwrap().gamma, 0.0);
    }

    #[test]
    fn default_grid_has_zero_and_deciles() {
        let recs = (0..101)
            .map(|i| CensoredRecord::new(i.to_string(), vec![], i as f64, i % 3 != 0 || i == 0))
            .collect();
        let g = default_gamma_grid(&CensoredDataset::new(recs).unwrap());
        assert_eq!(g[0], 0.0);
        assert_eq!(g.len(), 10);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn bh_matches_exhaustive_search(p in proptest::collection::vec(0.0f64..=1.0, 1..=10), alpha in 0.01f64..0.5) {
            let m = p.len();
            let mut sorted = p.clone();
            sorted.sort_by(f64::total_cmp);
            let mut k_star = 0;
            for k in 1..=m {
                if sorted[k - 1] <= alpha * k as f64 / m as f64 {
                    k_star = k;
                }
            }
            let r = bh_select(&p, alpha);
            prop_assert_eq!(r.rejected.len(), k_star);
        }

        #[test]
        fn pvalues_are_antitone_and_selection_is_top_r(seed in 0u64..300) {
            let mut rng = crate::seed::rng_from_seed(seed);
            let n = 30;
            let recs = (0..n)
                .map(|i| CensoredRecord::new(i.to_string(), vec![], rng.random::<f64>() * 4.0, rng.random_bool(0.7)))
                .collect();
            let cal = CensoredDataset::new(recs).unwrap();
            let cs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let w = crate::ipcw::winsorize(&(0..n).map(|_| 1.0 + rng.random::<f64>()).collect::<Vec<_>>(), 99.0, Flavor::EventTime).unwrap();
            let ts: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
            let pv = conformal_pvalues(&cs, &cal, &w, &ts, 2.0).unwrap();
            for a in 0..15 {
                prop_assert!(pv.values[a] > 0.0 && pv.values[a] <= 1.0);
                for b in 0..15 {
                    if ts[a] >= ts[b] {
                        prop_assert!(pv.values[a] <= pv.values[b]);
                    }
                }
            }
            let bh = bh_select(&pv.values, 0.3);
            if let Some(t) = implied_threshold(&ts, &bh.rejected) {
                let top: Vec<usize> = (0..15).filter(|&j| ts[j] >= t).collect();
                prop_assert_eq!(top, bh.rejected.clone());
            }
        }
    }
}
