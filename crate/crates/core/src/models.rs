//! Survival and censoring models: a Cox proportional-hazards fitter with a
//! Breslow baseline, and a parametric Weibull generator.
//!
//! Fitted models are exposed to the rest of the crate through
//! [`ConditionalSurvival`], so downstream code never cares whether curves come
//! from a model, an analytic population or an imported CSV.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{CensoredDataset, ConditionalSurvival, SurvivalCurve, TimeGrid};

/// Settings for the damped Newton iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxOptions {
    pub max_iter: usize,
    /// Convergence threshold on the Euclidean norm of the score vector.
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-7,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitDiagnostics {
    pub log_partial_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Log partial likelihood after each accepted step, starting at beta = 0.
    pub likelihood_path: Vec<f64>,
    /// Constant covariate columns whose coefficient was pinned to zero.
    pub degenerate_columns: Vec<usize>,
}

/// Breslow cumulative baseline hazard, a right-continuous step function
/// jumping at the distinct event times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    /// `Lambda_0(t)`.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    /// `Lambda_0(t-)`.
    pub fn before(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s < t) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxModel {
    pub coefficients: Vec<f64>,
    pub baseline: BaselineHazard,
    pub diagnostics: FitDiagnostics,
}

impl CoxModel {
    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum()
    }

    /// `S(t | x) = exp(-Lambda_0(t) exp(beta'x))`.
    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        (-self.baseline.at(t) * self.linear_predictor(x).exp()).exp().clamp(0.0, 1.0)
    }

    /// Lazily evaluated curves for the given covariate rows.
    pub fn curves<'a, X: AsRef<[f64]>>(&'a self, rows: &[X]) -> Result<CoxCurves<'a>> {
        let risk = rows
            .iter()
            .map(|x| {
                let x = x.as_ref();
                if x.len() != self.dimension() {
                    return Err(Error::DimensionMismatch {
                        expected: self.dimension(),
                        got: x.len(),
                    });
                }
                Ok(self.linear_predictor(x).exp())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoxCurves { model: self, risk })
    }

    pub fn curves_for(&self, data: &CensoredDataset) -> Result<CoxCurves<'_>> {
        self.curves(&data.covariate_rows())
    }
}

/// Cox survival curves for a fixed set of subjects.
#[derive(Debug, Clone)]
pub struct CoxCurves<'a> {
    model: &'a CoxModel,
    risk: Vec<f64>,
}

impl ConditionalSurvival for CoxCurves<'_> {
    fn n_subjects(&self) -> usize {
        self.risk.len()
    }

    fn survival(&self, subject: usize, t: f64) -> f64 {
        (-self.model.baseline.at(t) * self.risk[subject]).exp()
    }

    fn survival_before(&self, subject: usize, t: f64) -> f64 {
        (-self.model.baseline.before(t) * self.risk[subject]).exp()
    }

    fn sample_time(&self, subject: usize, u: f64) -> f64 {
        let b = &self.model.baseline;
        let needed = -u.ln() / self.risk[subject];
        let k = b.cumulative.partition_point(|&h| h < needed);
        match b.times.get(k) {
            Some(&t) => t,
            None => b.times.last().map_or(f64::INFINITY, |t| 1.5 * t),
        }
    }
}

/// Tabulates `S(t | x)` on `grid`.
pub fn predict_survival(model: &CoxModel, covariates: &[f64], grid: &TimeGrid) -> Result<SurvivalCurve> {
    if covariates.len() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: covariates.len(),
        });
    }
    let rr = model.linear_predictor(covariates).exp();
    let mut prev = 1.0_f64;
    let values = grid
        .times()
        .iter()
        .map(|&t| {
            prev = (-model.baseline.at(t) * rr).exp().clamp(0.0, prev);
            prev
        })
        .collect();
    SurvivalCurve::new(grid.clone(), values)
}

/// Event groups for the partial likelihood: distinct times in descending
/// order, each with the records observed at that time.
struct RiskStructure {
    /// (time, members, number of events)
    groups: Vec<(f64, Vec<usize>, usize)>,
}

impl RiskStructure {
    fn new(data: &CensoredDataset) -> Self {
        let mut order: Vec<usize> = (0..data.len()).collect();
        let recs = data.records();
        order.sort_by(|&a, &b| recs[b].observed_time.total_cmp(&recs[a].observed_time));
        let mut groups: Vec<(f64, Vec<usize>, usize)> = Vec::new();
        for i in order {
            let t = recs[i].observed_time;
            let ev = usize::from(recs[i].event);
            match groups.last_mut() {
                Some((gt, members, d)) if *gt == t => {
                    members.push(i);
                    *d += ev;
                }
                _ => groups.push((t, vec![i], ev)),
            }
        }
        Self { groups }
    }
}

/// Log partial likelihood (Breslow ties), score and Hessian at `beta`.
fn partial_likelihood(
    x: &[Vec<f64>],
    events: &[bool],
    rs: &RiskStructure,
    beta: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = beta.len();
    let mut s0 = 0.0;
    let mut s1 = DVector::<f64>::zeros(p);
    let mut s2 = DMatrix::<f64>::zeros(p, p);
    let mut ll = 0.0;
    let mut grad = DVector::<f64>::zeros(p);
    let mut hess = DMatrix::<f64>::zeros(p, p);
    for (_, members, d) in &rs.groups {
        for &i in members {
            let xi = DVector::from_column_slice(&x[i]);
            let eta = beta.dot(&xi);
            let w = eta.exp();
            s0 += w;
            s1.axpy(w, &xi, 1.0);
            s2.ger(w, &xi, &xi, 1.0);
            if events[i] {
                ll += eta;
                grad += &xi;
            }
        }
        if *d > 0 {
            let d = *d as f64;
            let mean = &s1 / s0;
            ll -= d * s0.ln();
            grad.axpy(-d, &mean, 1.0);
            let cov = &s2 / s0 - &mean * mean.transpose();
            hess -= cov * d;
        }
    }
    (ll, grad, hess)
}

/// Fits `beta` by damped Newton on the Breslow partial likelihood and then
/// computes the Breslow baseline hazard.
///
/// Constant covariate columns get coefficient 0 and are listed in
/// `diagnostics.degenerate_columns`. With no events the likelihood is flat:
/// the result has `beta = 0` and a zero baseline hazard.
pub fn fit_cox(data: &CensoredDataset, options: CoxOptions) -> Result<CoxModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("Cox fit needs at least 2 records, got {n}")));
    }
    let d = data.dimension();
    let recs = data.records();
    let (active, degenerate): (Vec<usize>, Vec<usize>) = (0..d).partition(|&j| {
        let (lo, hi) = recs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.covariates[j]), hi.max(r.covariates[j]))
        });
        hi > lo
    });
    let means: Vec<f64> = active
        .iter()
        .map(|&j| recs.iter().map(|r| r.covariates[j]).sum::<f64>() / n as f64)
        .collect();
    // centred design over the active columns; beta is translation invariant
    let x: Vec<Vec<f64>> = recs
        .iter()
        .map(|r| active.iter().zip(&means).map(|(&j, m)| r.covariates[j] - m).collect())
        .collect();
    let events: Vec<bool> = recs.iter().map(|r| r.event).collect();
    let rs = RiskStructure::new(data);
    let p = active.len();

    let mut beta = DVector::<f64>::zeros(p);
    let mut diagnostics = FitDiagnostics {
        degenerate_columns: degenerate,
        ..Default::default()
    };

    if p > 0 && data.n_events() > 0 {
        let (mut ll, mut grad, mut hess) = partial_likelihood(&x, &events, &rs, &beta);
        diagnostics.likelihood_path.push(ll);
        let mut iterations = 0;
        loop {
            let gnorm = grad.norm();
            if gnorm <= options.tol {
                break;
            }
            if iterations >= options.max_iter {
                return Err(Error::NonConvergence {
                    iterations,
                    gradient_norm: gnorm,
                });
            }
            iterations += 1;
            let info = -&hess;
            let step = match info.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    // flat direction: fall back to a ridge-stabilised step
                    let ridge = DMatrix::<f64>::identity(p, p) * (1e-8 + info.diagonal().abs().max());
                    match (info + ridge).cholesky() {
                        Some(ch) => ch.solve(&grad),
                        None => grad.clone(),
                    }
                }
            };
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=options.max_halvings {
                let candidate = &beta + &step * scale;
                let (ll_new, g_new, h_new) = partial_likelihood(&x, &events, &rs, &candidate);
                if ll_new.is_finite() && ll_new >= ll - 1e-12 * (1.0 + ll.abs()) {
                    accepted = Some((candidate, ll_new, g_new, h_new));
                    break;
                }
                scale *= 0.5;
            }
            match accepted {
                Some((b, l, g, h)) => {
                    beta = b;
                    ll = l;
                    grad = g;
                    hess = h;
                    diagnostics.likelihood_path.push(ll);
                }
                None => {
                    return Err(Error::NonConvergence {
                        iterations,
                        gradient_norm: grad.norm(),
                    })
                }
            }
        }
        diagnostics.iterations = iterations;
        diagnostics.gradient_norm = grad.norm();
        diagnostics.log_partial_likelihood = ll;
    } else {
        let (ll, grad, _) = partial_likelihood(&x, &events, &rs, &beta);
        diagnostics.likelihood_path.push(ll);
        diagnostics.log_partial_likelihood = ll;
        diagnostics.gradient_norm = grad.norm();
    }

    let mut coefficients = vec![0.0; d];
    for (k, &j) in active.iter().enumerate() {
        coefficients[j] = beta[k];
    }
    let baseline = breslow_baseline(data, &coefficients, &rs);
    Ok(CoxModel {
        coefficients,
        baseline,
        diagnostics,
    })
}

fn breslow_baseline(data: &CensoredDataset, beta: &[f64], rs: &RiskStructure) -> BaselineHazard {
    let recs = data.records();
    let mut s0 = 0.0;
    let mut jumps = Vec::new();
    for (t, members, d) in &rs.groups {
        for &i in members {
            s0 += beta.iter().zip(&recs[i].covariates).map(|(b, v)| b * v).sum::<f64>().exp();
        }
        if *d > 0 {
            jumps.push((*t, *d as f64 / s0));
        }
    }
    jumps.reverse();
    let mut cum = 0.0;
    let (times, cumulative) = jumps
        .into_iter()
        .map(|(t, h)| {
            cum += h;
            (t, cum)
        })
        .unzip();
    BaselineHazard { times, cumulative }
}

/// Censoring model: the Cox fit with event indicators flipped.
pub fn fit_censoring(data: &CensoredDataset, options: CoxOptions) -> Result<CoxModel> {
    fit_cox(&data.with_flipped_events(), options)
}

/// Weibull time-to-event law with covariate-dependent scale
/// `exp(intercept + w'x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullModel {
    pub shape: f64,
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl WeibullModel {
    pub fn new(shape: f64, intercept: f64, weights: Vec<f64>) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("Weibull shape must be positive and parameters finite".into()));
        }
        Ok(Self {
            shape,
            intercept,
            weights,
        })
    }

    pub fn scale(&self, x: &[f64]) -> f64 {
        (self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).exp()
    }

    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        weibull_survival(self.shape, self.scale(x), t)
    }

    pub fn curves<X: AsRef<[f64]>>(&self, rows: &[X]) -> WeibullCurves {
        WeibullCurves {
            shape: self.shape,
            scales: rows.iter().map(|x| self.scale(x.as_ref())).collect(),
        }
    }
}

fn weibull_survival(shape: f64, scale: f64, t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else {
        (-(t / scale).powf(shape)).exp()
    }
}

fn weibull_inverse(shape: f64, scale: f64, u: f64) -> f64 {
    scale * (-u.ln()).powf(1.0 / shape)
}

/// Inverse-CDF draw `scale(x) * (-ln u)^(1/k)`.
pub fn sample_weibull(model: &WeibullModel, covariates: &[f64], u: f64) -> f64 {
    weibull_inverse(model.shape, model.scale(covariates), u)
}

/// Generative event and censoring laws.
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullPopulation {
    pub event: WeibullModel,
    pub censoring: WeibullModel,
}

impl WeibullPopulation {
    pub fn dimension(&self) -> usize {
        self.event.weights.len()
    }

    /// Three standard-normal covariates, roughly a third of subjects censored,
    /// and an event probability of about 0.33 by time 3.
    pub fn reference() -> Self {
        Self {
            event: WeibullModel {
                shape: 1.5,
                intercept: 2.0,
                weights: vec![0.8, -0.5, 0.3],
            },
            censoring: WeibullModel {
                shape: 1.2,
                intercept: 2.8,
                weights: vec![0.2, 0.0, 0.0],
            },
        }
    }
}

/// Analytic Weibull curves for fixed subjects (continuous in `t`).
#[derive(Debug, Clone)]
pub struct WeibullCurves {
    shape: f64,
    scales: Vec<f64>,
}

impl ConditionalSurvival for WeibullCurves {
    fn n_subjects(&self) -> usize {
        self.scales.len()
    }

    fn survival(&self, subject: usize, t: f64) -> f64 {
        weibull_survival(self.shape, self.scales[subject], t)
    }

    fn survival_before(&self, subject: usize, t: f64) -> f64 {
        self.survival(subject, t)
    }

    fn sample_time(&self, subject: usize, u: f64) -> f64 {
        weibull_inverse(self.shape, self.scales[subject], u)
    }
}
