//! Semi-synthetic data generation, evaluation metrics, benchmarks and the
//! replicate protocol.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::calibrate::{build_grid, calibrate, CalibrationMethod, CalibrationOptions};
use crate::conformal::{fdr_screen, tune_gamma, ConformalConfig, TuneOptions};
use crate::error::{Error, Result};
use crate::ipcw::{weights_for, Flavor, RiskProfile};
use crate::models::{fit_censoring, fit_cox, CoxOptions, WeibullPopulation};
use crate::seed::{derive_seed, derived_rng};
use crate::types::{CensoredDataset, CensoredRecord, ConditionalSurvival, SurvivalCurve, SurvivalCurveSet, TimeGrid};

/// Multiple of the last knot returned when a step curve never falls to `u`.
pub const SENTINEL_FACTOR: f64 = 1.5;

pub(crate) fn inverse_step(grid: &TimeGrid, values: &[f64], u: f64) -> f64 {
    match values.iter().position(|&v| v <= u) {
        Some(k) => grid.times()[k],
        None => SENTINEL_FACTOR * grid.last(),
    }
}

/// `inf{t : S(t) <= u}` on a step curve, or the sentinel past the grid.
pub fn sample_time_from_curve(curve: &SurvivalCurve, u: f64) -> f64 {
    inverse_step(curve.grid(), curve.values(), u)
}

/// Latent event and censoring times of one subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub event_time: f64,
    pub censor_time: f64,
}

/// Uniform in the open interval `(0, 1)`.
fn open_uniform(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Assembles observed records from given uniforms: `T = S^{-1}(u)`,
/// `C = G^{-1}(v)`, `E = 1{T < C}`.
pub fn generate_with_uniforms(
    ids: &[String],
    covariates: &[Vec<f64>],
    s: &dyn ConditionalSurvival,
    g: &dyn ConditionalSurvival,
    us: &[f64],
    vs: &[f64],
) -> Result<(CensoredDataset, Vec<Truth>)> {
    let n = ids.len();
    if s.n_subjects() != n || g.n_subjects() != n || covariates.len() != n || us.len() != n || vs.len() != n {
        return Err(Error::Alignment("ids, covariates, curves and uniforms must have one entry per subject".into()));
    }
    let mut records = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let t = s.sample_time(i, us[i]);
        let c = g.sample_time(i, vs[i]);
        records.push(CensoredRecord::new(ids[i].clone(), covariates[i].clone(), t.min(c), t < c));
        truth.push(Truth {
            event_time: t,
            censor_time: c,
        });
    }
    let dim = covariates.first().map_or(0, Vec::len);
    Ok((CensoredDataset::with_dimension(records, dim)?, truth))
}

fn uniform_streams(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut ur = derived_rng(seed, "event-uniform", 0);
    let mut vr = derived_rng(seed, "censor-uniform", 0);
    let us = (0..n).map(|_| open_uniform(&mut ur)).collect();
    let vs = (0..n).map(|_| open_uniform(&mut vr)).collect();
    (us, vs)
}

/// Draws event and censoring times from tabulated curves with independent
/// uniform streams, so censoring is conditionally independent by
/// construction.
pub fn generate_semisynthetic(
    s_curves: &SurvivalCurveSet,
    g_curves: &SurvivalCurveSet,
    covariates: &[Vec<f64>],
    seed: u64,
) -> Result<(CensoredDataset, Vec<Truth>)> {
    if s_curves.ids() != g_curves.ids() {
        return Err(Error::Alignment("event and censoring curves list different subjects".into()));
    }
    let (us, vs) = uniform_streams(s_curves.len(), seed);
    generate_with_uniforms(s_curves.ids(), covariates, s_curves, g_curves, &us, &vs)
}

/// A simulated sample from a Weibull population.
#[derive(Debug, Clone)]
pub struct PopulationSample {
    pub data: CensoredDataset,
    pub truth: Vec<Truth>,
}

impl PopulationSample {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

/// `n` subjects with i.i.d. standard normal covariates; ids are
/// `{prefix}{k}`.
pub fn sample_population(pop: &WeibullPopulation, n: usize, seed: u64, prefix: &str) -> Result<PopulationSample> {
    let mut xr = derived_rng(seed, "covariates", 0);
    let d = pop.dimension();
    let covariates: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut xr)).collect())
        .collect();
    let ids: Vec<String> = (0..n).map(|k| format!("{prefix}{k}")).collect();
    let (us, vs) = uniform_streams(n, seed);
    let (data, truth) = generate_with_uniforms(
        &ids,
        &covariates,
        &pop.event.curves(&covariates),
        &pop.censoring.curves(&covariates),
        &us,
        &vs,
    )?;
    Ok(PopulationSample { data, truth })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMetrics {
    pub yield_count: usize,
    /// Fraction of selected subjects with `T > t0`; 1 when nothing is selected.
    pub survival_rate: f64,
    /// As `survival_rate` but `None` when nothing is selected.
    pub conditional_survival: Option<f64>,
    pub selected_any: bool,
}

/// Scores a selection (indices into `truth`) against the latent event times.
pub fn evaluate_selection(selected: &[usize], truth: &[Truth], t0: f64) -> ReplicateMetrics {
    let k = selected.len();
    let survivors = selected.iter().filter(|&&j| truth[j].event_time > t0).count();
    let cond = (k > 0).then(|| survivors as f64 / k as f64);
    ReplicateMetrics {
        yield_count: k,
        survival_rate: cond.unwrap_or(1.0),
        conditional_survival: cond,
        selected_any: k > 0,
    }
}

/// Longest prefix of the scores, sorted in decreasing order, whose mean is
/// at least `target`. Returns indices in that order.
pub fn model_based_benchmark(scores: &[f64], target: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut sum = 0.0;
    let mut best = 0;
    for (k, &i) in order.iter().enumerate() {
        sum += scores[i];
        if sum / (k + 1) as f64 >= target - 1e-12 {
            best = k + 1;
        }
    }
    order.truncate(best);
    order
}

/// The same rule scored with the true survival at `t0`.
pub fn oracle_benchmark(truth_curves: &dyn ConditionalSurvival, t0: f64, target: f64) -> Vec<usize> {
    let scores: Vec<f64> = (0..truth_curves.n_subjects()).map(|j| truth_curves.survival(j, t0)).collect();
    model_based_benchmark(&scores, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Greedy,
    Bonferroni,
    Multiplier,
    Ltt,
    Conformal,
    ModelBased,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Greedy,
        Method::Bonferroni,
        Method::Multiplier,
        Method::Ltt,
        Method::Conformal,
        Method::ModelBased,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Bonferroni => "bonferroni",
            Method::Multiplier => "multiplier",
            Method::Ltt => "ltt",
            Method::Conformal => "conformal",
            Method::ModelBased => "model_based",
            Method::Oracle => "oracle",
        }
    }

    fn calibration(self) -> Option<CalibrationMethod> {
        match self {
            Method::Greedy => Some(CalibrationMethod::Greedy),
            Method::Bonferroni => Some(CalibrationMethod::Bonferroni),
            Method::Multiplier => Some(CalibrationMethod::Multiplier),
            Method::Ltt => Some(CalibrationMethod::Ltt),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Conformal offset: fixed, or tuned on the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Fixed(f64),
    Tuned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateConfig {
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub t0_list: Vec<f64>,
    pub alpha: f64,
    pub delta: f64,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub replicates: usize,
    pub flavor: Flavor,
    pub grid_size: usize,
    pub n_min: usize,
    pub winsor_pct: f64,
    pub multiplier_draws: usize,
    pub nu: f64,
    pub abstention_b: usize,
    pub gamma: GammaChoice,
    pub tune_reps: usize,
}

impl ReplicateConfig {
    pub fn new(alpha: f64, delta: f64) -> Self {
        Self {
            n_train: 5000,
            n_cal: 1000,
            n_test: 1000,
            t0_list: vec![3.0],
            alpha,
            delta,
            methods: Method::ALL.to_vec(),
            master_seed: 0,
            replicates: 100,
            flavor: Flavor::EventTime,
            grid_size: 200,
            n_min: 10,
            winsor_pct: 99.0,
            multiplier_draws: 1000,
            nu: 0.9,
            abstention_b: 500,
            gamma: GammaChoice::Tuned,
            tune_reps: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train < 2 || self.n_cal < 1 || self.n_test < 1 {
            return Err(Error::InvalidArgument("split sizes must be positive (n_train >= 2)".into()));
        }
        if self.t0_list.is_empty() || self.t0_list.iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(Error::InvalidArgument("horizons must be positive".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Where replicates draw their subjects from.
#[derive(Debug, Clone)]
pub enum Population {
    /// Fresh i.i.d. covariates each replicate.
    Weibull(WeibullPopulation),
    /// A fixed design: every replicate redraws `(T, C)` for all subjects and
    /// splits them at random.
    Curves {
        s: SurvivalCurveSet,
        g: SurvivalCurveSet,
        covariates: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: Method,
    pub t0: f64,
    pub replicate: usize,
    pub metrics: ReplicateMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutput {
    pub rows: Vec<MetricRow>,
    /// `(replicate, message)` for every replicate that failed.
    pub failures: Vec<(usize, String)>,
}

struct Splits {
    train: CensoredDataset,
    cal: CensoredDataset,
    test: CensoredDataset,
    test_truth: Vec<Truth>,
    /// True survival of the test subjects.
    test_true: Box<dyn ConditionalSurvival>,
}

fn draw_splits(config: &ReplicateConfig, population: &Population, seed: u64) -> Result<Splits> {
    let (n_tr, n_cal, n_te) = (config.n_train, config.n_cal, config.n_test);
    match population {
        Population::Weibull(pop) => {
            let train = sample_population(pop, n_tr, derive_seed(seed, "train", 0), "tr")?;
            let cal = sample_population(pop, n_cal, derive_seed(seed, "cal", 0), "ca")?;
            let test = sample_population(pop, n_te, derive_seed(seed, "test", 0), "te")?;
            let rows = test.data.covariate_rows();
            Ok(Splits {
                test_true: Box::new(pop.event.curves(&rows)),
                train: train.data,
                cal: cal.data,
                test: test.data,
                test_truth: test.truth,
            })
        }
        Population::Curves { s, g, covariates } => {
            let n = s.len();
            if n < n_tr + n_cal + n_te {
                return Err(Error::InsufficientData(format!(
                    "population of {n} subjects cannot supply {} per replicate",
                    n_tr + n_cal + n_te
                )));
            }
            let (data, truth) = generate_semisynthetic(s, g, covariates, derive_seed(seed, "draw", 0))?;
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut derived_rng(seed, "split", 0));
            let te = &idx[n_tr + n_cal..n_tr + n_cal + n_te];
            Ok(Splits {
                train: data.subset(&idx[..n_tr]),
                cal: data.subset(&idx[n_tr..n_tr + n_cal]),
                test: data.subset(te),
                test_truth: te.iter().map(|&i| truth[i]).collect(),
                test_true: Box::new(s.subset(te)),
            })
        }
    }
}

/// The train, calibration and test samples replicate `r` works on.
pub fn replicate_datasets(
    config: &ReplicateConfig,
    population: &Population,
    r: usize,
) -> Result<(CensoredDataset, CensoredDataset, CensoredDataset)> {
    let sp = draw_splits(config, population, derive_seed(config.master_seed, "replicate", r as u64))?;
    Ok((sp.train, sp.cal, sp.test))
}

fn run_replicate(config: &ReplicateConfig, population: &Population, r: usize) -> Result<Vec<MetricRow>> {
    let seed = derive_seed(config.master_seed, "replicate", r as u64);
    let sp = draw_splits(config, population, seed)?;
    let cox = CoxOptions::default();
    let s_model = fit_cox(&sp.train, cox)?;
    let g_model = fit_censoring(&sp.train, cox)?;
    let s_cal = s_model.curves_for(&sp.cal)?;
    let g_cal = g_model.curves_for(&sp.cal)?;
    let s_test = s_model.curves_for(&sp.test)?;
    let pooled_model = if config.methods.contains(&Method::ModelBased) {
        let mut recs = sp.train.records().to_vec();
        recs.extend_from_slice(sp.cal.records());
        Some(fit_cox(&CensoredDataset::with_dimension(recs, sp.train.dimension())?, cox)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for (ti, &t0) in config.t0_list.iter().enumerate() {
        let cal_scores: Vec<f64> = (0..sp.cal.len()).map(|i| s_cal.survival(i, t0)).collect();
        let test_scores: Vec<f64> = (0..sp.test.len()).map(|j| s_test.survival(j, t0)).collect();
        let needs_profile = config.methods.iter().any(|m| m.calibration().is_some());
        let prepared = if needs_profile {
            let weights = weights_for(config.flavor, &sp.cal, &g_cal, t0, config.winsor_pct)?;
            let profile = RiskProfile::new(&sp.cal, &cal_scores, &weights, t0)?;
            let grid = build_grid(&cal_scores, config.grid_size)?;
            Some((weights, profile, grid))
        } else {
            None
        };
        for &method in &config.methods {
            let selected: Vec<usize> = match method {
                Method::Greedy | Method::Bonferroni | Method::Multiplier | Method::Ltt => {
                    let (weights, profile, grid) = prepared.as_ref().expect("prepared for calibration");
                    let opts = CalibrationOptions {
                        alpha: config.alpha,
                        delta: config.delta,
                        n_min: config.n_min,
                        multiplier_draws: config.multiplier_draws,
                        seed: derive_seed(seed, "multiplier", ti as u64),
                    };
                    let cal = calibrate(method.calibration().expect("calibration method"), profile, weights, grid, &opts)?;
                    let rule = cal.rule(t0);
                    (0..test_scores.len()).filter(|&j| rule.selects(test_scores[j])).collect()
                }
                Method::Conformal => {
                    let gamma = match config.gamma {
                        GammaChoice::Fixed(g) => g,
                        GammaChoice::Tuned => {
                            let opts = TuneOptions {
                                reps: config.tune_reps,
                                winsor_pct: config.winsor_pct,
                                seed: derive_seed(seed, "tune", ti as u64),
                                ..TuneOptions::default()
                            };
                            tune_gamma(&sp.train, t0, config.alpha, &opts, Some((&s_model, &g_model)))?.gamma
                        }
                    };
                    let cfg = ConformalConfig {
                        alpha: config.alpha,
                        gamma,
                        nu: config.nu,
                        bootstrap_b: config.abstention_b,
                        winsor_pct: config.winsor_pct,
                        seed: derive_seed(seed, "conformal", ti as u64),
                        extrapolate: true,
                    };
                    fdr_screen(&s_cal, &g_cal, &sp.cal, &s_test, t0, &cfg)?.rejected
                }
                Method::ModelBased => {
                    let m = pooled_model.as_ref().expect("pooled model");
                    let c = m.curves_for(&sp.test)?;
                    let scores: Vec<f64> = (0..sp.test.len()).map(|j| c.survival(j, t0)).collect();
                    model_based_benchmark(&scores, 1.0 - config.alpha)
                }
                Method::Oracle => oracle_benchmark(sp.test_true.as_ref(), t0, 1.0 - config.alpha),
            };
            rows.push(MetricRow {
                method,
                t0,
                replicate: r,
                metrics: evaluate_selection(&selected, &sp.test_truth, t0),
            });
        }
    }
    Ok(rows)
}

/// Runs every replicate and collects one metrics row per
/// `(method, t0, replicate)`. A failing replicate is recorded and skipped.
pub fn run_protocol(config: &ReplicateConfig, population: &Population) -> Result<ProtocolOutput> {
    config.validate()?;
    let results: Vec<Result<Vec<MetricRow>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, population, r))
        .collect();
    let mut out = ProtocolOutput {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rows) => out.rows.extend(rows),
            Err(e) => out.failures.push((r, e.to_string())),
        }
    }
    Ok(out)
}
