//! Shared data model: censored datasets, step survival curves and screening
//! rules.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// One right-censored observation `(X, min(T, C), 1{T < C})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredRecord {
    pub id: String,
    pub covariates: Vec<f64>,
    pub observed_time: f64,
    pub event: bool,
}

impl CensoredRecord {
    pub fn new(id: impl Into<String>, covariates: Vec<f64>, observed_time: f64, event: bool) -> Self {
        Self {
            id: id.into(),
            covariates,
            observed_time,
            event,
        }
    }
}

/// A validated collection of records sharing one covariate dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CensoredDataset {
    records: Vec<CensoredRecord>,
    dimension: usize,
}

impl CensoredDataset {
    /// Builds and validates a dataset. The dimension is taken from the first
    /// record (zero for an empty dataset).
    pub fn new(records: Vec<CensoredRecord>) -> Result<Self> {
        let dimension = records.first().map_or(0, |r| r.covariates.len());
        validate_dataset(CensoredDataset { records, dimension })
    }

    pub fn with_dimension(records: Vec<CensoredRecord>, dimension: usize) -> Result<Self> {
        validate_dataset(CensoredDataset { records, dimension })
    }

    pub fn records(&self) -> &[CensoredRecord] {
        &self.records
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CensoredRecord> {
        self.records.iter()
    }

    pub fn covariate_rows(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.covariates.as_slice()).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    /// Records at the given positions, in that order.
    pub fn subset(&self, indices: &[usize]) -> CensoredDataset {
        CensoredDataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            dimension: self.dimension,
        }
    }

    /// Same records with `E` replaced by `1 - E`.
    pub fn with_flipped_events(&self) -> CensoredDataset {
        CensoredDataset {
            records: self
                .records
                .iter()
                .map(|r| CensoredRecord {
                    event: !r.event,
                    ..r.clone()
                })
                .collect(),
            dimension: self.dimension,
        }
    }
}

/// Checks every record invariant and returns the dataset unchanged on success.
pub fn validate_dataset(raw: CensoredDataset) -> Result<CensoredDataset> {
    let mut seen = HashSet::with_capacity(raw.records.len());
    for r in &raw.records {
        if !r.observed_time.is_finite() {
            return Err(Error::validation(&r.id, "time", "not a finite number"));
        }
        if r.observed_time < 0.0 {
            return Err(Error::validation(&r.id, "time", format!("negative value {}", r.observed_time)));
        }
        if r.covariates.len() != raw.dimension {
            return Err(Error::validation(
                &r.id,
                "covariates",
                format!("expected {} values, found {}", raw.dimension, r.covariates.len()),
            ));
        }
        if let Some(j) = r.covariates.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation(&r.id, &format!("x{}", j + 1), "not a finite number"));
        }
        if !seen.insert(r.id.as_str()) {
            return Err(Error::validation(&r.id, "id", "duplicate id"));
        }
    }
    Ok(raw)
}

/// Strictly increasing, nonnegative knot times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArgument("time grid is empty".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidArgument("time grid entries must be finite and >= 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `points` equally spaced knots on `[0, end]`.
    pub fn uniform(end: f64, points: usize) -> Result<Self> {
        if points < 2 || end <= 0.0 {
            return Err(Error::InvalidArgument("uniform grid needs end > 0 and >= 2 points".into()));
        }
        let step = end / (points - 1) as f64;
        Self::new((0..points).map(|k| k as f64 * step).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Number of knots `<= t`.
    fn count_le(&self, t: f64) -> usize {
        self.times.partition_point(|&g| g <= t)
    }
}

fn step_value(grid: &TimeGrid, values: &[f64], t: f64) -> f64 {
    match grid.count_le(t) {
        0 => 1.0,
        k => values[k - 1],
    }
}

/// Left limit: value at the largest knot strictly below `t`.
fn step_value_before(grid: &TimeGrid, values: &[f64], t: f64) -> f64 {
    match grid.times.partition_point(|&g| g < t) {
        0 => 1.0,
        k => values[k - 1],
    }
}

fn check_curve_values(values: &[f64], len: usize) -> Result<()> {
    if values.len() != len {
        return Err(Error::InvalidArgument(format!(
            "curve has {} values for {} grid times",
            values.len(),
            len
        )));
    }
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("curve values must lie in [0, 1]".into()));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("curve values must be nonincreasing".into()));
    }
    Ok(())
}

/// A right-continuous, nonincreasing step survival function.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SurvivalCurve {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        check_curve_values(&values, grid.len())?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Value at the largest knot `<= t`; 1 before the first knot and the last
/// value past the end of the grid.
pub fn evaluate_curve(curve: &SurvivalCurve, t: f64) -> f64 {
    step_value(&curve.grid, &curve.values, t)
}

/// Source of per-subject conditional survival functions `S(t | X_i)`.
///
/// Implemented by tabulated curve sets as well as by fitted and generative
/// models that evaluate lazily.
pub trait ConditionalSurvival: Sync {
    fn n_subjects(&self) -> usize;

    /// `S(t | X_i)`.
    fn survival(&self, subject: usize, t: f64) -> f64;

    /// Left limit `S(t- | X_i)`.
    fn survival_before(&self, subject: usize, t: f64) -> f64;

    /// Draws a time by inverse-CDF sampling: the smallest `t` with
    /// `S(t | X_i) <= u`.
    fn sample_time(&self, subject: usize, u: f64) -> f64;

    /// Last tabulated time, when the source is only defined on a finite grid.
    fn grid_end(&self) -> Option<f64> {
        None
    }
}

/// Per-subject step curves tabulated on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurveSet {
    ids: Vec<String>,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SurvivalCurveSet {
    pub fn new(ids: Vec<String>, grid: TimeGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::InvalidArgument("one id per curve row required".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * grid.len());
        for (id, row) in ids.iter().zip(&rows) {
            check_curve_values(row, grid.len())
                .map_err(|e| Error::validation(id, "curve", e.to_string()))?;
            values.extend_from_slice(row);
        }
        Ok(Self { ids, grid, values })
    }

    /// Tabulates any survival source on `grid`.
    pub fn tabulate(source: &dyn ConditionalSurvival, ids: Vec<String>, grid: TimeGrid) -> Result<Self> {
        if ids.len() != source.n_subjects() {
            return Err(Error::Alignment(format!(
                "{} ids for {} subjects",
                ids.len(),
                source.n_subjects()
            )));
        }
        let rows = (0..ids.len())
            .map(|i| {
                let mut prev = 1.0_f64;
                grid.times()
                    .iter()
                    .map(|&t| {
                        // clamp away rounding noise so rows stay monotone
                        prev = source.survival(i, t).clamp(0.0, prev);
                        prev
                    })
                    .collect()
            })
            .collect();
        Self::new(ids, grid, rows)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, subject: usize) -> &[f64] {
        let k = self.grid.len();
        &self.values[subject * k..(subject + 1) * k]
    }

    pub fn curve(&self, subject: usize) -> SurvivalCurve {
        SurvivalCurve {
            grid: self.grid.clone(),
            values: self.row(subject).to_vec(),
        }
    }

    /// Curves reordered to follow `ids`; fails if any id is missing.
    pub fn aligned_to(&self, ids: &[String]) -> Result<SurvivalCurveSet> {
        let index: std::collections::HashMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut values = Vec::with_capacity(ids.len() * self.grid.len());
        for id in ids {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| Error::Alignment(format!("no curve for subject {id}")))?;
            values.extend_from_slice(self.row(i));
        }
        Ok(SurvivalCurveSet {
            ids: ids.to_vec(),
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn subset(&self, indices: &[usize]) -> SurvivalCurveSet {
        let ids: Vec<String> = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let mut values = Vec::with_capacity(indices.len() * self.grid.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        SurvivalCurveSet {
            ids,
            grid: self.grid.clone(),
            values,
        }
    }
}

impl ConditionalSurvival for SurvivalCurveSet {
    fn n_subjects(&self) -> usize {
        self.ids.len()
    }

    fn survival(&self, subject: usize, t: f64) -> f64 {
        step_value(&self.grid, self.row(subject), t)
    }

    fn survival_before(&self, subject: usize, t: f64) -> f64 {
        step_value_before(&self.grid, self.row(subject), t)
    }

    fn sample_time(&self, subject: usize, u: f64) -> f64 {
        crate::simulate::inverse_step(&self.grid, self.row(subject), u)
    }

    fn grid_end(&self) -> Option<f64> {
        Some(self.grid.last())
    }
}

/// What the screening score measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDefinition {
    /// `s(x) = S_hat(t0 | x)`.
    SurvivalAt { horizon: f64 },
}

/// `A_lambda(x) = 1{s(x) > lambda}`; `threshold = None` abstains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningRule {
    pub threshold: Option<f64>,
    pub score: ScoreDefinition,
}

impl ScreeningRule {
    pub fn new(threshold: f64, horizon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(Self {
            threshold: Some(threshold),
            score: ScoreDefinition::SurvivalAt { horizon },
        })
    }

    pub fn abstain(horizon: f64) -> Self {
        Self {
            threshold: None,
            score: ScoreDefinition::SurvivalAt { horizon },
        }
    }

    pub fn selects(&self, score: f64) -> bool {
        self.threshold.is_some_and(|lambda| score > lambda)
    }
}

pub fn apply_rule(rule: &ScreeningRule, scores: &[f64]) -> Vec<bool> {
    scores.iter().map(|&s| rule.selects(s)).collect()
}
