//! Shared fixtures for the benchmarks.

use lowrisk::ipcw::event_time_weights;
use lowrisk::models::{fit_censoring, fit_cox};
use lowrisk::simulate::sample_population;
use lowrisk::{CensoredDataset, ConditionalSurvival, CoxModel, CoxOptions, RiskProfile, WeibullPopulation, WeightVector};

pub const T0: f64 = 3.0;

pub fn dataset(n: usize, seed: u64) -> CensoredDataset {
    sample_population(&WeibullPopulation::reference(), n, seed, "b").unwrap().data
}

pub struct Calibration {
    pub s_model: CoxModel,
    pub g_model: CoxModel,
    pub cal: CensoredDataset,
    pub scores: Vec<f64>,
    pub weights: WeightVector,
}

impl Calibration {
    pub fn new(n_train: usize, n_cal: usize) -> Self {
        let train = dataset(n_train, 1);
        let s_model = fit_cox(&train, CoxOptions::default()).unwrap();
        let g_model = fit_censoring(&train, CoxOptions::default()).unwrap();
        let cal = dataset(n_cal, 2);
        let s = s_model.curves_for(&cal).unwrap();
        let scores = (0..cal.len()).map(|i| s.survival(i, T0)).collect();
        let weights = event_time_weights(&cal, &g_model.curves_for(&cal).unwrap(), 99.0).unwrap();
        Self { s_model, g_model, cal, scores, weights }
    }

    pub fn profile(&self) -> RiskProfile {
        RiskProfile::new(&self.cal, &self.scores, &self.weights, T0).unwrap()
    }
}
