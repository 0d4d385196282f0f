//! Calibrated low-risk screening on right-censored survival data.
//!
//! A screening rule selects subjects whose predicted survival at a horizon
//! `t0` exceeds a threshold `lambda`. This crate estimates the event rate
//! among the selected with inverse-probability-of-censoring weights and
//! chooses `lambda` so that the rate stays below a target `alpha`, either with
//! high probability (greedy, uniform-band and Learn-Then-Test calibrators) or
//! in expectation over a test cohort (conformal selection with FDR control).

pub mod bounds;
pub mod calibrate;
pub mod conformal;
pub mod error;
pub mod io;
pub mod ipcw;
pub mod models;
pub mod report;
pub mod seed;
pub mod simulate;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use ipcw::{Flavor, RiskEstimate, RiskProfile, WeightVector};
pub use models::{CoxModel, CoxOptions, WeibullModel, WeibullPopulation};
pub use types::{
    CensoredDataset, CensoredRecord, ConditionalSurvival, ScoreDefinition, ScreeningRule, SurvivalCurve,
    SurvivalCurveSet, TimeGrid,
};
