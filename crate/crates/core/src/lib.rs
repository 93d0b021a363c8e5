//! Risk-ratio estimation and uncertainty quantification for event attribution.
//!
//! Given factual and counterfactual ensembles, the crate estimates the
//! probability of an event in each scenario, the risk ratio `RR = pF / pC`,
//! and confidence intervals for it by normal theory, likelihood-ratio and
//! score test inversion, exact unconditional inversion, and five bootstrap
//! constructions. Extreme-value (point-process) fitting, the time-averaged
//! estimator for ensembles spanning several years, and a coverage-simulation
//! harness round it out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod domain;
pub mod error;
pub mod estimation;
pub mod eva;
pub mod internal_variability;
pub mod ratio_intervals;
mod roots;
pub mod simstudy;
pub mod special;

pub use domain::{
    risk_ratio_estimate, BinomialCount, CountPair, EventDefinition, ExtReal, Method, RatioInterval,
    RawSample, Sample, ScenarioPair, Side, Tail,
};
pub use error::{Error, Result};
