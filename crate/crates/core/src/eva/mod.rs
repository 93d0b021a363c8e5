//! Extreme value analysis: the GEV distribution, point-process fits above a
//! threshold, and likelihood-based risk-ratio intervals built on them.
//!
//! Everything here is written for the upper tail. Lower-tail events are
//! handled by negating values, thresholds and cutoffs, which the fitting and
//! interval functions do when given a lower-tail [`EventDefinition`].
//!
//! [`EventDefinition`]: crate::domain::EventDefinition

mod fit;
mod interval;

pub use fit::{eva_probability, fit_pot, fit_pot_tail, pp_log_likelihood, PotFit, MIN_EXCEEDANCES};
pub use interval::{eva_delta_interval, eva_lr_statistic, eva_lrt_interval, PotInput};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|xi|` the Gumbel limit is used.
pub const GUMBEL_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite() && xi.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid GEV parameters ({mu}, {sigma}, {xi})"
            )));
        }
        Ok(Self { mu, sigma, xi })
    }

    /// `-log F(y)`, the expected number of block maxima above `y` per block;
    /// `inf` below the lower end of the support, `0` above the upper end.
    pub fn intensity(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        if self.xi.abs() < GUMBEL_EPS {
            return (-z).exp();
        }
        let t = self.xi * z;
        if t <= -1.0 {
            return if self.xi > 0.0 { f64::INFINITY } else { 0.0 };
        }
        (-t.ln_1p() / self.xi).exp()
    }
}

/// GEV distribution function.
pub fn gev_cdf(y: f64, p: &GevParams) -> f64 {
    (-p.intensity(y)).exp()
}

/// `1 - F(y)`, accurate when `F(y)` is close to one.
pub fn gev_exceedance(y: f64, p: &GevParams) -> f64 {
    -(-p.intensity(y)).exp_m1()
}

/// Level exceeded by the block maximum with probability `1 / T`.
pub fn return_value(period: f64, p: &GevParams) -> Result<f64> {
    if !(period > 1.0) {
        return Err(Error::invalid(format!(
            "return period must exceed 1, got {period}"
        )));
    }
    let y = -(-1.0 / period).ln_1p();
    if p.xi.abs() < GUMBEL_EPS {
        return Ok(p.mu - p.sigma * y.ln());
    }
    Ok(p.mu + p.sigma * (-p.xi * y.ln()).exp_m1() / p.xi)
}

/// Return period `1 / (1 - F(z))`.
pub fn return_period(z: f64, p: &GevParams) -> f64 {
    1.0 / gev_exceedance(z, p)
}

/// Probability that the maximum over `b` blocks exceeds a level that a
/// single block's maximum exceeds with probability `p_one`, assuming
/// independent blocks: `1 - (1 - p_one)^b`.
pub fn multi_block_exceedance(p_one: f64, b: f64) -> f64 {
    -(b * (-p_one).ln_1p()).exp_m1()
}

/// Inverse of [`multi_block_exceedance`]: `1 - (1 - p_b)^(1 / b)`.
pub fn single_block_exceedance(p_b: f64, b: f64) -> f64 {
    -((-p_b).ln_1p() / b).exp_m1()
}
