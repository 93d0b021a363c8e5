//! Point-process likelihood above a threshold and its maximisation.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{gev_exceedance, GevParams, GUMBEL_EPS};
use crate::domain::{EventDefinition, RawSample, Tail};
use crate::error::{Error, Result};
use crate::estimation::{EstimateSource, ProbabilityEstimate};

pub const MIN_EXCEEDANCES: usize = 5;

/// Shape values at or beyond this magnitude count as hitting the box.
const XI_BOX: f64 = 1.0;
const XI_EDGE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotFit {
    pub params: GevParams,
    /// Threshold on the fitted (upper-tail) scale.
    pub threshold: f64,
    pub n_blocks: f64,
    pub n_exceedances: usize,
    pub n_values: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    /// Inverse observed information for `(mu, sigma, xi)`.
    pub hessian_inverse: Option<[[f64; 3]; 3]>,
    /// Orientation of the data the fit was made on.
    pub tail: Tail,
}

/// Point-process log-likelihood of the exceedances of `threshold` with
/// `n_blocks` blocks; `-inf` outside the parameter support.
pub fn pp_log_likelihood(p: &GevParams, exceedances: &[f64], threshold: f64, n_blocks: f64) -> f64 {
    let lam_u = p.intensity(threshold);
    if !lam_u.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut acc = -n_blocks * lam_u - exceedances.len() as f64 * p.sigma.ln();
    if p.xi.abs() < GUMBEL_EPS {
        for &y in exceedances {
            acc -= (y - p.mu) / p.sigma;
        }
        return acc;
    }
    let k = 1.0 / p.xi + 1.0;
    for &y in exceedances {
        let t = p.xi * (y - p.mu) / p.sigma;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc -= k * t.ln_1p();
    }
    acc
}

/// `(mu, log sigma, xi)` to parameters, rejecting shapes outside the box.
pub(crate) fn unpack(x: &[f64]) -> Option<GevParams> {
    if !(x[2].abs() < XI_BOX) || !x[1].is_finite() || !x[0].is_finite() {
        return None;
    }
    let sigma = x[1].exp();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return None;
    }
    Some(GevParams {
        mu: x[0],
        sigma,
        xi: x[2],
    })
}

struct Negated<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Negated<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let v = -(self.0)(x);
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Result of a simplex maximisation.
pub(crate) struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

fn simplex_run<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], steps: &[f64]) -> Option<Maximum> {
    let mut simplex = vec![start.to_vec()];
    for (i, s) in steps.iter().enumerate() {
        let mut v = start.to_vec();
        v[i] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-11).ok()?;
    let res = Executor::new(Negated(f), solver)
        .configure(|st| st.max_iters(4000))
        .run()
        .ok()?;
    let st = res.state();
    let x = st.get_best_param()?.clone();
    let value = -st.get_best_cost();
    let converged = matches!(
        st.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    value.is_finite().then_some(Maximum {
        x,
        value,
        converged,
    })
}

/// Maximises `f` from `start` with Nelder-Mead, restarting from the best
/// point with a shrinking simplex until the gain is negligible.
pub(crate) fn maximize<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    steps: &[f64],
) -> Option<Maximum> {
    if !f(start).is_finite() {
        return None;
    }
    let mut best = simplex_run(f, start, steps)?;
    let mut scale = 0.1;
    for _ in 0..6 {
        let s: Vec<f64> = steps.iter().map(|v| v * scale).collect();
        let Some(next) = simplex_run(f, &best.x, &s) else {
            break;
        };
        let gain = next.value - best.value;
        if gain >= 0.0 {
            best = Maximum {
                converged: next.converged,
                ..next
            };
        }
        if gain.abs() < 1e-10 {
            break;
        }
        scale *= 0.5;
    }
    Some(best)
}

/// Inverse of the negative Hessian of `ll` in natural parameters, if it is
/// positive definite.
fn covariance(ll: impl Fn(&GevParams) -> f64, p: &GevParams) -> Option<[[f64; 3]; 3]> {
    let theta = [p.mu, p.sigma, p.xi];
    let h: Vec<f64> = theta.iter().map(|t| 1e-4 * (1.0 + t.abs())).collect();
    let eval = |d: [f64; 3]| {
        let q = GevParams {
            mu: theta[0] + d[0],
            sigma: theta[1] + d[1],
            xi: theta[2] + d[2],
        };
        if q.sigma > 0.0 && q.xi.abs() < XI_BOX {
            ll(&q)
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let shift = |si: f64, sj: f64| {
                let mut d = [0.0; 3];
                d[i] += si * h[i];
                d[j] += sj * h[j];
                eval(d)
            };
            let v = if i == j {
                (shift(1.0, 0.0) - 2.0 * eval([0.0; 3]) + shift(-1.0, 0.0)) / (h[i] * h[i])
            } else {
                (shift(1.0, 1.0) - shift(1.0, -1.0) - shift(-1.0, 1.0) + shift(-1.0, -1.0))
                    / (4.0 * h[i] * h[j])
            };
            m[(i, j)] = -v;
            m[(j, i)] = -v;
        }
    }
    if !m.iter().all(|v| v.is_finite()) {
        return None;
    }
    let inv = m.cholesky()?.inverse();
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = inv[(i, j)];
        }
    }
    Some(out)
}

pub(crate) fn exceedances(values: &[f64], threshold: f64) -> Vec<f64> {
    values.iter().copied().filter(|&y| y > threshold).collect()
}

/// Simplex starts `mu = u`, `sigma = sd of exceedances`, `xi` in `{-0.1, 0, 0.1}`.
pub(crate) fn starts(exc: &[f64], threshold: f64) -> Vec<Vec<f64>> {
    let n = exc.len() as f64;
    let sd = if exc.len() > 1 {
        let m = exc.iter().sum::<f64>() / n;
        (exc.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let sigma = if sd > 0.0 { sd } else { 1.0 };
    [-0.1, 0.0, 0.1]
        .iter()
        .map(|&xi| vec![threshold, sigma.ln(), xi])
        .collect()
}

pub(crate) fn steps(start: &[f64]) -> Vec<f64> {
    vec![start[1].exp(), 0.3, 0.1]
}

/// Fits the point-process model to upper-tail data.
pub fn fit_pot(sample: &RawSample, threshold: f64, n_blocks: f64) -> Result<PotFit> {
    fit_values(sample.values(), threshold, n_blocks, Tail::Upper)
}

/// Fits the point-process model in the orientation of `tail`; for
/// [`Tail::Lower`] values and threshold are negated before fitting.
pub fn fit_pot_tail(
    sample: &RawSample,
    threshold: f64,
    n_blocks: f64,
    tail: Tail,
) -> Result<PotFit> {
    fit_values(
        &sample.oriented(tail),
        tail.orient(threshold),
        n_blocks,
        tail,
    )
}

pub(crate) fn fit_values(
    values: &[f64],
    threshold: f64,
    n_blocks: f64,
    tail: Tail,
) -> Result<PotFit> {
    if !(n_blocks > 0.0 && n_blocks.is_finite()) {
        return Err(Error::invalid(format!(
            "number of blocks must be positive, got {n_blocks}"
        )));
    }
    if !threshold.is_finite() {
        return Err(Error::invalid("threshold must be finite"));
    }
    let exc = exceedances(values, threshold);
    if exc.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientExceedances {
            found: exc.len(),
            required: MIN_EXCEEDANCES,
        });
    }
    let ll = |x: &[f64]| {
        unpack(x).map_or(f64::NEG_INFINITY, |p| {
            pp_log_likelihood(&p, &exc, threshold, n_blocks)
        })
    };

    let mut best: Option<Maximum> = None;
    for s in starts(&exc, threshold) {
        let Some(m) = maximize(&ll, &s, &steps(&s)) else {
            continue;
        };
        if !m.converged {
            continue;
        }
        if best.as_ref().is_none_or(|b| m.value > b.value) {
            best = Some(m);
        }
    }
    let best = best.ok_or_else(|| Error::Convergence {
        context: format!(
            "point-process fit with {} exceedances of {threshold}",
            exc.len()
        ),
        rr0: None,
    })?;
    let params = unpack(&best.x).expect("optimum lies in the parameter box");
    let interior = params.xi.abs() < XI_EDGE;
    let hessian_inverse = if interior {
        covariance(|p| pp_log_likelihood(p, &exc, threshold, n_blocks), &params)
    } else {
        None
    };
    Ok(PotFit {
        params,
        threshold,
        n_blocks,
        n_exceedances: exc.len(),
        n_values: values.len(),
        log_likelihood: best.value,
        converged: interior,
        hessian_inverse,
        tail,
    })
}

/// Per-block probability of exceeding the event cutoff under a fitted model.
pub fn eva_probability(fit: &PotFit, event: &EventDefinition) -> ProbabilityEstimate {
    let c = fit.tail.orient(event.cutoff());
    let mut est = ProbabilityEstimate::new(
        gev_exceedance(c, &fit.params),
        fit.n_values,
        EstimateSource::Eva,
    );
    if event.tail() != fit.tail {
        est.warnings.push(format!(
            "event tail {:?} differs from the fitted tail {:?}",
            event.tail(),
            fit.tail
        ));
    }
    if c < fit.threshold {
        est.warnings.push(format!(
            "cutoff {} lies on the non-extreme side of the threshold; the model is extrapolated below the fitted region",
            event.cutoff()
        ));
    }
    if !fit.converged {
        est.warnings.push("fit did not converge".into());
    }
    est
}
