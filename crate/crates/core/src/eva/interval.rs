//! Risk-ratio intervals from point-process fits to both scenarios.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::fit::{exceedances, fit_values, maximize, starts, steps, unpack, Maximum};
use super::{gev_exceedance, pp_log_likelihood, GevParams, GUMBEL_EPS};
use crate::domain::{
    check_level_side, risk_ratio_estimate, EventDefinition, ExtReal, Method, RatioInterval,
    RawSample, Side,
};
use crate::error::{Error, Result};
use crate::roots::{crossing, find_inside, LOG_LIMIT};
use crate::special::{chi2_1_quantile, z_two_sided};

/// One scenario's data for an extreme-value fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotInput {
    pub sample: RawSample,
    /// Threshold in data units (before any lower-tail negation).
    pub threshold: f64,
    pub n_blocks: f64,
}

impl PotInput {
    pub fn new(sample: RawSample, threshold: f64, n_blocks: f64) -> Self {
        Self {
            sample,
            threshold,
            n_blocks,
        }
    }
}

/// Location giving exceedance probability `p` of `c` for the given scale and shape.
fn location_for(c: f64, p: f64, sigma: f64, xi: f64) -> f64 {
    let y = -(-p).ln_1p();
    if xi.abs() < GUMBEL_EPS {
        c + sigma * y.ln()
    } else {
        c - sigma * (-xi * y.ln()).exp_m1() / xi
    }
}

/// Profile likelihood for `RR = RR0` across the two scenarios.
struct Profile {
    exc_f: Vec<f64>,
    u_f: f64,
    nt_f: f64,
    exc_c: Vec<f64>,
    u_c: f64,
    nt_c: f64,
    cutoff: f64,
    fit_f: GevParams,
    /// Counterfactual MLE; `None` when it has no exceedances.
    fit_c: Option<GevParams>,
    ll_hat: f64,
    p_f: f64,
    p_c: f64,
    warm: RefCell<Option<Vec<f64>>>,
}

impl Profile {
    fn new(factual: &PotInput, counterfactual: &PotInput, event: &EventDefinition) -> Result<Self> {
        let tail = event.tail();
        let vf = factual.sample.oriented(tail);
        let vc = counterfactual.sample.oriented(tail);
        let (u_f, u_c) = (
            tail.orient(factual.threshold),
            tail.orient(counterfactual.threshold),
        );
        let (nt_f, nt_c) = (factual.n_blocks, counterfactual.n_blocks);
        if !(nt_c > 0.0 && nt_c.is_finite() && u_c.is_finite()) {
            return Err(Error::invalid(
                "counterfactual threshold and block count must be finite and positive",
            ));
        }
        let f = fit_values(&vf, u_f, nt_f, tail)?;
        let exc_c = exceedances(&vc, u_c);
        let (fit_c, ll_c) = if exc_c.is_empty() {
            // With no exceedances the likelihood only approaches its supremum 0.
            (None, 0.0)
        } else {
            let ll = |x: &[f64]| {
                unpack(x).map_or(f64::NEG_INFINITY, |p| {
                    pp_log_likelihood(&p, &exc_c, u_c, nt_c)
                })
            };
            let best = starts(&exc_c, u_c)
                .into_iter()
                .filter_map(|s| maximize(&ll, &s, &steps(&s)))
                .fold(None::<Maximum>, |b, m| match b {
                    Some(b) if b.value >= m.value => Some(b),
                    _ => Some(m),
                })
                .ok_or_else(|| Error::Convergence {
                    context: "counterfactual point-process fit".into(),
                    rr0: None,
                })?;
            (unpack(&best.x), best.value)
        };
        let cutoff = event.oriented_cutoff();
        let p_f = gev_exceedance(cutoff, &f.params);
        let p_c = fit_c.map_or(0.0, |p| gev_exceedance(cutoff, &p));
        Ok(Self {
            exc_f: exceedances(&vf, u_f),
            u_f,
            nt_f,
            exc_c,
            u_c,
            nt_c,
            cutoff,
            fit_f: f.params,
            fit_c,
            ll_hat: f.log_likelihood + ll_c,
            p_f,
            p_c,
            warm: RefCell::new(None),
        })
    }

    /// Joint log-likelihood with the counterfactual location tied to `RR0`.
    /// Parameters: `(muF, log sigmaF, xiF, log sigmaC, xiC)`.
    fn constrained_ll(&self, x: &[f64], rr0: f64) -> f64 {
        let Some(pf) = unpack(&x[0..3]) else {
            return f64::NEG_INFINITY;
        };
        let Some(sc) = unpack(&[0.0, x[3], x[4]]) else {
            return f64::NEG_INFINITY;
        };
        let p_f = gev_exceedance(self.cutoff, &pf);
        let p_c = p_f / rr0;
        if !(p_c > 0.0 && p_c < 1.0) {
            return f64::NEG_INFINITY;
        }
        let pc = GevParams {
            mu: location_for(self.cutoff, p_c, sc.sigma, sc.xi),
            ..sc
        };
        if !pc.mu.is_finite() {
            return f64::NEG_INFINITY;
        }
        pp_log_likelihood(&pf, &self.exc_f, self.u_f, self.nt_f)
            + pp_log_likelihood(&pc, &self.exc_c, self.u_c, self.nt_c)
    }

    fn statistic(&self, rr0: f64) -> Result<f64> {
        if !(rr0 > 0.0 && rr0.is_finite()) {
            return Err(Error::invalid(format!(
                "RR0 must be positive and finite, got {rr0}"
            )));
        }
        let f = self.fit_f;
        let c = self.fit_c.unwrap_or(f);
        let mut candidates = vec![vec![f.mu, f.sigma.ln(), f.xi, c.sigma.ln(), c.xi]];
        if let Some(w) = self.warm.borrow().clone() {
            candidates.push(w);
        }
        let ll = |x: &[f64]| self.constrained_ll(x, rr0);
        let mut best: Option<Maximum> = None;
        for s in candidates {
            let st = [s[1].exp(), 0.3, 0.1, 0.3, 0.1];
            if let Some(m) = maximize(&ll, &s, &st) {
                if best.as_ref().is_none_or(|b| m.value > b.value) {
                    best = Some(m);
                }
            }
        }
        let best = best.ok_or_else(|| Error::Convergence {
            context: "constrained point-process fit has no feasible start".into(),
            rr0: Some(rr0),
        })?;
        if !best.converged {
            return Err(Error::Convergence {
                context: "constrained point-process fit".into(),
                rr0: Some(rr0),
            });
        }
        *self.warm.borrow_mut() = Some(best.x);
        Ok((2.0 * (self.ll_hat - best.value)).max(0.0))
    }
}

/// Likelihood-ratio statistic for `RR = RR0` under point-process fits.
pub fn eva_lr_statistic(
    factual: &PotInput,
    counterfactual: &PotInput,
    event: &EventDefinition,
    rr0: f64,
) -> Result<f64> {
    Profile::new(factual, counterfactual, event)?.statistic(rr0)
}

/// Likelihood-ratio interval for the risk ratio with both scenarios fitted by
/// the point-process model. The counterfactual may have no exceedances, in
/// which case the estimate is `inf` and only a lower bound is finite.
pub fn eva_lrt_interval(
    factual: &PotInput,
    counterfactual: &PotInput,
    event: &EventDefinition,
    level: f64,
    side: Side,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    let prof = Profile::new(factual, counterfactual, event)?;
    let estimate = risk_ratio_estimate(prof.p_f, prof.p_c);
    if estimate.is_undefined() {
        return Err(Error::not_computable(
            "fitted exceedance probability is zero in both scenarios",
        ));
    }
    let q = chi2_1_quantile(side.two_sided_level(level));
    let failure = RefCell::new(None);
    let mut g = |x: f64| match prof.statistic(x.exp()) {
        Ok(s) => s - q,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::INFINITY
        }
    };
    let (start, lower_open, upper_open) = match estimate {
        ExtReal::Finite(rr) if rr > 0.0 => (rr.ln(), false, false),
        ExtReal::PosInf => (find_inside(&mut g, 1.0).unwrap_or(LOG_LIMIT), false, true),
        _ => (find_inside(&mut g, -1.0).unwrap_or(-LOG_LIMIT), true, false),
    };
    let lower = if lower_open || !side.wants_lower() {
        ExtReal::ZERO
    } else {
        crossing(&mut g, start, -1.0).map_or(ExtReal::ZERO, |x| ExtReal::Finite(x.exp()))
    };
    let upper = if upper_open || !side.wants_upper() {
        ExtReal::PosInf
    } else {
        crossing(&mut g, start, 1.0).map_or(ExtReal::PosInf, |x| ExtReal::Finite(x.exp()))
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(
        RatioInterval::from_two_sided(Method::EvaLrt, estimate, lower, upper, level, side)
            .with_diagnostic("critical_value", q)
            .with_diagnostic("p_factual", prof.p_f)
            .with_diagnostic("p_counterfactual", prof.p_c),
    )
}

/// Gradient of `log(1 - F(c))` in `(mu, sigma, xi)` by central differences.
fn log_exceedance_gradient(c: f64, p: &GevParams) -> [f64; 3] {
    let theta = [p.mu, p.sigma, p.xi];
    let mut g = [0.0; 3];
    for i in 0..3 {
        let h = 1e-6 * (1.0 + theta[i].abs());
        let at = |d: f64| {
            let mut t = theta;
            t[i] += d;
            gev_exceedance(
                c,
                &GevParams {
                    mu: t[0],
                    sigma: t[1],
                    xi: t[2],
                },
            )
            .ln()
        };
        g[i] = (at(h) - at(-h)) / (2.0 * h);
    }
    g
}

/// Normal-theory interval for `log RR` with the six fitted parameters'
/// covariance taken from each fit's inverse observed information.
pub fn eva_delta_interval(
    factual: &PotInput,
    counterfactual: &PotInput,
    event: &EventDefinition,
    level: f64,
    side: Side,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    let tail = event.tail();
    let fit = |d: &PotInput| {
        fit_values(
            &d.sample.oriented(tail),
            tail.orient(d.threshold),
            d.n_blocks,
            tail,
        )
    };
    let (f, c) = (fit(factual)?, fit(counterfactual)?);
    let cutoff = event.oriented_cutoff();
    let (p_f, p_c) = (
        gev_exceedance(cutoff, &f.params),
        gev_exceedance(cutoff, &c.params),
    );
    if !(p_f > 0.0 && p_c > 0.0) {
        return Err(Error::not_computable(
            "a fitted exceedance probability is zero, so log RR is infinite",
        ));
    }
    let mut var = 0.0;
    for (fit, sign) in [(&f, 1.0), (&c, -1.0)] {
        let cov = fit
            .hessian_inverse
            .ok_or_else(|| Error::not_computable("fit has no invertible information matrix"))?;
        let g = log_exceedance_gradient(cutoff, &fit.params).map(|v| sign * v);
        for i in 0..3 {
            for j in 0..3 {
                var += g[i] * cov[i][j] * g[j];
            }
        }
    }
    let se = var.sqrt();
    let log_rr = (p_f / p_c).ln();
    let z = z_two_sided(side.two_sided_level(level));
    Ok(RatioInterval::from_two_sided(
        Method::EvaDelta,
        ExtReal::Finite(p_f / p_c),
        ExtReal::Finite((log_rr - z * se).exp()),
        ExtReal::Finite((log_rr + z * se).exp()),
        level,
        side,
    )
    .with_diagnostic("se_log_rr", se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn draws(mu: f64, sigma: f64, xi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let y = -rng.gen_range(f64::EPSILON..1.0f64).ln();
                mu + sigma * (y.powf(-xi) - 1.0) / xi
            })
            .collect()
    }

    fn q(v: &[f64], p: f64) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1]
    }

    fn input(v: Vec<f64>) -> PotInput {
        let u = q(&v, 0.9);
        let n = v.len() as f64;
        PotInput::new(RawSample::new(v).unwrap(), u, n)
    }

    #[test]
    fn location_constraint_reproduces_probability() {
        for xi in [-0.3, 0.0, 0.2] {
            let mu = location_for(2.0, 0.01, 1.3, xi);
            let p = gev_exceedance(2.0, &GevParams::new(mu, 1.3, xi).unwrap());
            assert!((p - 0.01).abs() < 1e-14, "{xi}: {p}");
        }
    }

    #[test]
    fn synthetic_shift_profile_is_zero_at_estimate() {
        let f = draws(1.0, 1.0, 0.1, 400, 21);
        let c = draws(0.0, 1.0, 0.1, 400, 22);
        let cutoff = q(&f, 0.9);
        let (fi, ci) = (input(f), input(c));
        let e = EventDefinition::upper(cutoff).unwrap();
        let ci_ = eva_lrt_interval(&fi, &ci, &e, 0.9, Side::TwoSided).unwrap();
        let rr = ci_.estimate.to_f64();
        assert!(rr > 1.0);
        let lam = eva_lr_statistic(&fi, &ci, &e, rr).unwrap();
        assert!(lam < 1e-8, "{lam}");
        assert!(ci_.lower.to_f64() < rr && rr < ci_.upper.to_f64());
        for r in [0.5, 1.0, 2.0, 5.0] {
            assert!(eva_lr_statistic(&fi, &ci, &e, r).unwrap() >= 0.0);
        }
    }

    #[test]
    fn identical_samples_cover_one() {
        let v = draws(0.0, 1.0, 0.1, 300, 4);
        let e = EventDefinition::upper(q(&v, 0.95)).unwrap();
        let ci = eva_lrt_interval(&input(v.clone()), &input(v), &e, 0.9, Side::TwoSided).unwrap();
        assert!(ci.contains(1.0));
        assert!((ci.estimate.to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counterfactual_without_exceedances_gives_lower_bound_only() {
        let f = draws(2.0, 1.0, 0.0001, 400, 8);
        let c = draws(0.0, 0.5, -0.2, 400, 9);
        let cmax = c.iter().cloned().fold(f64::MIN, f64::max);
        let cutoff = cmax + 0.5;
        let fi = input(f);
        // Threshold above every counterfactual value: no exceedances.
        let ci_in = PotInput::new(RawSample::new(c).unwrap(), cmax + 0.1, 400.0);
        let e = EventDefinition::upper(cutoff).unwrap();
        let ci = eva_lrt_interval(&fi, &ci_in, &e, 0.95, Side::LowerOneSided).unwrap();
        assert_eq!(ci.estimate, ExtReal::PosInf);
        assert_eq!(ci.upper, ExtReal::PosInf);
        let lo = ci.lower.to_f64();
        assert!(lo > 1.0 && lo.is_finite(), "{lo}");
        assert!(eva_delta_interval(&fi, &ci_in, &e, 0.95, Side::LowerOneSided).is_err());
    }

    #[test]
    fn delta_interval_brackets_estimate() {
        let f = draws(1.0, 1.0, 0.1, 400, 31);
        let c = draws(0.0, 1.0, 0.1, 400, 32);
        let e = EventDefinition::upper(q(&f, 0.9)).unwrap();
        let ci = eva_delta_interval(
            &input(f.clone()),
            &input(c.clone()),
            &e,
            0.9,
            Side::TwoSided,
        )
        .unwrap();
        let lrt = eva_lrt_interval(&input(f), &input(c), &e, 0.9, Side::TwoSided).unwrap();
        assert!(ci.lower < ci.estimate && ci.estimate < ci.upper);
        assert!((ci.estimate.to_f64() / lrt.estimate.to_f64() - 1.0).abs() < 1e-6);
        assert!(ci.diagnostics["se_log_rr"] > 0.0);
    }
}
