//! Likelihood-ratio and score (Koopman) inversion for the binomial risk ratio.

use serde::{Deserialize, Serialize};

use crate::domain::{check_level_side, CountPair, ExtReal, Method, RatioInterval, Side};
use crate::error::{Error, Result};
use crate::roots::{crossing, find_inside};
use crate::special::{binomial_loglik, chi2_1_quantile};

/// Maximum-likelihood probabilities under the restriction `pF = rr0 * pC`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedMle {
    pub p_f: f64,
    pub p_c: f64,
    pub rr0: f64,
}

/// Closed-form constrained MLE: the smaller root of the score quadratic
/// `rr0 (nF + nC) pC^2 - (rr0 (nF + yC) + yF + nC) pC + (yF + yC) = 0`.
pub fn constrained_binomial_mle(counts: &CountPair, rr0: f64) -> Result<ConstrainedMle> {
    if !(rr0 > 0.0 && rr0.is_finite()) {
        return Err(Error::invalid(format!(
            "RR0 must be positive and finite, got {rr0}"
        )));
    }
    let (y_f, n_f) = (counts.y_f() as f64, counts.n_f() as f64);
    let (y_c, n_c) = (counts.y_c() as f64, counts.n_c() as f64);
    let a = rr0 * (n_f + n_c);
    let b = rr0 * (n_f + y_c) + y_f + n_c;
    let c = y_f + y_c;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    // Smaller root in the cancellation-free form 2c / (b + sqrt(disc)).
    let p_c = if c == 0.0 {
        0.0
    } else {
        2.0 * c / (b + disc.sqrt())
    };
    let p_c = p_c.clamp(0.0, (1.0f64).min(1.0 / rr0));
    let p_f = (rr0 * p_c).min(1.0);
    Ok(ConstrainedMle { p_f, p_c, rr0 })
}

fn loglik(counts: &CountPair, p_f: f64, p_c: f64) -> f64 {
    binomial_loglik(counts.y_f() as f64, counts.n_f() as f64, p_f)
        + binomial_loglik(counts.y_c() as f64, counts.n_c() as f64, p_c)
}

/// Likelihood-ratio statistic `2 (l(pF-hat, pC-hat) - l(constrained))`, never negative.
pub fn lr_statistic(counts: &CountPair, rr0: f64) -> Result<f64> {
    let m = constrained_binomial_mle(counts, rr0)?;
    let full = loglik(
        counts,
        counts.factual.proportion(),
        counts.counterfactual.proportion(),
    );
    let restricted = loglik(counts, m.p_f, m.p_c);
    Ok((2.0 * (full - restricted)).max(0.0))
}

fn pearson_term(y: f64, n: f64, p: f64) -> f64 {
    let num = (y - n * p).powi(2);
    let den = n * p * (1.0 - p);
    if den > 0.0 {
        num / den
    } else if num < 1e-24 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Koopman's score statistic: Pearson chi-square with expected counts from the
/// constrained MLE.
pub fn koopman_statistic(counts: &CountPair, rr0: f64) -> Result<f64> {
    let m = constrained_binomial_mle(counts, rr0)?;
    Ok(
        pearson_term(counts.y_f() as f64, counts.n_f() as f64, m.p_f)
            + pearson_term(counts.y_c() as f64, counts.n_c() as f64, m.p_c),
    )
}

/// Inverts a statistic that vanishes at the point estimate and grows away from
/// it on the log scale: the interval is `{RR0 : stat(RR0) < q}`.
fn invert<S>(
    counts: &CountPair,
    level: f64,
    side: Side,
    method: Method,
    stat: S,
) -> Result<RatioInterval>
where
    S: Fn(&CountPair, f64) -> Result<f64>,
{
    check_level_side(level, side)?;
    if counts.y_f() == 0 && counts.y_c() == 0 {
        return Err(Error::not_computable(
            "both counts zero: no events in either scenario",
        ));
    }
    let q = chi2_1_quantile(side.two_sided_level(level));
    let mut g = |log_rr0: f64| stat(counts, log_rr0.exp()).map_or(f64::INFINITY, |s| s - q);
    let estimate = counts.risk_ratio();

    let (start, lower_open, upper_open) = match estimate {
        ExtReal::Finite(rr) if rr > 0.0 => (rr.ln(), false, false),
        ExtReal::PosInf => (
            find_inside(&mut g, 1.0).unwrap_or(crate::roots::LOG_LIMIT),
            false,
            true,
        ),
        _ => (
            find_inside(&mut g, -1.0).unwrap_or(-crate::roots::LOG_LIMIT),
            true,
            false,
        ),
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
    Ok(
        RatioInterval::from_two_sided(method, estimate, lower, upper, level, side)
            .with_diagnostic("critical_value", q),
    )
}

/// Likelihood-ratio test inversion.
///
/// With `yC = 0` the upper end is `inf`, with `yF = 0` the lower end is `0`.
pub fn lrt_interval(counts: &CountPair, level: f64, side: Side) -> Result<RatioInterval> {
    invert(counts, level, side, Method::Lrt, lr_statistic)
}

/// Koopman score-test inversion.
pub fn koopman_interval(counts: &CountPair, level: f64, side: Side) -> Result<RatioInterval> {
    invert(counts, level, side, Method::Koopman, koopman_statistic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cp(y_f: u64, y_c: u64, n: u64) -> CountPair {
        CountPair::new(y_f, n, y_c, n).unwrap()
    }

    /// Maximises the profile log-likelihood in pC by bisection on the sign of
    /// its derivative (the profile is concave on `[0, min(1, 1/rr0)]`).
    fn numeric_constrained_p_c(c: &CountPair, rr0: f64) -> f64 {
        let (y_f, n_f, y_c, n_c) = (
            c.y_f() as f64,
            c.n_f() as f64,
            c.y_c() as f64,
            c.n_c() as f64,
        );
        let d = |p: f64| {
            let pf = rr0 * p;
            y_f / p - (n_f - y_f) * rr0 / (1.0 - pf) + y_c / p - (n_c - y_c) / (1.0 - p)
        };
        let (mut lo, mut hi) = (0.0, (1.0f64).min(1.0 / rr0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if d(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn constraint_at_observed_ratio_recovers_mle() {
        let c = cp(129, 3, 400);
        let m = constrained_binomial_mle(&c, 43.0).unwrap();
        assert!((m.p_f - 0.3225).abs() < 1e-12);
        assert!((m.p_c - 0.0075).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_numeric_profile() {
        let c = cp(129, 3, 400);
        let m = constrained_binomial_mle(&c, 10.0).unwrap();
        assert!((m.p_c - numeric_constrained_p_c(&c, 10.0)).abs() < 1e-8);
        assert!((m.p_f - 10.0 * m.p_c).abs() < 1e-12 * m.p_f);
    }

    #[test]
    fn both_zero_gives_zero_probabilities() {
        let m = constrained_binomial_mle(&cp(0, 0, 50), 3.0).unwrap();
        assert_eq!((m.p_f, m.p_c), (0.0, 0.0));
        assert!(lrt_interval(&cp(0, 0, 50), 0.9, Side::TwoSided).is_err());
        assert!(koopman_interval(&cp(0, 0, 50), 0.9, Side::TwoSided).is_err());
    }

    #[test]
    fn lr_statistic_zero_at_estimate() {
        let c = cp(245, 11, 400);
        assert!(lr_statistic(&c, 245.0 / 11.0).unwrap() < 1e-10);
        assert!(koopman_statistic(&c, 245.0 / 11.0).unwrap() < 1e-10);
    }

    #[test]
    fn table_rows() {
        let ci = lrt_interval(&cp(129, 3, 400), 0.90, Side::TwoSided).unwrap();
        assert_eq!(ci.lower.to_f64().round(), 19.0);
        assert_eq!(ci.upper.to_f64().round(), 133.0);
        let k = koopman_interval(&cp(357, 90, 400), 0.90, Side::TwoSided).unwrap();
        assert!((k.lower.to_f64() - 3.4).abs() < 0.05 && (k.upper.to_f64() - 4.6).abs() < 0.05);
    }

    #[test]
    fn zero_counterfactual_is_one_sided() {
        let ci = lrt_interval(&cp(43, 0, 400), 0.95, Side::LowerOneSided).unwrap();
        assert_eq!(ci.upper, ExtReal::PosInf);
        assert_eq!(ci.lower.to_f64().round(), 31.0);
        let two = lrt_interval(&cp(2, 0, 400), 0.90, Side::TwoSided).unwrap();
        assert_eq!(two.upper, ExtReal::PosInf);
        assert!((two.lower.to_f64() - 1.04).abs() < 0.005);
        let k = koopman_interval(&cp(2, 0, 400), 0.95, Side::LowerOneSided).unwrap();
        assert!((k.lower.to_f64() - 0.74).abs() < 0.005);
    }

    #[test]
    fn zero_factual_has_zero_lower() {
        let ci = koopman_interval(&cp(0, 7, 100), 0.90, Side::TwoSided).unwrap();
        assert_eq!(ci.lower, ExtReal::ZERO);
        assert!(ci.upper.is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn closed_form_agrees_with_profile(n_f in 1u64..300, n_c in 1u64..300, uf in 0.0f64..1.0, uc in 0.0f64..1.0, lr in -4.0f64..4.0) {
            let y_f = (uf * n_f as f64).floor() as u64;
            let y_c = (uc * n_c as f64).floor() as u64;
            prop_assume!(y_f + y_c > 0);
            let c = CountPair::new(y_f, n_f, y_c, n_c).unwrap();
            let rr0 = lr.exp();
            let m = constrained_binomial_mle(&c, rr0).unwrap();
            prop_assert!((m.p_c - numeric_constrained_p_c(&c, rr0)).abs() < 1e-8);
        }

        #[test]
        fn reciprocal_under_swap(y_f in 0u64..60, y_c in 0u64..60) {
            prop_assume!(y_f + y_c > 0);
            let c = cp(y_f, y_c, 60);
            for f in [lrt_interval, koopman_interval] {
                let a = f(&c, 0.9, Side::TwoSided).unwrap();
                let b = f(&c.swapped(), 0.9, Side::TwoSided).unwrap();
                let (al, bu) = (a.lower.to_f64(), b.upper.recip().to_f64());
                prop_assert!((al - bu).abs() <= 1e-6 * al.max(1e-300), "{} vs {}", al, bu);
            }
        }

        #[test]
        fn lr_nonnegative(y_f in 0u64..40, y_c in 0u64..40, lr in -6.0f64..6.0) {
            let c = cp(y_f, y_c, 40);
            prop_assert!(lr_statistic(&c, lr.exp()).unwrap() >= 0.0);
        }
    }
}
