//! Normal, chi-square and binomial helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// Upper-tail mass of the standard normal, `P(Z > x)`, with full relative
/// accuracy far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    normal_sf(-x)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

/// Two-sided normal critical value for a two-sided level `level`.
pub fn z_two_sided(level: f64) -> f64 {
    normal_quantile(0.5 + level / 2.0)
}

// Upper quantiles of chi-square(1) at 1 - alpha, alpha in {0.10, 0.05, 0.025, 0.01}.
const CHI2_1_TABLE: [(f64, f64); 4] = [
    (0.10, 2.705_543_454_095_41),
    (0.05, 3.841_458_820_694_12),
    (0.025, 5.023_886_187_314_89),
    (0.01, 6.634_896_601_021_21),
];

/// The `p` quantile of the chi-square distribution with one degree of freedom.
pub fn chi2_1_quantile(p: f64) -> f64 {
    let alpha = 1.0 - p;
    if let Some(&(_, q)) = CHI2_1_TABLE.iter().find(|(a, _)| (a - alpha).abs() < 1e-12) {
        return q;
    }
    ChiSquared::new(1.0).expect("chi-square(1)").inverse_cdf(p)
}

/// `ln n!`
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `ln C(n, k)`
pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `x ln y` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Binomial log-likelihood kernel `y ln p + (n - y) ln(1 - p)` (no combinatorial term).
#[inline]
pub fn binomial_loglik(y: f64, n: f64, p: f64) -> f64 {
    xlogy(y, p) + xlogy(n - y, 1.0 - p)
}

/// Binomial probability mass function.
pub fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

/// Fills `out[0..=n]` with the Binomial(n, p) pmf.
///
/// Works outward from the mode so neither tail underflows the recursion.
pub fn binomial_pmf_into(n: usize, p: f64, out: &mut [f64]) {
    let out = &mut out[..=n];
    if p <= 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    if p >= 1.0 {
        out.fill(0.0);
        out[n] = 1.0;
        return;
    }
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as usize;
    out[mode] = binomial_pmf(mode as u64, n as u64, p);
    let odds = p / (1.0 - p);
    for k in mode..n {
        out[k + 1] = out[k] * odds * (n - k) as f64 / (k + 1) as f64;
    }
    let inv = (1.0 - p) / p;
    for k in (0..mode).rev() {
        out[k] = out[k + 1] * inv * (k + 1) as f64 / (n - k) as f64;
    }
}
