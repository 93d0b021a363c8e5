use crate::domain::{check_level_side, CountPair, ExtReal, Method, RatioInterval, Side};
use crate::error::{Error, Result};
use crate::special::z_two_sided;

/// Wilson score interval for a binomial proportion `successes / trials`.
pub(crate) fn wilson_score(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let s = trials as f64;
    let theta = successes as f64 / s;
    let z2 = z * z;
    let denom = 1.0 + z2 / s;
    let center = (theta + z2 / (2.0 * s)) / denom;
    let half = z / denom * (theta * (1.0 - theta) / s + z2 / (4.0 * s * s)).sqrt();
    (center - half, center + half)
}

/// Conditional interval: given `s = yF + yC`, `yF` is binomial with
/// `theta = nF pF / (nF pF + nC pC)`; the Wilson interval for `theta` maps to
/// `RR = (nC / nF) theta / (1 - theta)`.
pub fn wilson_interval(counts: &CountPair, level: f64, side: Side) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    let s = counts.y_f() + counts.y_c();
    if s == 0 {
        return Err(Error::not_computable(
            "both counts zero: no events in either scenario",
        ));
    }
    let z = z_two_sided(side.two_sided_level(level));
    let (t_lo, t_hi) = wilson_score(counts.y_f(), s, z);
    let scale = counts.n_c() as f64 / counts.n_f() as f64;
    let to_rr = |t: f64| scale * t / (1.0 - t);

    let lower = if counts.y_f() == 0 {
        ExtReal::ZERO
    } else {
        ExtReal::Finite(to_rr(t_lo.max(0.0)))
    };
    let upper = if counts.y_c() == 0 || t_hi >= 1.0 {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(to_rr(t_hi))
    };
    Ok(RatioInterval::from_two_sided(
        Method::Wilson,
        counts.risk_ratio(),
        lower,
        upper,
        level,
        side,
    ))
}
