use crate::domain::{check_level_side, CountPair, ExtReal, Method, RatioInterval, Side};
use crate::error::{Error, Result};
use crate::special::z_two_sided;

/// Delta-method standard error of `log RR-hat` for two independent binomials.
///
/// `None` when either count is zero (the log ratio is infinite or undefined).
pub fn log_rr_standard_error(counts: &CountPair) -> Option<f64> {
    if counts.y_f() == 0 || counts.y_c() == 0 {
        return None;
    }
    let p_f = counts.factual.proportion();
    let p_c = counts.counterfactual.proportion();
    let var = (1.0 - p_f) / (counts.n_f() as f64 * p_f) + (1.0 - p_c) / (counts.n_c() as f64 * p_c);
    Some(var.sqrt())
}

/// Normal-theory interval `exp(log RR-hat ± z se)`.
pub fn delta_interval(counts: &CountPair, level: f64, side: Side) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    let se = log_rr_standard_error(counts).ok_or_else(|| {
        Error::not_computable(format!(
            "delta method needs both counts positive (factual {}, counterfactual {})",
            counts.y_f(),
            counts.y_c()
        ))
    })?;
    let estimate = counts.risk_ratio();
    let log_rr = estimate.to_f64().ln();
    let z = z_two_sided(side.two_sided_level(level));
    Ok(RatioInterval::from_two_sided(
        Method::Delta,
        estimate,
        ExtReal::Finite((log_rr - z * se).exp()),
        ExtReal::Finite((log_rr + z * se).exp()),
        level,
        side,
    )
    .with_diagnostic("se_log_rr", se))
}
