//! Text rendering. Infinite bounds print as `inf`.

use std::fmt::Write as _;

use riskratio::{ExtReal, RatioInterval};

/// Six significant digits, trailing zeros removed.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn ext(x: ExtReal) -> String {
    match x {
        ExtReal::Finite(v) => num(v),
        other => other.to_string(),
    }
}

/// `key: value` lines for an interval and its diagnostics.
pub fn interval_lines(ci: &RatioInterval, out: &mut String) {
    let _ = writeln!(out, "method: {}", ci.method);
    let _ = writeln!(out, "estimate: {}", ext(ci.estimate));
    let _ = writeln!(out, "lower: {}", ext(ci.lower));
    let _ = writeln!(out, "upper: {}", ext(ci.upper));
    let _ = writeln!(out, "level: {}", num(ci.level));
    let _ = writeln!(out, "side: {}", ci.side);
    for (k, v) in &ci.diagnostics {
        let _ = writeln!(out, "diagnostic.{k}: {}", num(*v));
    }
}
