//! Bracketed bisection used to invert test statistics on the log-RR scale.

/// Beyond `|log RR0| > LOG_LIMIT` a bound is reported as `0` or `inf`.
pub(crate) const LOG_LIMIT: f64 = 60.0;

pub(crate) const LOG_TOL: f64 = 1e-8;

/// Finds the crossing `g(x) = 0` moving from `start` (where `g(start) < 0`)
/// in direction `dir` (`+1.0` or `-1.0`), expanding the step geometrically
/// until `g >= 0` and then bisecting to `LOG_TOL`.
///
/// Returns `None` when no crossing exists before `LOG_LIMIT`.
pub(crate) fn crossing<G: FnMut(f64) -> f64>(mut g: G, start: f64, dir: f64) -> Option<f64> {
    let mut inside = start;
    let mut step = 0.5;
    let outside = loop {
        let x = start + dir * step;
        if x.abs() > LOG_LIMIT {
            let edge = dir * LOG_LIMIT;
            if g(edge) < 0.0 {
                return None;
            }
            break edge;
        }
        if g(x) >= 0.0 {
            break x;
        }
        inside = x;
        step *= 2.0;
    };
    Some(bisect(&mut g, inside, outside))
}

/// Bisection between `inside` (`g < 0`) and `outside` (`g >= 0`); returns the
/// midpoint of the final bracket.
pub(crate) fn bisect<G: FnMut(f64) -> f64>(g: &mut G, mut inside: f64, mut outside: f64) -> f64 {
    while (outside - inside).abs() > LOG_TOL {
        let mid = 0.5 * (inside + outside);
        if g(mid) >= 0.0 {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Walks from `0` in direction `dir` until `g < 0`; used when the point
/// estimate is `0` or `inf` and the statistic only vanishes in the limit.
pub(crate) fn find_inside<G: FnMut(f64) -> f64>(g: &mut G, dir: f64) -> Option<f64> {
    let mut x = 0.0;
    let mut step = 1.0;
    while g(x) >= 0.0 {
        x += dir * step;
        step *= 2.0;
        if x.abs() > LOG_LIMIT {
            return None;
        }
    }
    Some(x)
}
