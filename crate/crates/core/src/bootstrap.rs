//! Two-sample bootstrap for the log risk ratio.
//!
//! Each replicate resamples both scenarios independently (binomial draws at
//! the observed proportion for count data, with-replacement draws of members
//! for raw data) and records `log RR-hat`. Replicates with a zero proportion
//! on either side have an infinite or undefined log ratio; they are counted
//! and, under [`DegeneratePolicy::DropAndFlag`], removed before the interval
//! is formed.
//!
//! Every replicate draws from its own ChaCha stream keyed by the seed and
//! the replicate index, so results do not depend on evaluation order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::domain::{check_level_side, ExtReal, Method, RatioInterval, Sample, ScenarioPair, Side};
use crate::domain::{CountPair, EventDefinition, RawSample};
use crate::error::{Error, Result};
use crate::estimation::{estimate_parametric_normal, EstimateSource};
use crate::special::{normal_cdf, normal_quantile, z_two_sided};

pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePolicy {
    /// Fail when degenerate replicates prevent the statistic a method needs.
    Error,
    /// Discard degenerate replicates and report how many were discarded.
    #[default]
    DropAndFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_b: usize,
    pub seed: u64,
    pub degenerate_policy: DegeneratePolicy,
    /// How each resampled scenario is turned into a probability.
    pub estimator: EstimateSource,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_b: 10_000,
            seed: 0,
            degenerate_policy: DegeneratePolicy::DropAndFlag,
            estimator: EstimateSource::Nonparametric,
        }
    }
}

impl BootstrapConfig {
    pub fn new(n_b: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            n_b,
            seed,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_policy(mut self, policy: DegeneratePolicy) -> Self {
        self.degenerate_policy = policy;
        self
    }

    pub fn with_estimator(mut self, estimator: EstimateSource) -> Self {
        self.estimator = estimator;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_b < MIN_REPLICATES {
            return Err(Error::invalid(format!(
                "need at least {MIN_REPLICATES} bootstrap replicates, got {}",
                self.n_b
            )));
        }
        Ok(())
    }
}

/// Bootstrap replicates of `log RR-hat` together with what the interval
/// constructions need from the source data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    /// `log RR-hat` of the source data.
    pub theta_hat: f64,
    /// Delta-method standard error of `theta_hat`.
    pub se_data: Option<f64>,
    pub replicates: Vec<ExtReal>,
    /// Per-replicate `(pF-hat, pC-hat)`.
    pub proportions: Vec<(f64, f64)>,
    /// Per-replicate delta-method standard error (absent when a count is zero).
    pub replicate_se: Vec<Option<f64>>,
    /// Replicates with a zero proportion on either side.
    pub n_degenerate: usize,
    /// Standard deviation of the usable replicates.
    pub se_hat: Option<f64>,
    /// BCa acceleration from the delete-one jackknife of the source data.
    pub acceleration: Option<f64>,
    pub policy: DegeneratePolicy,
}

impl BootstrapDistribution {
    /// Distribution from precomputed replicates, for replicate sets built
    /// outside [`resample_pair`]. Per-replicate standard errors are absent.
    pub fn from_replicates(
        theta_hat: f64,
        replicates: Vec<ExtReal>,
        policy: DegeneratePolicy,
    ) -> Self {
        let n = replicates.len();
        let n_degenerate = replicates.iter().filter(|r| !r.is_finite()).count();
        let mut d = Self {
            theta_hat,
            se_data: None,
            replicates,
            proportions: Vec::new(),
            replicate_se: vec![None; n],
            n_degenerate,
            se_hat: None,
            acceleration: None,
            policy,
        };
        d.se_hat = d.compute_se_hat();
        d
    }

    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub(crate) fn compute_se_hat(&self) -> Option<f64> {
        if self.n_degenerate > 0 && self.policy == DegeneratePolicy::Error {
            return None;
        }
        let v: Vec<f64> = self.replicates.iter().filter_map(|r| r.finite()).collect();
        if v.len() < 2 {
            return None;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
    }

    /// Sorted replicates on the extended line. Under `Error`, infinities are
    /// kept (order statistics remain defined) but `0/0` replicates are not.
    fn ordered(&self) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = match self.policy {
            DegeneratePolicy::DropAndFlag => {
                self.replicates.iter().filter_map(|r| r.finite()).collect()
            }
            DegeneratePolicy::Error => {
                if self.replicates.iter().any(|r| r.is_undefined()) {
                    return Err(Error::not_computable(
                        "replicates with no events in either scenario have an undefined ratio",
                    ));
                }
                self.replicates.iter().map(|r| r.to_f64()).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::not_computable(
                "every bootstrap replicate is degenerate",
            ));
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Finite replicates, or an error under `Error` when any is degenerate.
    fn finite(&self) -> Result<Vec<f64>> {
        if self.policy == DegeneratePolicy::Error && self.n_degenerate > 0 {
            return Err(Error::not_computable(format!(
                "standard deviation of the bootstrap estimates is undefined: {} replicates have a zero proportion",
                self.n_degenerate
            )));
        }
        let v: Vec<f64> = self.replicates.iter().filter_map(|r| r.finite()).collect();
        if v.is_empty() {
            return Err(Error::not_computable(
                "every bootstrap replicate is degenerate",
            ));
        }
        Ok(v)
    }

    /// All usable replicates equal `theta_hat`: there is no spread to work with.
    fn is_constant(&self) -> bool {
        let mut any = false;
        for r in &self.replicates {
            match r.finite() {
                Some(x) if x == self.theta_hat => any = true,
                Some(_) => return false,
                None if self.policy == DegeneratePolicy::Error => return false,
                None => {}
            }
        }
        any
    }

    fn interval(
        &self,
        method: Method,
        lo: f64,
        hi: f64,
        level: f64,
        side: Side,
        n_used: usize,
    ) -> RatioInterval {
        let ci = RatioInterval::from_two_sided(
            method,
            ExtReal::Finite(self.theta_hat.exp()),
            ExtReal::from_f64(lo.exp()),
            ExtReal::from_f64(hi.exp()),
            level,
            side,
        );
        let dropped = match self.policy {
            DegeneratePolicy::DropAndFlag => self.len() - n_used,
            DegeneratePolicy::Error => 0,
        };
        ci.with_diagnostic("n_replicates", self.len() as f64)
            .with_diagnostic("n_degenerate", self.n_degenerate as f64)
            .with_diagnostic("n_dropped", dropped as f64)
            .with_diagnostic("drop_policy_fired", if dropped > 0 { 1.0 } else { 0.0 })
    }

    fn constant_interval(&self, method: Method, level: f64, side: Side) -> RatioInterval {
        let n_used = self.replicates.iter().filter(|r| r.is_finite()).count();
        self.interval(method, self.theta_hat, self.theta_hat, level, side, n_used)
    }
}

/// Order statistic at 1-based index `ceil(q n)`, clamped to the sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let k = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[k - 1]
}

/// Delta-method standard error of `log(pF / pC)` at given proportions.
fn delta_se(p_f: f64, n_f: f64, p_c: f64, n_c: f64) -> Option<f64> {
    if p_f > 0.0 && p_c > 0.0 {
        Some(((1.0 - p_f) / (n_f * p_f) + (1.0 - p_c) / (n_c * p_c)).sqrt())
    } else {
        None
    }
}

/// One scenario prepared for resampling.
enum Source<'a> {
    Counts {
        y: u64,
        n: u64,
    },
    Indicators {
        events: Vec<bool>,
    },
    Normal {
        values: &'a RawSample,
        event: &'a EventDefinition,
    },
}

impl Source<'_> {
    fn n(&self) -> usize {
        match self {
            Source::Counts { n, .. } => *n as usize,
            Source::Indicators { events } => events.len(),
            Source::Normal { values, .. } => values.len(),
        }
    }

    fn point(&self) -> Result<f64> {
        match self {
            Source::Counts { y, n } => Ok(*y as f64 / *n as f64),
            Source::Indicators { events } => {
                Ok(events.iter().filter(|&&e| e).count() as f64 / events.len() as f64)
            }
            Source::Normal { values, event } => {
                Ok(estimate_parametric_normal(values, event)?.value)
            }
        }
    }

    /// One resampled proportion; `None` when the estimator fails on the resample.
    fn draw(&self, rng: &mut ChaCha8Rng, buf: &mut Vec<f64>) -> Option<f64> {
        match self {
            Source::Counts { y, n } => {
                let p = *y as f64 / *n as f64;
                let k = Binomial::new(*n, p)
                    .expect("proportion in [0, 1]")
                    .sample(rng);
                Some(k as f64 / *n as f64)
            }
            Source::Indicators { events } => {
                let n = events.len();
                let k = (0..n).filter(|_| events[rng.gen_range(0..n)]).count();
                Some(k as f64 / n as f64)
            }
            Source::Normal { values, event } => {
                let v = values.values();
                buf.clear();
                buf.extend((0..v.len()).map(|_| v[rng.gen_range(0..v.len())]));
                let s = RawSample::new(buf.clone()).ok()?;
                estimate_parametric_normal(&s, event).ok().map(|e| e.value)
            }
        }
    }

    /// Leave-one-out estimates, one per member.
    fn jackknife(&self) -> Option<Vec<f64>> {
        let n = self.n();
        if n < 2 {
            return None;
        }
        let m = (n - 1) as f64;
        match self {
            Source::Counts { y, n } => {
                let (y, n) = (*y as usize, *n as usize);
                let with = (y as f64 - 1.0) / m;
                let without = y as f64 / m;
                Some((0..n).map(|i| if i < y { with } else { without }).collect())
            }
            Source::Indicators { events } => {
                let y = events.iter().filter(|&&e| e).count() as f64;
                Some(
                    events
                        .iter()
                        .map(|&e| if e { (y - 1.0) / m } else { y / m })
                        .collect(),
                )
            }
            Source::Normal { values, event } => {
                let v = values.values();
                (0..n)
                    .map(|i| {
                        let rest: Vec<f64> = v
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, &x)| x)
                            .collect();
                        let s = RawSample::new(rest).ok()?;
                        estimate_parametric_normal(&s, event).ok().map(|e| e.value)
                    })
                    .collect()
            }
        }
    }

    /// Empirical influence of each member on `log p-hat`.
    fn empirical_influence(&self, p: f64) -> Option<Vec<f64>> {
        let ind: Vec<bool> = match self {
            Source::Counts { y, n } => (0..*n).map(|i| i < *y).collect(),
            Source::Indicators { events } => events.clone(),
            Source::Normal { .. } => return None,
        };
        Some(
            ind.into_iter()
                .map(|e| (f64::from(u8::from(e)) - p) / p)
                .collect(),
        )
    }
}

fn source<'a>(
    sample: &'a Sample,
    event: Option<&'a EventDefinition>,
    estimator: EstimateSource,
) -> Result<Source<'a>> {
    match (estimator, sample) {
        (EstimateSource::Nonparametric, Sample::Counts(c)) => Ok(Source::Counts { y: c.events(), n: c.trials() }),
        (EstimateSource::Nonparametric, Sample::Raw(r)) => {
            let e = event.ok_or_else(|| Error::invalid("an event definition is required to count raw values"))?;
            Ok(Source::Indicators { events: r.values().iter().map(|&x| e.occurs(x)).collect() })
        }
        (EstimateSource::ParametricNormal, Sample::Raw(r)) => {
            let e = event.ok_or_else(|| Error::invalid("an event definition is required for the normal fit"))?;
            Ok(Source::Normal { values: r, event: e })
        }
        (EstimateSource::ParametricNormal, Sample::Counts(_)) => {
            Err(Error::invalid("the parametric bootstrap needs raw values, not counts"))
        }
        (EstimateSource::Eva, _) => Err(Error::invalid(
            "bootstrap intervals for extreme-value estimates are not supported; use the EVA likelihood-ratio interval",
        )),
    }
}

/// BCa acceleration from two-sample influence values `l` (factual first,
/// counterfactual with opposite sign): `sum n^-3 sum l^3 / (6 (sum n^-2 sum l^2)^1.5)`.
fn acceleration(f: &[f64], c: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for l in [f, c] {
        let n = l.len() as f64;
        num += l.iter().map(|x| x.powi(3)).sum::<f64>() / n.powi(3);
        den += l.iter().map(|x| x * x).sum::<f64>() / n.powi(2);
    }
    if den > 0.0 {
        Some(num / (6.0 * den.powf(1.5)))
    } else if num == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Jackknife influence `(n - 1)(mean - theta_(i))` of each member on `log p`,
/// falling back to empirical influence when a deletion empties the events.
fn influence(src: &Source<'_>, p: f64) -> Option<Vec<f64>> {
    let n = src.n() as f64;
    match src.jackknife() {
        Some(jk) if jk.iter().all(|&q| q > 0.0) => {
            let logs: Vec<f64> = jk.iter().map(|q| q.ln()).collect();
            let mean = logs.iter().sum::<f64>() / n;
            Some(logs.iter().map(|t| (n - 1.0) * (mean - t)).collect())
        }
        _ => src.empirical_influence(p),
    }
}

/// Draws `n_b` paired resamples and records `log RR-hat` for each.
pub fn resample_pair(
    data: &ScenarioPair,
    event: Option<&EventDefinition>,
    cfg: &BootstrapConfig,
) -> Result<BootstrapDistribution> {
    cfg.validate()?;
    let src_f = source(data.factual(), event, cfg.estimator)?;
    let src_c = source(data.counterfactual(), event, cfg.estimator)?;
    let (p_f, p_c) = (src_f.point()?, src_c.point()?);
    if p_f == 0.0 || p_c == 0.0 {
        let which = if p_c == 0.0 {
            "counterfactual"
        } else {
            "factual"
        };
        return Err(Error::Degenerate(format!(
            "no events in the {which} scenario: every resample repeats the zero proportion"
        )));
    }
    let (n_f, n_c) = (src_f.n() as f64, src_c.n() as f64);
    let theta_hat = (p_f / p_c).ln();

    let mut replicates = Vec::with_capacity(cfg.n_b);
    let mut proportions = Vec::with_capacity(cfg.n_b);
    let mut replicate_se = Vec::with_capacity(cfg.n_b);
    let mut n_degenerate = 0;
    let mut buf = Vec::new();
    for i in 0..cfg.n_b as u64 {
        let mut rng_f = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_f.set_stream(2 * i);
        let mut rng_c = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_c.set_stream(2 * i + 1);
        let (qf, qc) = match (
            src_f.draw(&mut rng_f, &mut buf),
            src_c.draw(&mut rng_c, &mut buf),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => (f64::NAN, f64::NAN),
        };
        let log_rr = if qf.is_nan() {
            ExtReal::Undefined
        } else {
            crate::domain::risk_ratio_estimate(qf, qc).ln()
        };
        if !log_rr.is_finite() {
            n_degenerate += 1;
        }
        replicates.push(log_rr);
        proportions.push((qf, qc));
        replicate_se.push(delta_se(qf, n_f, qc, n_c));
    }

    let acc = match (influence(&src_f, p_f), influence(&src_c, p_c)) {
        (Some(lf), Some(lc)) => {
            let lc: Vec<f64> = lc.into_iter().map(|x| -x).collect();
            acceleration(&lf, &lc)
        }
        _ => None,
    };

    let mut dist = BootstrapDistribution {
        theta_hat,
        se_data: delta_se(p_f, n_f, p_c, n_c),
        replicates,
        proportions,
        replicate_se,
        n_degenerate,
        se_hat: None,
        acceleration: acc,
        policy: cfg.degenerate_policy,
    };
    dist.se_hat = dist.compute_se_hat();
    Ok(dist)
}

/// [`resample_pair`] for count data.
pub fn resample_counts(counts: &CountPair, cfg: &BootstrapConfig) -> Result<BootstrapDistribution> {
    let data = ScenarioPair::from_counts(counts.y_f(), counts.n_f(), counts.y_c(), counts.n_c())?;
    resample_pair(&data, None, cfg)
}

/// `theta-hat ± z se-hat` with the replicate standard deviation as `se-hat`.
pub fn boot_normal(dist: &BootstrapDistribution, level: f64, side: Side) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    if dist.is_constant() {
        return Ok(dist.constant_interval(Method::BootNormal, level, side));
    }
    let v = dist.finite()?;
    let se = dist.se_hat.ok_or_else(|| {
        Error::not_computable("bootstrap standard error needs two usable replicates")
    })?;
    let z = z_two_sided(side.two_sided_level(level));
    Ok(dist
        .interval(
            Method::BootNormal,
            dist.theta_hat - z * se,
            dist.theta_hat + z * se,
            level,
            side,
            v.len(),
        )
        .with_diagnostic("se_boot", se))
}

/// Empirical quantiles of the replicates.
pub fn boot_percentile(
    dist: &BootstrapDistribution,
    level: f64,
    side: Side,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    if dist.is_constant() {
        return Ok(dist.constant_interval(Method::BootPercentile, level, side));
    }
    let v = dist.ordered()?;
    let a = (1.0 - side.two_sided_level(level)) / 2.0;
    Ok(dist.interval(
        Method::BootPercentile,
        quantile(&v, a),
        quantile(&v, 1.0 - a),
        level,
        side,
        v.len(),
    ))
}

/// Percentile quantiles reflected about the estimate: `(2 theta - q_hi, 2 theta - q_lo)`.
pub fn boot_basic(dist: &BootstrapDistribution, level: f64, side: Side) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    if dist.is_constant() {
        return Ok(dist.constant_interval(Method::BootBasic, level, side));
    }
    let v = dist.ordered()?;
    let a = (1.0 - side.two_sided_level(level)) / 2.0;
    let t = dist.theta_hat;
    Ok(dist.interval(
        Method::BootBasic,
        2.0 * t - quantile(&v, 1.0 - a),
        2.0 * t - quantile(&v, a),
        level,
        side,
        v.len(),
    ))
}

/// Bootstrap-t: quantiles of `(theta_i - theta) / se_i` rescaled by the
/// delta-method standard error of the data.
pub fn boot_studentized(
    dist: &BootstrapDistribution,
    level: f64,
    side: Side,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    if dist.is_constant() {
        return Ok(dist.constant_interval(Method::BootStudentized, level, side));
    }
    let se = dist
        .se_data
        .filter(|s| *s > 0.0)
        .ok_or_else(|| Error::not_computable("standard error of the data is unavailable"))?;
    let mut z = Vec::with_capacity(dist.len());
    let mut bad = 0;
    for (r, s) in dist.replicates.iter().zip(&dist.replicate_se) {
        match (r.finite(), s) {
            (Some(t), Some(s)) if *s > 0.0 => z.push((t - dist.theta_hat) / s),
            _ => bad += 1,
        }
    }
    if bad > 0 && dist.policy == DegeneratePolicy::Error {
        return Err(Error::not_computable(format!(
            "{bad} replicates have no usable standard error"
        )));
    }
    if z.is_empty() {
        return Err(Error::not_computable(
            "no replicate has a usable standard error",
        ));
    }
    z.sort_by(f64::total_cmp);
    let a = (1.0 - side.two_sided_level(level)) / 2.0;
    let t = dist.theta_hat;
    Ok(dist
        .interval(
            Method::BootStudentized,
            t - se * quantile(&z, 1.0 - a),
            t - se * quantile(&z, a),
            level,
            side,
            z.len(),
        )
        .with_diagnostic("n_without_se", bad as f64))
}

/// Bias-corrected and accelerated percentile interval.
pub fn boot_bca(dist: &BootstrapDistribution, level: f64, side: Side) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    if dist.is_constant() {
        return Ok(dist.constant_interval(Method::BootBca, level, side));
    }
    let v = dist.ordered()?;
    let below = v.iter().filter(|&&x| x < dist.theta_hat).count();
    if below == 0 || below == v.len() {
        return Err(Error::not_computable(
            "bias correction undefined: the estimate lies outside the replicates",
        ));
    }
    let z0 = normal_quantile(below as f64 / v.len() as f64);
    let acc = dist
        .acceleration
        .ok_or_else(|| Error::not_computable("acceleration constant is unavailable"))?;
    let a = (1.0 - side.two_sided_level(level)) / 2.0;
    let adjust = |q: f64| -> Result<f64> {
        let z = z0 + normal_quantile(q);
        let d = 1.0 - acc * z;
        if d <= 0.0 {
            return Err(Error::not_computable(
                "acceleration too large for the requested level",
            ));
        }
        Ok(normal_cdf(z0 + z / d))
    };
    let (q_lo, q_hi) = (adjust(a)?, adjust(1.0 - a)?);
    Ok(dist
        .interval(
            Method::BootBca,
            quantile(&v, q_lo),
            quantile(&v, q_hi),
            level,
            side,
            v.len(),
        )
        .with_diagnostic("z0", z0)
        .with_diagnostic("acceleration", acc))
}

/// Dispatches to the construction named by `method`.
pub fn boot_interval(
    method: Method,
    dist: &BootstrapDistribution,
    level: f64,
    side: Side,
) -> Result<RatioInterval> {
    match method {
        Method::BootNormal => boot_normal(dist, level, side),
        Method::BootPercentile => boot_percentile(dist, level, side),
        Method::BootBasic => boot_basic(dist, level, side),
        Method::BootStudentized => boot_studentized(dist, level, side),
        Method::BootBca => boot_bca(dist, level, side),
        other => Err(Error::invalid(format!("{other} is not a bootstrap method"))),
    }
}
