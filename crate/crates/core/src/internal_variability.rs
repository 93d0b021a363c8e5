//! Time-averaged event probabilities for ensembles that span several years.
//!
//! An atmosphere-only ensemble has `n_w` members per year, all sharing the
//! prescribed sea-surface state of that year. Pooling over years estimates a
//! probability averaged over that state; its uncertainty comes from both the
//! members and the sample of years. The year-block bootstrap resamples years
//! (the same draw in both scenarios) and, separately per scenario, whole
//! members that are then read off at every drawn year.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{BootstrapConfig, BootstrapDistribution};
use crate::domain::{
    check_level_side, risk_ratio_estimate, BinomialCount, CountPair, EventDefinition,
};
use crate::domain::{ExtReal, Method, RatioInterval, Side};
use crate::error::{Error, Result};
use crate::estimation::{EstimateSource, ProbabilityEstimate};
use crate::special::z_two_sided;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeriesData {
    /// `values[t][j]`: member `j` in year `t`. Member `j` is the same
    /// simulation in every year.
    Values(Vec<Vec<f64>>),
    /// Event counts per year, each out of `n_w` members.
    Counts(Vec<BinomialCount>),
}

/// One scenario's ensemble laid out by year and member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    years: Vec<i32>,
    members_per_year: usize,
    data: SeriesData,
}

impl EnsembleSeries {
    /// Series from a year-by-member matrix. Rows are reordered by year.
    pub fn from_values(years: Vec<i32>, values: Vec<Vec<f64>>) -> Result<Self> {
        if years.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} year labels for {} rows",
                years.len(),
                values.len()
            )));
        }
        let n_w = values.first().map_or(0, Vec::len);
        if n_w == 0 {
            return Err(Error::invalid(
                "a series needs at least one year and one member",
            ));
        }
        for (y, row) in years.iter().zip(&values) {
            if row.len() != n_w {
                return Err(Error::invalid(format!(
                    "year {y} has {} members, expected {n_w}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "year {y} contains a non-finite value"
                )));
            }
        }
        let (years, values) = sort_by_year(years, values)?;
        Ok(Self {
            years,
            members_per_year: n_w,
            data: SeriesData::Values(values),
        })
    }

    /// Series from per-year counts, all with the same number of members.
    pub fn from_counts(years: Vec<i32>, counts: Vec<BinomialCount>) -> Result<Self> {
        if years.len() != counts.len() {
            return Err(Error::invalid(format!(
                "{} year labels for {} counts",
                years.len(),
                counts.len()
            )));
        }
        let n_w = counts
            .first()
            .ok_or_else(|| Error::invalid("a series needs at least one year"))?
            .trials();
        if let Some((y, c)) = years.iter().zip(&counts).find(|(_, c)| c.trials() != n_w) {
            return Err(Error::invalid(format!(
                "year {y} has {} members, expected {n_w}",
                c.trials()
            )));
        }
        let (years, counts) = sort_by_year(years, counts)?;
        Ok(Self {
            years,
            members_per_year: n_w as usize,
            data: SeriesData::Counts(counts),
        })
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn members_per_year(&self) -> usize {
        self.members_per_year
    }

    pub fn data(&self) -> &SeriesData {
        &self.data
    }

    /// Event indicators by year and member, or per-year counts.
    fn layout(&self, event: Option<&EventDefinition>) -> Result<Layout> {
        match &self.data {
            SeriesData::Counts(c) => Ok(Layout::Counts(c.iter().map(|c| c.events()).collect())),
            SeriesData::Values(v) => {
                let e = event.ok_or_else(|| {
                    Error::invalid("an event definition is required to count raw values")
                })?;
                Ok(Layout::Indicators(
                    v.iter()
                        .map(|row| row.iter().map(|&x| e.occurs(x)).collect())
                        .collect(),
                ))
            }
        }
    }

    /// Per-year event counts.
    pub fn counts(&self, event: Option<&EventDefinition>) -> Result<Vec<BinomialCount>> {
        let n_w = self.members_per_year as u64;
        match self.layout(event)? {
            Layout::Counts(y) => y.into_iter().map(|y| BinomialCount::new(y, n_w)).collect(),
            Layout::Indicators(ind) => ind
                .iter()
                .map(|row| BinomialCount::new(row.iter().filter(|&&e| e).count() as u64, n_w))
                .collect(),
        }
    }

    /// Per-year proportions `p-hat_t`.
    pub fn per_year_p(&self, event: Option<&EventDefinition>) -> Result<Vec<f64>> {
        Ok(self
            .counts(event)?
            .iter()
            .map(BinomialCount::proportion)
            .collect())
    }
}

fn sort_by_year<T>(years: Vec<i32>, rows: Vec<T>) -> Result<(Vec<i32>, Vec<T>)> {
    let mut pairs: Vec<(i32, T)> = years.into_iter().zip(rows).collect();
    pairs.sort_by_key(|(y, _)| *y);
    if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid(format!(
            "year {} appears more than once",
            w[0].0
        )));
    }
    Ok(pairs.into_iter().unzip())
}

enum Layout {
    Counts(Vec<u64>),
    Indicators(Vec<Vec<bool>>),
}

/// Proportion of exceedances over every year and member.
pub fn time_averaged_p(
    series: &EnsembleSeries,
    event: Option<&EventDefinition>,
) -> Result<ProbabilityEstimate> {
    let p = series.per_year_p(event)?;
    Ok(ProbabilityEstimate {
        value: mean(&p),
        n_effective: series.n_years() * series.members_per_year,
        source: EstimateSource::Nonparametric,
        warnings: Vec::new(),
    })
}

/// `Var(p-hat) = n_t^-2 sum_t p_t (1 - p_t) / n_w` with the per-year estimates plugged in.
pub fn time_averaged_var(series: &EnsembleSeries, event: Option<&EventDefinition>) -> Result<f64> {
    let p = series.per_year_p(event)?;
    Ok(pooled_var(&p, series.members_per_year as f64))
}

fn pooled_var(p: &[f64], n_w: f64) -> f64 {
    let n_t = p.len() as f64;
    p.iter().map(|q| q * (1.0 - q) / n_w).sum::<f64>() / (n_t * n_t)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_years(f: &EnsembleSeries, c: &EnsembleSeries) -> Result<()> {
    if f.years != c.years {
        return Err(Error::invalid(
            "factual and counterfactual series must cover the same years",
        ));
    }
    Ok(())
}

/// Standard error of `log(pF / pC)` from the time-averaged variances.
fn log_rr_se(p_f: &[f64], n_f: f64, p_c: &[f64], n_c: f64) -> Option<f64> {
    let (a, b) = (mean(p_f), mean(p_c));
    if a > 0.0 && b > 0.0 {
        Some((pooled_var(p_f, n_f) / (a * a) + pooled_var(p_c, n_c) / (b * b)).sqrt())
    } else {
        None
    }
}

/// Delta-method interval for the ratio of time-averaged probabilities.
pub fn time_averaged_delta_interval(
    factual: &EnsembleSeries,
    counterfactual: &EnsembleSeries,
    event: Option<&EventDefinition>,
    level: f64,
    side: Side,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    check_years(factual, counterfactual)?;
    let p_f = factual.per_year_p(event)?;
    let p_c = counterfactual.per_year_p(event)?;
    let se = log_rr_se(
        &p_f,
        factual.members_per_year as f64,
        &p_c,
        counterfactual.members_per_year as f64,
    )
    .ok_or_else(|| {
        Error::not_computable("delta method needs both time-averaged proportions positive")
    })?;
    let estimate = risk_ratio_estimate(mean(&p_f), mean(&p_c));
    let log_rr = estimate.to_f64().ln();
    let z = z_two_sided(side.two_sided_level(level));
    Ok(RatioInterval::from_two_sided(
        Method::TimeAveragedDelta,
        estimate,
        ExtReal::Finite((log_rr - z * se).exp()),
        ExtReal::Finite((log_rr + z * se).exp()),
        level,
        side,
    )
    .with_diagnostic("se_log_rr", se)
    .with_diagnostic("n_years", factual.n_years() as f64))
}

/// Per-year count pairs, for reporting year-specific ratios when years
/// cannot be treated as exchangeable.
pub fn per_year_counts(
    factual: &EnsembleSeries,
    counterfactual: &EnsembleSeries,
    event: Option<&EventDefinition>,
) -> Result<Vec<(i32, CountPair)>> {
    check_years(factual, counterfactual)?;
    let f = factual.counts(event)?;
    let c = counterfactual.counts(event)?;
    Ok(factual
        .years
        .iter()
        .zip(f.into_iter().zip(c))
        .map(|(&y, (f, c))| {
            (
                y,
                CountPair {
                    factual: f,
                    counterfactual: c,
                },
            )
        })
        .collect())
}

/// Replicate `i`'s stream: `0` years, `1` factual members, `2` counterfactual members.
fn stream(seed: u64, i: u64, which: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3 * i + which);
    rng
}

fn draw_years(seed: u64, i: u64, n_t: usize) -> Vec<usize> {
    let mut rng = stream(seed, i, 0);
    (0..n_t).map(|_| rng.gen_range(0..n_t)).collect()
}

impl Layout {
    /// Resampled `p-hat_t` at each drawn year. Raw members are drawn once
    /// and reused for every year; counts carry no member identity, so each
    /// drawn year gets its own binomial draw.
    fn draw(&self, years: &[usize], n_w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Layout::Indicators(ind) => {
                let members: Vec<usize> = (0..n_w).map(|_| rng.gen_range(0..n_w)).collect();
                let p_t: Vec<f64> = ind
                    .iter()
                    .map(|row| members.iter().filter(|&&j| row[j]).count() as f64 / n_w as f64)
                    .collect();
                years.iter().map(|&t| p_t[t]).collect()
            }
            Layout::Counts(y) => years
                .iter()
                .map(|&t| {
                    let p = y[t] as f64 / n_w as f64;
                    Binomial::new(n_w as u64, p)
                        .expect("proportion in [0, 1]")
                        .sample(rng) as f64
                        / n_w as f64
                })
                .collect(),
        }
    }
}

/// Year influence on `log RR-hat` from the delete-one-year jackknife,
/// falling back to the empirical influence when a deletion empties the
/// events of a scenario.
fn year_influence(p_f: &[f64], p_c: &[f64]) -> Option<Vec<f64>> {
    let n = p_f.len();
    if n < 2 {
        return None;
    }
    let (sf, sc) = (p_f.iter().sum::<f64>(), p_c.iter().sum::<f64>());
    let theta: Vec<f64> = (0..n)
        .map(|t| ((sf - p_f[t]) / (sc - p_c[t])).ln())
        .collect();
    if theta.iter().all(|x| x.is_finite()) {
        let m = mean(&theta);
        return Some(theta.iter().map(|t| (n - 1) as f64 * (m - t)).collect());
    }
    let (a, b) = (sf / n as f64, sc / n as f64);
    Some(
        (0..n)
            .map(|t| (p_f[t] - a) / a - (p_c[t] - b) / b)
            .collect(),
    )
}

fn acceleration(l: &[f64]) -> Option<f64> {
    let s2: f64 = l.iter().map(|x| x * x).sum();
    let s3: f64 = l.iter().map(|x| x.powi(3)).sum();
    if s2 > 0.0 {
        Some(s3 / (6.0 * s2.powf(1.5)))
    } else {
        Some(0.0)
    }
}

/// Year-block bootstrap of `log RR-hat` for time-averaged probabilities.
pub fn year_block_bootstrap(
    factual: &EnsembleSeries,
    counterfactual: &EnsembleSeries,
    event: Option<&EventDefinition>,
    cfg: &BootstrapConfig,
) -> Result<BootstrapDistribution> {
    check_years(factual, counterfactual)?;
    if cfg.estimator != EstimateSource::Nonparametric {
        return Err(Error::invalid(
            "the year-block bootstrap resamples event indicators only",
        ));
    }
    let boot = BootstrapConfig::new(cfg.n_b, cfg.seed)?;
    let (lf, lc) = (factual.layout(event)?, counterfactual.layout(event)?);
    let p_f = factual.per_year_p(event)?;
    let p_c = counterfactual.per_year_p(event)?;
    let (pf_bar, pc_bar) = (mean(&p_f), mean(&p_c));
    if pf_bar == 0.0 || pc_bar == 0.0 {
        let which = if pc_bar == 0.0 {
            "counterfactual"
        } else {
            "factual"
        };
        return Err(Error::Degenerate(format!(
            "no events in any year of the {which} scenario: every resample repeats the zero proportion"
        )));
    }
    let (n_t, n_wf, n_wc) = (
        factual.n_years(),
        factual.members_per_year,
        counterfactual.members_per_year,
    );

    let mut replicates = Vec::with_capacity(boot.n_b);
    let mut proportions = Vec::with_capacity(boot.n_b);
    let mut replicate_se = Vec::with_capacity(boot.n_b);
    let mut n_degenerate = 0;
    for i in 0..boot.n_b as u64 {
        let years = draw_years(boot.seed, i, n_t);
        let qf = lf.draw(&years, n_wf, &mut stream(boot.seed, i, 1));
        let qc = lc.draw(&years, n_wc, &mut stream(boot.seed, i, 2));
        let (a, b) = (mean(&qf), mean(&qc));
        let r = risk_ratio_estimate(a, b).ln();
        if !r.is_finite() {
            n_degenerate += 1;
        }
        replicates.push(r);
        proportions.push((a, b));
        replicate_se.push(log_rr_se(&qf, n_wf as f64, &qc, n_wc as f64));
    }

    let mut dist = BootstrapDistribution {
        theta_hat: (pf_bar / pc_bar).ln(),
        se_data: log_rr_se(&p_f, n_wf as f64, &p_c, n_wc as f64),
        replicates,
        proportions,
        replicate_se,
        n_degenerate,
        se_hat: None,
        acceleration: year_influence(&p_f, &p_c).and_then(|l| acceleration(&l)),
        policy: cfg.degenerate_policy,
    };
    dist.se_hat = dist.compute_se_hat();
    Ok(dist)
}
