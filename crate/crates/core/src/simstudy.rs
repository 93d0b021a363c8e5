//! Coverage simulation for the count-based interval methods.
//!
//! Each grid cell `(n, RR, pF)` draws `replications` datasets
//! `yF ~ Bin(n, pF)`, `yC ~ Bin(n, pF / RR)` and records, per method, how
//! often the one-sided lower and upper bounds cover the true ratio.
//! Datasets on which a method cannot produce an interval are excluded from
//! its coverage and counted separately. [`exact_coverage`] gives the same
//! quantity by enumerating every outcome, for checking the simulation.
//!
//! [`emit_figures`] writes long-format CSV with the columns
//! `method,n,rr,p_f,metric,value`, one row per defined metric.

use std::collections::HashMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{boot_interval, resample_counts, BootstrapConfig, DegeneratePolicy};
use crate::domain::{check_level, CountPair, ExtReal, Method, RatioInterval, Side};
use crate::error::{Error, Result};
use crate::ratio_intervals::{
    delta_interval, koopman_interval, lrt_interval, wang_shan_interval_with_store, wilson_interval,
    WangShanStore, WangShanTable,
};
use crate::special::binomial_pmf_into;

/// Largest ensemble size [`exact_coverage`] will enumerate.
pub const MAX_EXACT_N: u64 = 400;

/// The methods a grid can evaluate, in reporting order.
pub const GRID_METHODS: [Method; 10] = [
    Method::Wilson,
    Method::Koopman,
    Method::WangShan,
    Method::Delta,
    Method::Lrt,
    Method::BootNormal,
    Method::BootPercentile,
    Method::BootBasic,
    Method::BootStudentized,
    Method::BootBca,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub n_values: Vec<u64>,
    pub rr_values: Vec<f64>,
    pub pf_values: Vec<f64>,
    pub replications: usize,
    /// One-sided confidence level of each bound.
    pub level: f64,
    pub seed: u64,
    /// Bootstrap replicates per dataset.
    pub bootstrap_replicates: usize,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        Self {
            n_values: vec![25, 50, 100, 400],
            rr_values: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            pf_values: vec![0.01, 0.025, 0.05, 0.10, 0.20],
            replications: 1000,
            level: 0.95,
            seed: 0,
            bootstrap_replicates: 1000,
        }
    }
}

impl ScenarioGrid {
    pub fn validate(&self) -> Result<()> {
        check_level(self.level)?;
        if self.level <= 0.5 {
            return Err(Error::invalid(format!(
                "one-sided level must exceed 0.5, got {}",
                self.level
            )));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be positive"));
        }
        if self.n_values.contains(&0) {
            return Err(Error::invalid("ensemble sizes must be positive"));
        }
        if self.rr_values.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("risk ratios must be positive and finite"));
        }
        if self.pf_values.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::invalid("factual probabilities must lie in (0, 1]"));
        }
        BootstrapConfig::new(self.bootstrap_replicates, 0)?;
        Ok(())
    }

    /// Cells with `pC = pF / RR <= 1`, ordered by `n`, then `RR`, then `pF`.
    pub fn cells(&self) -> Vec<(u64, f64, f64)> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &rr in &self.rr_values {
                for &p in &self.pf_values {
                    if p / rr <= 1.0 {
                        out.push((n, rr, p));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    pub n: u64,
    pub rr: f64,
    pub p_f: f64,
    pub replications: usize,
    pub n_not_computable: usize,
    pub n_covered_lower: usize,
    pub n_covered_upper: usize,
    /// Among computable datasets; absent when none were.
    pub coverage_lower: Option<f64>,
    pub coverage_upper: Option<f64>,
    pub median_lower_bound: Option<ExtReal>,
    pub prop_not_computable: f64,
    /// `sqrt(c (1 - c) / m)` for the lower coverage over `m` computable datasets.
    pub mc_standard_error: Option<f64>,
    pub mc_standard_error_upper: Option<f64>,
    /// Bootstrap only: mean share of replicates dropped as degenerate.
    pub mean_dropped_fraction: Option<f64>,
    /// Bootstrap only: share of computable datasets where any replicate was dropped.
    pub prop_drop_fired: Option<f64>,
}

impl MethodMetrics {
    pub fn n_computable(&self) -> usize {
        self.replications - self.n_not_computable
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    lower: ExtReal,
    upper: ExtReal,
    dropped: Option<f64>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn seed_of(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |acc, &p| mix(acc ^ p))
}

fn not_computable(e: &Error) -> bool {
    matches!(e, Error::NotComputable(_) | Error::Degenerate(_))
}

fn check_grid_method(m: Method) -> Result<()> {
    if GRID_METHODS.contains(&m) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{m} is not a count-based method")))
    }
}

/// Interval from a deterministic count-based method.
fn closed_interval(
    method: Method,
    counts: &CountPair,
    level: f64,
    side: Side,
    store: &WangShanStore,
) -> Result<RatioInterval> {
    match method {
        Method::Delta => delta_interval(counts, level, side),
        Method::Lrt => lrt_interval(counts, level, side),
        Method::Koopman => koopman_interval(counts, level, side),
        Method::Wilson => wilson_interval(counts, level, side),
        Method::WangShan => wang_shan_interval_with_store(counts, level, side, store),
        other => Err(Error::invalid(format!(
            "{other} has no deterministic interval"
        ))),
    }
}

/// Every requested method's bounds for one dataset, at two-sided `level2`.
fn outcomes(
    methods: &[Method],
    counts: &CountPair,
    level2: f64,
    boot_cfg: &BootstrapConfig,
    store: &WangShanStore,
) -> Result<Vec<Option<Outcome>>> {
    let mut dist = None;
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let ci = if m.is_bootstrap() {
            let d = dist.get_or_insert_with(|| resample_counts(counts, boot_cfg));
            match d {
                Ok(d) => boot_interval(m, d, level2, Side::TwoSided),
                Err(e) if not_computable(e) => Err(Error::not_computable(e.to_string())),
                Err(e) => return Err(Error::invalid(e.to_string())),
            }
        } else {
            closed_interval(m, counts, level2, Side::TwoSided, store)
        };
        match ci {
            Ok(ci) => {
                let dropped = ci
                    .diagnostics
                    .get("n_dropped")
                    .zip(ci.diagnostics.get("n_replicates"))
                    .map(|(a, b)| a / b);
                out.push(Some(Outcome {
                    lower: ci.lower,
                    upper: ci.upper,
                    dropped,
                }))
            }
            Err(e) if not_computable(&e) => out.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Loads every Wang-Shan table the grid needs, naming all that are missing.
fn require_tables(grid: &ScenarioGrid, store: &WangShanStore) -> Result<()> {
    let mut missing = Vec::new();
    for &n in &grid.n_values {
        match store.get(n, n, grid.level) {
            Ok(_) => {}
            Err(Error::InfeasibleSize(_)) => {
                missing.push(WangShanTable::file_name(n, n, grid.level))
            }
            Err(e) => return Err(e),
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::InfeasibleSize(format!(
            "prebuilt Wang-Shan tables required but not found: {}",
            missing.join(", ")
        )))
    }
}

fn lower_median(mut v: Vec<ExtReal>) -> Option<ExtReal> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.try_cmp(*b).expect("bounds are ordered"));
    Some(v[(v.len() - 1) / 2])
}

fn run_cell(
    grid: &ScenarioGrid,
    methods: &[Method],
    (n, rr, p_f): (u64, f64, f64),
    store: &WangShanStore,
) -> Result<Vec<MethodMetrics>> {
    let cell_seed = seed_of(&[grid.seed, n, rr.to_bits(), p_f.to_bits()]);
    let p_c = p_f / rr;
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
    let bf = Binomial::new(n, p_f).expect("valid probability");
    let bc = Binomial::new(n, p_c).expect("valid probability");
    let data: Vec<(u64, u64)> = (0..grid.replications)
        .map(|_| (bf.sample(&mut rng), bc.sample(&mut rng)))
        .collect();

    let level2 = 2.0 * grid.level - 1.0;
    let mut memo: HashMap<(u64, u64), Vec<Option<Outcome>>> = HashMap::new();
    for &(y_f, y_c) in &data {
        if memo.contains_key(&(y_f, y_c)) {
            continue;
        }
        let counts = CountPair::new(y_f, n, y_c, n)?;
        let boot_cfg =
            BootstrapConfig::new(grid.bootstrap_replicates, seed_of(&[cell_seed, y_f, y_c]))?
                .with_policy(DegeneratePolicy::DropAndFlag);
        memo.insert(
            (y_f, y_c),
            outcomes(methods, &counts, level2, &boot_cfg, store)?,
        );
    }

    let truth = ExtReal::Finite(rr);
    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let results: Vec<Outcome> = data.iter().filter_map(|key| memo[key][k]).collect();
            let m = results.len();
            let lo = results.iter().filter(|o| o.lower <= truth).count();
            let hi = results.iter().filter(|o| o.upper >= truth).count();
            let rate = |c: usize| (m > 0).then(|| c as f64 / m as f64);
            let se = |c: Option<f64>| c.map(|c| (c * (1.0 - c) / m as f64).sqrt());
            let drops: Vec<f64> = results.iter().filter_map(|o| o.dropped).collect();
            let (mean_dropped_fraction, prop_drop_fired) =
                if method.is_bootstrap() && !drops.is_empty() {
                    let k = drops.len() as f64;
                    (
                        Some(drops.iter().sum::<f64>() / k),
                        Some(drops.iter().filter(|&&d| d > 0.0).count() as f64 / k),
                    )
                } else {
                    (None, None)
                };
            MethodMetrics {
                method,
                n,
                rr,
                p_f,
                replications: grid.replications,
                n_not_computable: grid.replications - m,
                n_covered_lower: lo,
                n_covered_upper: hi,
                coverage_lower: rate(lo),
                coverage_upper: rate(hi),
                median_lower_bound: lower_median(results.iter().map(|o| o.lower).collect()),
                prop_not_computable: (grid.replications - m) as f64 / grid.replications as f64,
                mc_standard_error: se(rate(lo)),
                mc_standard_error_upper: se(rate(hi)),
                mean_dropped_fraction,
                prop_drop_fired,
            }
        })
        .collect())
}

/// Simulates every feasible cell of the grid for each method.
///
/// Results are ordered by cell (see [`ScenarioGrid::cells`]) and then by
/// the order of `methods`. Each cell has its own random stream derived from
/// the seed and the cell parameters, so cells can be run in any order.
pub fn run_grid(
    grid: &ScenarioGrid,
    methods: &[Method],
    store: &WangShanStore,
) -> Result<Vec<MethodMetrics>> {
    grid.validate()?;
    for &m in methods {
        check_grid_method(m)?;
    }
    if methods.contains(&Method::WangShan) {
        require_tables(grid, store)?;
    }
    let per_cell: Vec<Result<Vec<MethodMetrics>>> = grid
        .cells()
        .into_par_iter()
        .map(|cell| run_cell(grid, methods, cell, store))
        .collect();
    let mut out = Vec::new();
    for r in per_cell {
        out.extend(r?);
    }
    Ok(out)
}

struct Enumeration {
    covered: f64,
    computable: f64,
}

fn enumerate(
    n: u64,
    rr: f64,
    p_f: f64,
    method: Method,
    level: f64,
    side: Side,
    store: &WangShanStore,
) -> Result<Enumeration> {
    if !(rr.is_finite() && rr > 0.0) {
        return Err(Error::invalid(format!(
            "risk ratio must be positive and finite, got {rr}"
        )));
    }
    if !(p_f > 0.0 && p_f <= 1.0) || p_f / rr > 1.0 {
        return Err(Error::invalid(format!(
            "probabilities pF = {p_f}, pC = {} out of range",
            p_f / rr
        )));
    }
    check_grid_method(method)?;
    if method.is_bootstrap() {
        return Err(Error::invalid(
            "bootstrap intervals are random; exact coverage needs a deterministic method",
        ));
    }
    if n == 0 || n > MAX_EXACT_N {
        return Err(Error::InfeasibleSize(format!(
            "exact enumeration supports 1 <= n <= {MAX_EXACT_N}, got {n}"
        )));
    }
    let size = n as usize;
    let (mut pf, mut pc) = (vec![0.0; size + 1], vec![0.0; size + 1]);
    binomial_pmf_into(size, p_f, &mut pf);
    binomial_pmf_into(size, p_f / rr, &mut pc);
    let mut e = Enumeration {
        covered: 0.0,
        computable: 0.0,
    };
    for (y_f, &wf) in pf.iter().enumerate() {
        for (y_c, &wc) in pc.iter().enumerate() {
            let w = wf * wc;
            if w == 0.0 {
                continue;
            }
            let counts = CountPair::new(y_f as u64, n, y_c as u64, n)?;
            match closed_interval(method, &counts, level, side, store) {
                Ok(ci) => {
                    e.computable += w;
                    if ci.contains(rr) {
                        e.covered += w;
                    }
                }
                Err(err) if not_computable(&err) => {}
                Err(err) => return Err(err),
            }
        }
    }
    Ok(e)
}

/// Exact coverage of a deterministic method at `(n, RR, pF)` with `n`
/// members per scenario, conditional on the interval being computable.
pub fn exact_coverage(
    n: u64,
    rr: f64,
    p_f: f64,
    method: Method,
    level: f64,
    side: Side,
    store: &WangShanStore,
) -> Result<f64> {
    let e = enumerate(n, rr, p_f, method, level, side, store)?;
    if e.computable > 0.0 {
        Ok(e.covered / e.computable)
    } else {
        Err(Error::not_computable(
            "no outcome with positive probability yields an interval",
        ))
    }
}

/// Exact probability that a deterministic method yields no interval.
pub fn exact_not_computable(
    n: u64,
    rr: f64,
    p_f: f64,
    method: Method,
    store: &WangShanStore,
) -> Result<f64> {
    let e = enumerate(n, rr, p_f, method, 0.9, Side::TwoSided, store)?;
    Ok((1.0 - e.computable).max(0.0))
}

/// Writes metrics as long-format CSV.
pub fn emit_figures<W: Write>(metrics: &[MethodMetrics], mut w: W) -> Result<()> {
    writeln!(w, "method,n,rr,p_f,metric,value")?;
    for m in metrics {
        let mut row = |name: &str, value: String| {
            writeln!(w, "{},{},{},{},{name},{value}", m.method, m.n, m.rr, m.p_f)
        };
        row("replications", m.replications.to_string())?;
        row("n_not_computable", m.n_not_computable.to_string())?;
        row("prop_not_computable", m.prop_not_computable.to_string())?;
        let optional = [
            ("coverage_lower", m.coverage_lower),
            ("coverage_upper", m.coverage_upper),
            ("mc_standard_error", m.mc_standard_error),
            ("mc_standard_error_upper", m.mc_standard_error_upper),
        ];
        for (name, v) in optional {
            if let Some(v) = v {
                row(name, v.to_string())?;
            }
        }
        if let Some(b) = m.median_lower_bound {
            row("median_lower_bound", b.to_string())?;
        }
        if let Some(v) = m.mean_dropped_fraction {
            row("mean_dropped_fraction", v.to_string())?;
        }
        if let Some(v) = m.prop_drop_fired {
            row("prop_drop_fired", v.to_string())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio_intervals::WangShanConfig;

    fn store() -> WangShanStore {
        WangShanStore::new(None, WangShanConfig::default())
    }

    fn one_cell(n: u64, rr: f64, p_f: f64, reps: usize, seed: u64) -> ScenarioGrid {
        ScenarioGrid {
            n_values: vec![n],
            rr_values: vec![rr],
            pf_values: vec![p_f],
            replications: reps,
            seed,
            ..ScenarioGrid::default()
        }
    }

    #[test]
    fn default_grid_has_all_hundred_cells() {
        let g = ScenarioGrid::default();
        assert_eq!(g.cells().len(), 100);
        assert_eq!(g.replications, 1000);
        let mut low = g.clone();
        low.rr_values = vec![0.1];
        low.pf_values = vec![0.05, 0.2];
        assert_eq!(low.cells().len(), 4);
    }

    #[test]
    fn rejects_bad_grids_and_methods() {
        let mut g = one_cell(25, 2.0, 0.1, 10, 0);
        g.level = 0.4;
        assert!(run_grid(&g, &[Method::Delta], &store()).is_err());
        let g = one_cell(25, 2.0, 0.1, 10, 0);
        assert!(run_grid(&g, &[Method::EvaLrt], &store()).is_err());
        assert!(matches!(
            exact_coverage(
                25,
                0.0,
                0.1,
                Method::Delta,
                0.95,
                Side::LowerOneSided,
                &store()
            ),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            exact_coverage(
                401,
                1.0,
                0.1,
                Method::Delta,
                0.95,
                Side::LowerOneSided,
                &store()
            ),
            Err(Error::InfeasibleSize(_))
        ));
        assert!(exact_coverage(
            25,
            1.0,
            0.1,
            Method::BootBca,
            0.95,
            Side::LowerOneSided,
            &store()
        )
        .is_err());
    }

    #[test]
    fn categories_partition_replications() {
        let g = one_cell(25, 8.0, 0.05, 300, 2);
        for m in run_grid(
            &g,
            &GRID_METHODS
                .iter()
                .copied()
                .filter(|m| *m != Method::WangShan)
                .collect::<Vec<_>>(),
            &store(),
        )
        .unwrap()
        {
            let computable = m.n_computable();
            assert_eq!(m.n_not_computable + computable, m.replications);
            assert!(m.n_covered_lower <= computable && m.n_covered_upper <= computable);
            for p in [m.coverage_lower, m.coverage_upper].into_iter().flatten() {
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn cells_do_not_depend_on_grid_composition() {
        let methods = [Method::Delta, Method::Koopman, Method::BootPercentile];
        let big = ScenarioGrid {
            n_values: vec![25, 50],
            rr_values: vec![2.0, 4.0],
            pf_values: vec![0.1],
            replications: 200,
            seed: 9,
            ..ScenarioGrid::default()
        };
        let all = run_grid(&big, &methods, &store()).unwrap();
        let single = run_grid(&one_cell(50, 4.0, 0.1, 200, 9), &methods, &store()).unwrap();
        let from_all: Vec<_> = all
            .into_iter()
            .filter(|m| m.n == 50 && m.rr == 4.0)
            .collect();
        assert_eq!(from_all, single);
        assert_eq!(
            single,
            run_grid(&one_cell(50, 4.0, 0.1, 200, 9), &methods, &store()).unwrap()
        );
    }

    #[test]
    fn simulation_agrees_with_enumeration() {
        let methods = [Method::Delta, Method::Lrt, Method::Koopman, Method::Wilson];
        let g = one_cell(25, 2.0, 0.2, 5000, 31);
        for m in run_grid(&g, &methods, &store()).unwrap() {
            let exact = exact_coverage(25, 2.0, 0.2, m.method, 0.95, Side::LowerOneSided, &store())
                .unwrap();
            let (c, se) = (m.coverage_lower.unwrap(), m.mc_standard_error.unwrap());
            assert!(
                (c - exact).abs() <= 3.0 * se,
                "{}: {c} vs {exact}",
                m.method
            );
        }
    }

    #[test]
    fn rr_one_is_symmetric_in_simulation() {
        let g = one_cell(50, 1.0, 0.1, 2000, 4);
        for m in run_grid(&g, &[Method::Lrt, Method::Koopman], &store()).unwrap() {
            let (a, b) = (m.coverage_lower.unwrap(), m.coverage_upper.unwrap());
            let se = (m.mc_standard_error.unwrap().powi(2)
                + m.mc_standard_error_upper.unwrap().powi(2))
            .sqrt();
            assert!((a - b).abs() <= 2.0 * se, "{}: {a} vs {b}", m.method);
        }
    }

    #[test]
    fn rr_one_is_symmetric_exactly() {
        for method in [Method::Delta, Method::Lrt, Method::Koopman, Method::Wilson] {
            let lo =
                exact_coverage(30, 1.0, 0.15, method, 0.95, Side::LowerOneSided, &store()).unwrap();
            let hi =
                exact_coverage(30, 1.0, 0.15, method, 0.95, Side::UpperOneSided, &store()).unwrap();
            assert!((lo - hi).abs() < 1e-12, "{method}: {lo} vs {hi}");
        }
    }

    #[test]
    fn delta_not_computable_is_zero_count_probability() {
        let (n, rr, p) = (25u64, 8.0f64, 0.01f64);
        let q = 1.0 - (1.0 - (1.0 - p).powi(n as i32)) * (1.0 - (1.0 - p / rr).powi(n as i32));
        let got = exact_not_computable(n, rr, p, Method::Delta, &store()).unwrap();
        assert!((got - q).abs() < 1e-10, "{got} vs {q}");
        assert!(got > 0.8);
        let both = (1.0 - p).powi(n as i32) * (1.0 - p / rr).powi(n as i32);
        let lrt = exact_not_computable(n, rr, p, Method::Lrt, &store()).unwrap();
        assert!((lrt - both).abs() < 1e-10);
    }

    #[test]
    fn koopman_is_conservative_where_basic_undercovers() {
        let g = one_cell(100, 4.0, 0.05, 5000, 2024);
        let methods = [Method::Koopman, Method::BootBasic, Method::BootPercentile];
        let res = run_grid(&g, &methods, &store()).unwrap();
        let (k, b, p) = (&res[0], &res[1], &res[2]);
        assert!(k.coverage_lower.unwrap() >= 0.95 - k.mc_standard_error.unwrap());
        assert!(b.coverage_lower.unwrap() < 0.95 - 2.0 * b.mc_standard_error.unwrap());
        // Dropping the infinite replicates pulls the percentile lower bound down.
        assert!(p.coverage_lower.unwrap() > 0.95);
        assert!(p.mean_dropped_fraction.unwrap() > 0.0 && k.mean_dropped_fraction.is_none());
    }

    #[test]
    fn missing_wang_shan_tables_fail_fast() {
        let dir = tempfile::tempdir().unwrap();
        let s = WangShanStore::new(Some(dir.path().to_path_buf()), WangShanConfig::default());
        let mut g = one_cell(60, 2.0, 0.1, 10, 0);
        g.n_values = vec![60, 70];
        match run_grid(&g, &[Method::WangShan], &s) {
            Err(Error::InfeasibleSize(msg)) => {
                assert!(
                    msg.contains(&WangShanTable::file_name(60, 60, 0.95)),
                    "{msg}"
                );
                assert!(
                    msg.contains(&WangShanTable::file_name(70, 70, 0.95)),
                    "{msg}"
                );
            }
            other => panic!("expected missing-table error, got {other:?}"),
        }
    }

    fn sample_metrics() -> Vec<MethodMetrics> {
        vec![
            MethodMetrics {
                method: Method::Koopman,
                n: 100,
                rr: 4.0,
                p_f: 0.05,
                replications: 1000,
                n_not_computable: 0,
                n_covered_lower: 975,
                n_covered_upper: 960,
                coverage_lower: Some(0.975),
                coverage_upper: Some(0.96),
                median_lower_bound: Some(ExtReal::Finite(1.5)),
                prop_not_computable: 0.0,
                mc_standard_error: Some(0.005),
                mc_standard_error_upper: Some(0.25),
                mean_dropped_fraction: None,
                prop_drop_fired: None,
            },
            MethodMetrics {
                method: Method::BootBasic,
                n: 25,
                rr: 16.0,
                p_f: 0.2,
                replications: 10,
                n_not_computable: 10,
                n_covered_lower: 0,
                n_covered_upper: 0,
                coverage_lower: None,
                coverage_upper: None,
                median_lower_bound: None,
                prop_not_computable: 1.0,
                mc_standard_error: None,
                mc_standard_error_upper: None,
                mean_dropped_fraction: None,
                prop_drop_fired: None,
            },
        ]
    }

    fn emitted(m: &[MethodMetrics]) -> Vec<String> {
        let mut buf = Vec::new();
        emit_figures(m, &mut buf).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn csv_header_is_stable() {
        assert_eq!(emitted(&[])[0], "method,n,rr,p_f,metric,value");
    }

    #[test]
    fn csv_rows_for_a_full_record() {
        let lines = emitted(&sample_metrics()[..1]);
        assert_eq!(
            lines[1..],
            [
                "koopman,100,4,0.05,replications,1000",
                "koopman,100,4,0.05,n_not_computable,0",
                "koopman,100,4,0.05,prop_not_computable,0",
                "koopman,100,4,0.05,coverage_lower,0.975",
                "koopman,100,4,0.05,coverage_upper,0.96",
                "koopman,100,4,0.05,mc_standard_error,0.005",
                "koopman,100,4,0.05,mc_standard_error_upper,0.25",
                "koopman,100,4,0.05,median_lower_bound,1.5",
            ]
        );
    }

    #[test]
    fn csv_skips_undefined_metrics() {
        let lines = emitted(&sample_metrics()[1..]);
        assert_eq!(
            lines[1..],
            [
                "boot-basic,25,16,0.2,replications,10",
                "boot-basic,25,16,0.2,n_not_computable,10",
                "boot-basic,25,16,0.2,prop_not_computable,1",
            ]
        );
    }

    #[test]
    fn infinite_median_prints_inf() {
        let mut m = sample_metrics()[..1].to_vec();
        m[0].median_lower_bound = Some(ExtReal::PosInf);
        assert_eq!(
            emitted(&m).last().unwrap(),
            "koopman,100,4,0.05,median_lower_bound,inf"
        );
    }
}
