//! Exact unconditional lower bounds for the risk ratio with an inductively
//! built ordering of the sample space.
//!
//! The lower bound attached to an outcome `(yF, yC)` is the smallest `RR0`
//! at which the worst-case (over the nuisance probability) mass of all
//! outcomes at least as extreme reaches `alpha`. Extremeness is a partial
//! order (more factual events, or fewer counterfactual events, is more
//! extreme); it is completed greedily by always adding next the admissible
//! outcome that yields the largest bound. Upper bounds come from the same
//! construction with the scenarios exchanged.
//!
//! Tables are deterministic functions of `(nF, nC, level, grid)` and are
//! serialised as versioned text so they can be built once and shipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::domain::{
    check_level, check_level_side, CountPair, ExtReal, Method, RatioInterval, Side,
};
use crate::error::{Error, Result};
use crate::roots::LOG_LIMIT;

pub const TABLE_FORMAT_VERSION: u32 = 1;

/// Tuning for table construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WangShanConfig {
    /// Equally spaced nuisance values over the admissible range.
    pub grid_size: usize,
    /// Extra points placed between the neighbours of the grid argmax.
    pub refine_points: usize,
    /// Largest per-scenario size built on demand.
    pub max_n: u64,
    /// Bisection tolerance on `log RR0`.
    pub log_tol: f64,
}

impl Default for WangShanConfig {
    fn default() -> Self {
        Self {
            grid_size: 10_000,
            refine_points: 40,
            max_n: 50,
            log_tol: 1e-9,
        }
    }
}

/// Lower confidence bounds for every outcome of an `nF x nC` experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct WangShanTable {
    n_f: u64,
    n_c: u64,
    level: f64,
    grid_size: usize,
    /// Row-major by `yF`, `nC + 1` columns.
    bounds: Vec<ExtReal>,
}

impl WangShanTable {
    /// Builds the table of one-sided lower bounds at confidence `level`.
    pub fn build(n_f: u64, n_c: u64, level: f64, cfg: &WangShanConfig) -> Result<Self> {
        check_level(level)?;
        if n_f == 0 || n_c == 0 {
            return Err(Error::invalid("ensemble sizes must be positive"));
        }
        if n_f.max(n_c) > cfg.max_n {
            return Err(Error::InfeasibleSize(format!(
                "Wang-Shan table for nF = {n_f}, nC = {n_c} exceeds the on-demand cap of {}; \
                 build it with `build-ws-table` and supply it",
                cfg.max_n
            )));
        }
        let bounds = Builder::new(n_f as usize, n_c as usize, 1.0 - level, cfg).run();
        Ok(Self {
            n_f,
            n_c,
            level,
            grid_size: cfg.grid_size,
            bounds,
        })
    }

    pub fn n_f(&self) -> u64 {
        self.n_f
    }

    pub fn n_c(&self) -> u64 {
        self.n_c
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn matches(&self, n_f: u64, n_c: u64, level: f64) -> bool {
        self.n_f == n_f && self.n_c == n_c && (self.level - level).abs() < 1e-12
    }

    /// Lower bound for outcome `(yF, yC)`.
    pub fn lower_bound(&self, y_f: u64, y_c: u64) -> ExtReal {
        assert!(y_f <= self.n_f && y_c <= self.n_c, "outcome outside table");
        self.bounds[(y_f * (self.n_c + 1) + y_c) as usize]
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# riskratio wang-shan lower-bound table")?;
        writeln!(w, "format {TABLE_FORMAT_VERSION}")?;
        writeln!(w, "n_f {}", self.n_f)?;
        writeln!(w, "n_c {}", self.n_c)?;
        writeln!(w, "level {}", self.level)?;
        writeln!(w, "grid {}", self.grid_size)?;
        for row in self.bounds.chunks((self.n_c + 1) as usize) {
            let mut line = String::new();
            for (i, b) in row.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                match b {
                    ExtReal::Finite(x) => write!(line, "{x}").unwrap(),
                    ExtReal::PosInf => line.push_str("inf"),
                    other => return Err(Error::TableFormat(format!("unexpected bound {other}"))),
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.starts_with('#')));
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::TableFormat(format!("missing header field {key}")))??;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(k), Some(v)) if k == key => Ok(v.to_string()),
                _ => Err(Error::TableFormat(format!(
                    "expected `{key} <value>`, got {line:?}"
                ))),
            }
        };
        let parse_err = |k: &str| Error::TableFormat(format!("bad value for {k}"));
        let version: u32 = header("format")?.parse().map_err(|_| parse_err("format"))?;
        if version != TABLE_FORMAT_VERSION {
            return Err(Error::TableFormat(format!(
                "unsupported table format version {version}"
            )));
        }
        let n_f: u64 = header("n_f")?.parse().map_err(|_| parse_err("n_f"))?;
        let n_c: u64 = header("n_c")?.parse().map_err(|_| parse_err("n_c"))?;
        let level: f64 = header("level")?.parse().map_err(|_| parse_err("level"))?;
        let grid_size: usize = header("grid")?.parse().map_err(|_| parse_err("grid"))?;
        let mut bounds = Vec::with_capacity(((n_f + 1) * (n_c + 1)) as usize);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split_whitespace() {
                let b = match tok {
                    "inf" => ExtReal::PosInf,
                    t => ExtReal::Finite(
                        t.parse()
                            .map_err(|_| Error::TableFormat(format!("bad bound {t:?}")))?,
                    ),
                };
                bounds.push(b);
            }
        }
        if bounds.len() != ((n_f + 1) * (n_c + 1)) as usize {
            return Err(Error::TableFormat(format!(
                "expected {} bounds, found {}",
                (n_f + 1) * (n_c + 1),
                bounds.len()
            )));
        }
        Ok(Self {
            n_f,
            n_c,
            level,
            grid_size,
            bounds,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, buf)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(fs::File::open(path)?))
    }

    /// Conventional file name for a table.
    pub fn file_name(n_f: u64, n_c: u64, level: f64) -> String {
        format!("ws_{n_f}_{n_c}_{level}.txt")
    }
}

/// Cache of tables, optionally backed by a directory of prebuilt files.
#[derive(Debug, Default)]
pub struct WangShanStore {
    dir: Option<PathBuf>,
    cfg: WangShanConfig,
    cache: Mutex<HashMap<(u64, u64, u64), Arc<WangShanTable>>>,
}

impl WangShanStore {
    pub fn new(dir: Option<PathBuf>, cfg: WangShanConfig) -> Self {
        Self {
            dir,
            cfg,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn insert(&self, table: WangShanTable) {
        let key = (table.n_f, table.n_c, table.level.to_bits());
        self.cache.lock().unwrap().insert(key, Arc::new(table));
    }

    /// Table from the cache, the table directory, or built on demand (size-capped).
    pub fn get(&self, n_f: u64, n_c: u64, level: f64) -> Result<Arc<WangShanTable>> {
        let key = (n_f, n_c, level.to_bits());
        if let Some(t) = self.cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let from_disk = self
            .dir
            .as_ref()
            .map(|d| d.join(WangShanTable::file_name(n_f, n_c, level)))
            .filter(|p| p.exists());
        let table = match from_disk {
            Some(p) => {
                let t = WangShanTable::load(&p)?;
                if !t.matches(n_f, n_c, level) {
                    return Err(Error::TableFormat(format!(
                        "{} has a mismatched header",
                        p.display()
                    )));
                }
                t
            }
            None => WangShanTable::build(n_f, n_c, level, &self.cfg).map_err(|e| match e {
                Error::InfeasibleSize(msg) => Error::InfeasibleSize(match &self.dir {
                    Some(d) => format!(
                        "{msg} (no {} in {})",
                        WangShanTable::file_name(n_f, n_c, level),
                        d.display()
                    ),
                    None => msg,
                }),
                other => other,
            })?,
        };
        let t = Arc::new(table);
        self.cache.lock().unwrap().insert(key, t.clone());
        Ok(t)
    }
}

/// Interval from a lower-bound table and its mirror (sizes exchanged).
pub fn interval_from_tables(
    counts: &CountPair,
    level: f64,
    side: Side,
    lower_table: &WangShanTable,
    mirror_table: &WangShanTable,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    if counts.y_f() == 0 && counts.y_c() == 0 {
        return Err(Error::not_computable(
            "both counts zero: no events in either scenario",
        ));
    }
    let one_sided = 1.0 - side.tail_alpha(level);
    let expect = |t: &WangShanTable, nf, nc| {
        if t.matches(nf, nc, one_sided) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "table ({}, {}, {}) does not match ({nf}, {nc}, {one_sided})",
                t.n_f, t.n_c, t.level
            )))
        }
    };
    expect(lower_table, counts.n_f(), counts.n_c())?;
    expect(mirror_table, counts.n_c(), counts.n_f())?;
    let lower = lower_table.lower_bound(counts.y_f(), counts.y_c());
    let upper = mirror_table.lower_bound(counts.y_c(), counts.y_f()).recip();
    Ok(RatioInterval::from_two_sided(
        Method::WangShan,
        counts.risk_ratio(),
        lower,
        upper,
        level,
        side,
    ))
}

/// Wang-Shan interval. With `table = None` (or a table that cannot serve
/// the request) the needed tables are built on demand, which is only
/// permitted up to `WangShanConfig::default().max_n` per scenario.
pub fn wang_shan_interval(
    counts: &CountPair,
    level: f64,
    side: Side,
    table: Option<&WangShanTable>,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    let one_sided = 1.0 - side.tail_alpha(level);
    let cfg = WangShanConfig::default();
    let (n_f, n_c) = (counts.n_f(), counts.n_c());
    let get = |nf: u64, nc: u64| -> Result<WangShanTable> {
        match table {
            Some(t) if t.matches(nf, nc, one_sided) => Ok(t.clone()),
            _ => WangShanTable::build(nf, nc, one_sided, &cfg),
        }
    };
    if counts.y_f() == 0 && counts.y_c() == 0 {
        return Err(Error::not_computable(
            "both counts zero: no events in either scenario",
        ));
    }
    let lower = get(n_f, n_c)?;
    let mirror = if n_f == n_c {
        lower.clone()
    } else {
        get(n_c, n_f)?
    };
    interval_from_tables(counts, level, side, &lower, &mirror)
}

/// Wang-Shan interval with tables drawn from a store.
pub fn wang_shan_interval_with_store(
    counts: &CountPair,
    level: f64,
    side: Side,
    store: &WangShanStore,
) -> Result<RatioInterval> {
    check_level_side(level, side)?;
    if counts.y_f() == 0 && counts.y_c() == 0 {
        return Err(Error::not_computable(
            "both counts zero: no events in either scenario",
        ));
    }
    let one_sided = 1.0 - side.tail_alpha(level);
    let lower = store.get(counts.n_f(), counts.n_c(), one_sided)?;
    let mirror = store.get(counts.n_c(), counts.n_f(), one_sided)?;
    interval_from_tables(counts, level, side, &lower, &mirror)
}

/// `a` is at least as extreme as `b` under the partial order.
pub fn at_least_as_extreme(a: (u64, u64), b: (u64, u64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1
}

/// Greedy construction of the ordering and its bounds.
///
/// At each step every admissible next outcome is scored at once: the best
/// candidate's bound is the root of `min_k sup_u mass_k(u, RR0) - alpha`,
/// which is increasing in `RR0` because every candidate set is upper-closed
/// in `yF` and lower-closed in `yC`.
struct Builder<'a> {
    n_f: usize,
    n_c: usize,
    alpha: f64,
    cfg: &'a WangShanConfig,
    ln_fact: Vec<f64>,
    /// At `pF = i / G` (row `i - 1`): survival `P(YF >= a)` with `nF + 2` columns.
    sf_f_fixed: Vec<f64>,
    /// At `pF = i / G`: pmf of `YF`, `nF + 1` columns.
    pmf_f_fixed: Vec<f64>,
    /// At `pC = i / G`: pmf of `YC`, `nC + 1` columns.
    pmf_c_fixed: Vec<f64>,
    sf_f: Vec<f64>,
    pmf_f: Vec<f64>,
    pmf_c: Vec<f64>,
    arg: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(n_f: usize, n_c: usize, alpha: f64, cfg: &'a WangShanConfig) -> Self {
        let n_max = n_f.max(n_c);
        let mut ln_fact = vec![0.0; n_max + 1];
        for k in 1..=n_max {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let mut b = Self {
            n_f,
            n_c,
            alpha,
            cfg,
            ln_fact,
            sf_f_fixed: Vec::new(),
            pmf_f_fixed: Vec::new(),
            pmf_c_fixed: Vec::new(),
            sf_f: vec![0.0; n_f + 2],
            pmf_f: vec![0.0; n_f + 1],
            pmf_c: vec![0.0; n_c + 1],
            arg: Vec::new(),
        };
        let g = cfg.grid_size;
        let mut sf = Vec::with_capacity(g * (n_f + 2));
        let mut pf = Vec::with_capacity(g * (n_f + 1));
        let mut pc = Vec::with_capacity(g * (n_c + 1));
        for i in 1..=g {
            let p = i as f64 / g as f64;
            b.f_at(p);
            sf.extend_from_slice(&b.sf_f);
            pf.extend_from_slice(&b.pmf_f);
            b.c_at(p);
            pc.extend_from_slice(&b.pmf_c);
        }
        b.sf_f_fixed = sf;
        b.pmf_f_fixed = pf;
        b.pmf_c_fixed = pc;
        b
    }

    fn pmf(ln_fact: &[f64], n: usize, p: f64, out: &mut [f64]) {
        let out = &mut out[..=n];
        if p >= 1.0 {
            out.fill(0.0);
            out[n] = 1.0;
            return;
        }
        if p <= 0.0 {
            out.fill(0.0);
            out[0] = 1.0;
            return;
        }
        let mode = (((n + 1) as f64) * p).floor().min(n as f64) as usize;
        let ln = ln_fact[n] - ln_fact[mode] - ln_fact[n - mode]
            + mode as f64 * p.ln()
            + (n - mode) as f64 * (-p).ln_1p();
        out[mode] = ln.exp();
        let odds = p / (1.0 - p);
        for k in mode..n {
            out[k + 1] = out[k] * odds * (n - k) as f64 / (k + 1) as f64;
        }
        for k in (0..mode).rev() {
            out[k] = out[k + 1] / odds * (k + 1) as f64 / (n - k) as f64;
        }
    }

    fn f_at(&mut self, p_f: f64) {
        Self::pmf(&self.ln_fact, self.n_f, p_f, &mut self.pmf_f);
        self.sf_f[self.n_f + 1] = 0.0;
        for a in (0..=self.n_f).rev() {
            self.sf_f[a] = self.sf_f[a + 1] + self.pmf_f[a];
        }
    }

    fn c_at(&mut self, p_c: f64) {
        Self::pmf(&self.ln_fact, self.n_c, p_c, &mut self.pmf_c);
    }

    /// Mass of `{(a, b) : a >= thr[b]}`, rows `0..=b_max`.
    fn base_mass(thr: &[usize], b_max: usize, sf: &[f64], pmf_c: &[f64]) -> f64 {
        let mut acc = 0.0;
        for b in 0..=b_max {
            acc += pmf_c[b] * sf[thr[b]];
        }
        acc
    }

    /// Worst-case mass over the nuisance grid of the current set plus each
    /// candidate point, refined around each candidate's argmax.
    fn sup_masses(
        &mut self,
        thr: &[usize],
        b_max: usize,
        pts: &[(usize, usize)],
        rr0: f64,
        out: &mut Vec<f64>,
    ) {
        let g = self.cfg.grid_size;
        let (n_f, n_c) = (self.n_f, self.n_c);
        out.clear();
        out.resize(pts.len(), f64::NEG_INFINITY);
        self.arg.clear();
        self.arg.resize(pts.len(), 1);
        for i in 1..=g {
            let (sf, pf, pc): (&[f64], &[f64], &[f64]) = if rr0 >= 1.0 {
                self.c_at(i as f64 / g as f64 / rr0);
                (
                    &self.sf_f_fixed[(i - 1) * (n_f + 2)..i * (n_f + 2)],
                    &self.pmf_f_fixed[(i - 1) * (n_f + 1)..i * (n_f + 1)],
                    &self.pmf_c,
                )
            } else {
                self.f_at(i as f64 / g as f64 * rr0);
                (
                    &self.sf_f,
                    &self.pmf_f,
                    &self.pmf_c_fixed[(i - 1) * (n_c + 1)..i * (n_c + 1)],
                )
            };
            let base = Self::base_mass(thr, b_max, sf, pc);
            for (k, &(a, b)) in pts.iter().enumerate() {
                let m = base + pf[a] * pc[b];
                if m > out[k] {
                    out[k] = m;
                    self.arg[k] = i;
                }
            }
        }
        let r = self.cfg.refine_points;
        for k in 0..pts.len() {
            let arg = self.arg[k];
            let lo = (arg - 1) as f64 / g as f64;
            let hi = (arg + 1).min(g) as f64 / g as f64;
            for j in 1..r {
                let u = lo + (hi - lo) * j as f64 / r as f64;
                let (p_f, p_c) = if rr0 >= 1.0 {
                    (u, u / rr0)
                } else {
                    (u * rr0, u)
                };
                self.f_at(p_f);
                self.c_at(p_c);
                let (a, b) = pts[k];
                let m = Self::base_mass(thr, b_max, &self.sf_f, &self.pmf_c)
                    + self.pmf_f[a] * self.pmf_c[b];
                if m > out[k] {
                    out[k] = m;
                }
            }
        }
    }

    /// Picks the next outcome among `pts` and its bound on the log scale.
    ///
    /// `hi` is the previous bound; adding points only increases the mass, so
    /// the next bound cannot exceed it up to root-finding tolerance.
    fn step(&mut self, thr: &[usize], pts: &[(usize, usize)], hi: f64) -> (usize, f64) {
        let b_max = thr.iter().rposition(|&t| t <= self.n_f).unwrap_or(0);
        let mut s = Search {
            live: (0..pts.len()).collect(),
            sub: pts.to_vec(),
            vals: Vec::new(),
            best: Vec::new(),
            down: f64::NEG_INFINITY,
        };

        let (mut up, mut f_up) = if hi.is_finite() {
            let f = s.eval(self, thr, b_max, hi);
            if f <= 0.0 {
                return s.winner(hi);
            }
            (hi, f)
        } else {
            let mut x = 0.0;
            let mut step = 1.0;
            loop {
                let f = s.eval(self, thr, b_max, x);
                if f > 0.0 {
                    break (x, f);
                }
                if x > LOG_LIMIT {
                    return s.winner(f64::INFINITY);
                }
                x += step;
                step *= 2.0;
            }
        };
        let mut step = 0.25;
        let f_down = loop {
            let x = up - step;
            if x < -LOG_LIMIT {
                return (0, f64::NEG_INFINITY);
            }
            let f = s.eval(self, thr, b_max, x);
            if f <= 0.0 {
                break f;
            }
            up = x;
            f_up = f;
            step *= 2.0;
        };

        // Brent's method on [down, up]; the excess is increasing in log RR0.
        let tol = self.cfg.log_tol;
        let (mut a, mut fa) = (s.down, f_down);
        let (mut b, mut fb) = (up, f_up);
        let (mut c, mut fc) = (a, fa);
        let mut d = b - a;
        let mut e = d;
        loop {
            if (fb > 0.0) == (fc > 0.0) {
                c = a;
                fc = fa;
                d = b - a;
                e = d;
            }
            if fc.abs() < fb.abs() {
                a = b;
                b = c;
                c = a;
                fa = fb;
                fb = fc;
                fc = fa;
            }
            let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
            let xm = 0.5 * (c - b);
            if xm.abs() <= tol1 || fb == 0.0 {
                break;
            }
            if e.abs() >= tol1 && fa.abs() > fb.abs() {
                let sr = fb / fa;
                let (mut p, mut q);
                if a == c {
                    p = 2.0 * xm * sr;
                    q = 1.0 - sr;
                } else {
                    let qa = fa / fc;
                    let r = fb / fc;
                    p = sr * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                    q = (qa - 1.0) * (r - 1.0) * (sr - 1.0);
                }
                if p > 0.0 {
                    q = -q;
                } else {
                    p = -p;
                }
                if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                    e = d;
                    d = p / q;
                } else {
                    d = xm;
                    e = d;
                }
            } else {
                d = xm;
                e = d;
            }
            a = b;
            fa = fb;
            b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
            fb = s.eval(self, thr, b_max, b);
        }
        let down = s.down;
        s.winner(down)
    }

    fn run(mut self) -> Vec<ExtReal> {
        let (n_f, n_c) = (self.n_f, self.n_c);
        // thr[b] = smallest yF in the current set for row yC = b (nF + 1: empty row).
        let mut thr = vec![n_f + 1; n_c + 1];
        let mut bounds = vec![ExtReal::ZERO; (n_f + 1) * (n_c + 1)];
        let mut last = f64::INFINITY;
        loop {
            let pts: Vec<(usize, usize)> = (0..=n_c)
                .filter(|&b| thr[b] >= 2 && (b == 0 || thr[b - 1] < thr[b]))
                .map(|b| (thr[b] - 1, b))
                .collect();
            if pts.is_empty() {
                break;
            }
            let (k, log_b) = self.step(&thr, &pts, last);
            if log_b == f64::NEG_INFINITY {
                // Every remaining outcome keeps bound 0.
                break;
            }
            last = log_b.min(last);
            let (a, b) = pts[k];
            bounds[a * (n_c + 1) + b] = ExtReal::from_f64(last.exp());
            thr[b] = a;
        }
        // Outcomes with yF = 0 have bound 0.
        bounds
    }
}

/// Root-search bookkeeping for one greedy step.
struct Search {
    /// Indices into the step's candidates that can still win.
    live: Vec<usize>,
    sub: Vec<(usize, usize)>,
    vals: Vec<f64>,
    /// Per-live-candidate masses at `down`.
    best: Vec<f64>,
    /// Largest log `RR0` seen with every live candidate's mass at most alpha.
    down: f64,
}

impl Search {
    fn eval(&mut self, bld: &mut Builder<'_>, thr: &[usize], b_max: usize, x: f64) -> f64 {
        bld.sup_masses(thr, b_max, &self.sub, x.exp(), &mut self.vals);
        let f = self.vals.iter().copied().fold(f64::INFINITY, f64::min) - bld.alpha;
        if f <= 0.0 && x > self.down {
            // A candidate whose mass already exceeds alpha here has its bound
            // below x, so it cannot beat the candidates still at or under alpha.
            let keep: Vec<usize> = (0..self.vals.len())
                .filter(|&k| self.vals[k] <= bld.alpha)
                .collect();
            self.live = keep.iter().map(|&k| self.live[k]).collect();
            self.sub = keep.iter().map(|&k| self.sub[k]).collect();
            self.best = keep.iter().map(|&k| self.vals[k]).collect();
            self.down = x;
        }
        f
    }

    /// Candidate with the most room under alpha at the final `down`; ties go
    /// to the lower counterfactual count.
    fn winner(&self, bound: f64) -> (usize, f64) {
        let src = if self.best.is_empty() {
            &self.vals
        } else {
            &self.best
        };
        let k = (0..src.len())
            .min_by(|&i, &j| src[i].total_cmp(&src[j]).then(i.cmp(&j)))
            .unwrap();
        (self.live[k], bound)
    }
}
