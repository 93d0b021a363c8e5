use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use riskratio::bootstrap::{boot_interval, resample_pair, BootstrapConfig};
use riskratio::estimation::EstimateSource;
use riskratio::eva::{
    eva_delta_interval, eva_lrt_interval, eva_probability, fit_pot_tail, PotFit, PotInput,
};
use riskratio::internal_variability::{
    per_year_counts, time_averaged_delta_interval, time_averaged_p, year_block_bootstrap,
};
use riskratio::ratio_intervals::{
    delta_interval, koopman_interval, lrt_interval, wang_shan_interval_with_store, wilson_interval,
    WangShanConfig, WangShanStore, WangShanTable,
};
use riskratio::simstudy::{emit_figures, run_grid, ScenarioGrid, GRID_METHODS};
use riskratio::{CountPair, EventDefinition, Method, RatioInterval, RawSample, ScenarioPair, Side};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::ingest::{self, IngestRecord, Scenario};
use crate::render::{ext, interval_lines, num};
use crate::{
    BuildWsArgs, DataArgs, Estimator, FitEvaArgs, Format, IntervalArgs, RrCiArgs, SimulateArgs,
    SweepArgs, TimeAverageArgs,
};

pub struct Context {
    pub format: Format,
    pub table_dir: Option<PathBuf>,
}

impl Context {
    fn store(&self) -> WangShanStore {
        WangShanStore::new(self.table_dir.clone(), WangShanConfig::default())
    }

    fn emit(&self, text: String, value: Value) -> Result<String, CliError> {
        match self.format {
            Format::Text => Ok(text),
            Format::Json => serde_json::to_string_pretty(&value)
                .map(|s| s + "\n")
                .map_err(|e| CliError::Io(e.to_string())),
        }
    }
}

fn load(data: &DataArgs) -> Result<Vec<IngestRecord>, CliError> {
    let path = data
        .input
        .as_ref()
        .ok_or_else(|| CliError::Parse("an input file is required".into()))?;
    let mut records = ingest::read_records_file(path)?;
    if let Some(reference) = &data.anomaly {
        let mean = ingest::reference_mean(reference)?;
        ingest::apply_anomaly(&mut records, mean, data.anomaly_mode)?;
    }
    Ok(records)
}

fn raw_pair(records: &[IngestRecord]) -> Result<(RawSample, RawSample), CliError> {
    Ok((
        ingest::scenario_sample(records, Scenario::Factual)?,
        ingest::scenario_sample(records, Scenario::Counterfactual)?,
    ))
}

fn boot_config(a: &IntervalArgs) -> Result<BootstrapConfig, CliError> {
    let estimator = match a.estimator {
        Estimator::Nonparametric => EstimateSource::Nonparametric,
        Estimator::ParametricNormal => EstimateSource::ParametricNormal,
    };
    Ok(BootstrapConfig::new(a.nb, a.seed)?
        .with_policy(a.degenerate.into())
        .with_estimator(estimator))
}

fn check_count_method(m: Method) -> Result<(), CliError> {
    if GRID_METHODS.contains(&m) {
        return Ok(());
    }
    let hint = match m {
        Method::EvaLrt | Method::EvaDelta => "use fit-eva",
        _ => "use time-average",
    };
    Err(CliError::Parse(format!(
        "{m} is not available here; {hint}"
    )))
}

/// Interval for one dataset. Bootstrap methods resample raw values when
/// they are available and binomial counts otherwise.
fn interval(
    method: Method,
    pair: &ScenarioPair,
    event: Option<&EventDefinition>,
    a: &IntervalArgs,
    store: &WangShanStore,
) -> Result<RatioInterval, CliError> {
    let counts = pair.counts(event)?;
    let ci = match method {
        Method::Delta => delta_interval(&counts, a.level, a.side),
        Method::Lrt => lrt_interval(&counts, a.level, a.side),
        Method::Koopman => koopman_interval(&counts, a.level, a.side),
        Method::Wilson => wilson_interval(&counts, a.level, a.side),
        Method::WangShan => wang_shan_interval_with_store(&counts, a.level, a.side, store),
        m if m.is_bootstrap() => {
            let dist = resample_pair(pair, event, &boot_config(a)?)?;
            boot_interval(m, &dist, a.level, a.side)
        }
        m => return Err(CliError::Parse(format!("{m} is not a count-based method"))),
    };
    Ok(ci?)
}

fn counts_json(c: &CountPair) -> Value {
    json!({ "y_f": c.y_f(), "n_f": c.n_f(), "y_c": c.y_c(), "n_c": c.n_c() })
}

fn counts_text(c: &CountPair) -> String {
    format!(
        "counts: {}/{} factual, {}/{} counterfactual\n",
        c.y_f(),
        c.n_f(),
        c.y_c(),
        c.n_c()
    )
}

pub fn rr_ci(ctx: &Context, a: &RrCiArgs) -> Result<String, CliError> {
    check_count_method(a.method)?;
    let (pair, event) = match a.counts {
        Some([yf, nf, yc, nc]) => (ScenarioPair::from_counts(yf, nf, yc, nc)?, None),
        None => {
            let cutoff = a
                .cutoff
                .ok_or_else(|| CliError::Parse("--cutoff is required with an input file".into()))?;
            let (f, c) = raw_pair(&load(&a.data)?)?;
            (
                ScenarioPair::from_raw(f, c),
                Some(EventDefinition::new(cutoff, a.data.tail)?),
            )
        }
    };
    let counts = pair.counts(event.as_ref())?;
    let ci = interval(a.method, &pair, event.as_ref(), &a.interval, &ctx.store())?;
    let mut text = counts_text(&counts);
    interval_lines(&ci, &mut text);
    ctx.emit(
        text,
        json!({ "command": "rr-ci", "counts": counts_json(&counts), "interval": ci }),
    )
}

pub fn sweep(ctx: &Context, a: &SweepArgs) -> Result<String, CliError> {
    check_count_method(a.method)?;
    let (f, c) = raw_pair(&load(&a.data)?)?;
    let pair = ScenarioPair::from_raw(f, c);
    let store = ctx.store();
    let mut text = String::from("cutoff,method,y_f,n_f,y_c,n_c,estimate,lower,upper,status\n");
    let mut rows = Vec::new();
    for &cutoff in &a.cutoffs {
        let event = EventDefinition::new(cutoff, a.data.tail)?;
        let counts = pair.counts(Some(&event))?;
        let head = format!(
            "{},{},{},{},{},{}",
            num(cutoff),
            a.method,
            counts.y_f(),
            counts.n_f(),
            counts.y_c(),
            counts.n_c()
        );
        match interval(a.method, &pair, Some(&event), &a.interval, &store) {
            Ok(ci) => {
                let _ = writeln!(
                    text,
                    "{head},{},{},{},ok",
                    ext(ci.estimate),
                    ext(ci.lower),
                    ext(ci.upper)
                );
                rows.push(json!({ "cutoff": cutoff, "counts": counts_json(&counts), "status": "ok", "interval": ci }));
            }
            Err(CliError::Core(e)) if not_computable(&e) => {
                let _ = writeln!(text, "{head},{},,,not computable", ext(counts.risk_ratio()));
                rows.push(json!({
                    "cutoff": cutoff,
                    "counts": counts_json(&counts),
                    "status": "not_computable",
                    "reason": e.to_string(),
                }));
            }
            Err(e) => return Err(e),
        }
    }
    ctx.emit(
        text,
        json!({ "command": "sweep", "method": a.method, "rows": rows }),
    )
}

fn not_computable(e: &riskratio::Error) -> bool {
    use riskratio::Error as E;
    matches!(
        e,
        E::NotComputable(_) | E::Degenerate(_) | E::InsufficientExceedances { .. }
    )
}

/// Linear-interpolation sample quantile (R type 7).
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn fit_summary(name: &str, fit: &PotFit, event: &EventDefinition, out: &mut String) -> Value {
    let p = eva_probability(fit, event);
    let _ = writeln!(
        out,
        "{name}: mu {} sigma {} xi {} exceedances {} loglik {} converged {} p {}",
        num(fit.params.mu),
        num(fit.params.sigma),
        num(fit.params.xi),
        fit.n_exceedances,
        num(fit.log_likelihood),
        fit.converged,
        num(p.value)
    );
    for w in &p.warnings {
        let _ = writeln!(out, "{name} warning: {w}");
    }
    json!({
        "mu": fit.params.mu,
        "sigma": fit.params.sigma,
        "xi": fit.params.xi,
        "n_exceedances": fit.n_exceedances,
        "n_blocks": fit.n_blocks,
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "probability": p.value,
        "warnings": p.warnings,
    })
}

pub fn fit_eva(ctx: &Context, a: &FitEvaArgs) -> Result<String, CliError> {
    if !matches!(a.method, Method::EvaLrt | Method::EvaDelta) {
        return Err(CliError::Parse(format!(
            "fit-eva supports eva-lrt and eva-delta, not {}",
            a.method
        )));
    }
    if !(a.threshold_quantile > 0.0 && a.threshold_quantile < 1.0) {
        return Err(CliError::Parse(
            "--threshold-quantile must lie in (0, 1)".into(),
        ));
    }
    let (f, c) = raw_pair(&load(&a.data)?)?;
    let threshold = match a.threshold {
        Some(u) => u,
        None => {
            let pooled: Vec<f64> = f.values().iter().chain(c.values()).copied().collect();
            quantile(&pooled, a.threshold_quantile)
        }
    };
    let event = EventDefinition::new(a.cutoff, a.data.tail)?;
    let blocks = |s: &RawSample| a.n_blocks.unwrap_or(s.len() as f64);
    let (fin, cin) = (
        PotInput::new(f.clone(), threshold, blocks(&f)),
        PotInput::new(c.clone(), threshold, blocks(&c)),
    );

    let mut text = format!("threshold: {}\n", num(threshold));
    let ff = fit_pot_tail(&f, threshold, fin.n_blocks, a.data.tail)?;
    let fj = fit_summary("factual", &ff, &event, &mut text);
    let cj = match fit_pot_tail(&c, threshold, cin.n_blocks, a.data.tail) {
        Ok(cf) => fit_summary("counterfactual", &cf, &event, &mut text),
        Err(riskratio::Error::InsufficientExceedances { found, required }) => {
            let _ = writeln!(
                text,
                "counterfactual: {found} exceedances (fewer than {required}); not fitted"
            );
            json!({ "n_exceedances": found, "fitted": false })
        }
        Err(e) => return Err(e.into()),
    };
    let ci = match a.method {
        Method::EvaLrt => eva_lrt_interval(&fin, &cin, &event, a.level, a.side)?,
        _ => eva_delta_interval(&fin, &cin, &event, a.level, a.side)?,
    };
    interval_lines(&ci, &mut text);
    ctx.emit(
        text,
        json!({
            "command": "fit-eva",
            "threshold": threshold,
            "factual": fj,
            "counterfactual": cj,
            "interval": ci,
        }),
    )
}

fn count_interval(
    method: Method,
    counts: &CountPair,
    level: f64,
    side: Side,
    store: &WangShanStore,
) -> riskratio::Result<RatioInterval> {
    match method {
        Method::Delta => delta_interval(counts, level, side),
        Method::Lrt => lrt_interval(counts, level, side),
        Method::Koopman => koopman_interval(counts, level, side),
        Method::Wilson => wilson_interval(counts, level, side),
        Method::WangShan => wang_shan_interval_with_store(counts, level, side, store),
        m => Err(riskratio::Error::InvalidInput(format!(
            "{m} is not available for per-year intervals"
        ))),
    }
}

pub fn time_average(ctx: &Context, a: &TimeAverageArgs) -> Result<String, CliError> {
    if let Some(m) = a.boot_method {
        if !m.is_bootstrap() {
            return Err(CliError::Parse(format!(
                "--boot-method must be a bootstrap method, not {m}"
            )));
        }
    }
    if a.per_year_method.is_bootstrap() || !GRID_METHODS.contains(&a.per_year_method) {
        return Err(CliError::Parse(format!(
            "--per-year-method {} is not a closed-form count method",
            a.per_year_method
        )));
    }
    let records = load(&a.data)?;
    let f = ingest::scenario_series(&records, Scenario::Factual)?;
    let c = ingest::scenario_series(&records, Scenario::Counterfactual)?;
    let event = EventDefinition::new(a.cutoff, a.data.tail)?;
    let ev = Some(&event);
    let lv = &a.interval;

    let (pf, pc) = (
        time_averaged_p(&f, ev)?.value,
        time_averaged_p(&c, ev)?.value,
    );
    let delta = time_averaged_delta_interval(&f, &c, ev, lv.level, lv.side)?;
    let mut text = format!(
        "years: {}\nmembers per year: {} factual, {} counterfactual\np_factual: {}\np_counterfactual: {}\n",
        f.n_years(),
        f.members_per_year(),
        c.members_per_year(),
        num(pf),
        num(pc)
    );
    interval_lines(&delta, &mut text);
    let mut value = json!({
        "command": "time-average",
        "n_years": f.n_years(),
        "p_factual": pf,
        "p_counterfactual": pc,
        "pooled": delta,
    });
    if let Some(m) = a.boot_method {
        let dist = year_block_bootstrap(&f, &c, ev, &boot_config(lv)?)?;
        let ci = boot_interval(m, &dist, lv.level, lv.side)?;
        text.push_str("bootstrap:\n");
        interval_lines(&ci, &mut text);
        value["bootstrap"] = serde_json::to_value(&ci).map_err(|e| CliError::Io(e.to_string()))?;
    }

    let store = ctx.store();
    text.push_str("year,y_f,n_f,y_c,n_c,estimate,lower,upper,status\n");
    let mut years = Vec::new();
    for (year, counts) in per_year_counts(&f, &c, ev)? {
        let head = format!(
            "{year},{},{},{},{}",
            counts.y_f(),
            counts.n_f(),
            counts.y_c(),
            counts.n_c()
        );
        match count_interval(a.per_year_method, &counts, lv.level, lv.side, &store) {
            Ok(ci) => {
                let _ = writeln!(
                    text,
                    "{head},{},{},{},ok",
                    ext(ci.estimate),
                    ext(ci.lower),
                    ext(ci.upper)
                );
                years.push(json!({ "year": year, "counts": counts_json(&counts), "status": "ok", "interval": ci }));
            }
            Err(e) if not_computable(&e) => {
                let _ = writeln!(text, "{head},{},,,not computable", ext(counts.risk_ratio()));
                years.push(json!({
                    "year": year,
                    "counts": counts_json(&counts),
                    "status": "not_computable",
                    "reason": e.to_string(),
                }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    value["per_year"] = Value::Array(years);
    ctx.emit(text, value)
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<String, CliError> {
    let grid = ScenarioGrid {
        n_values: a.n.clone(),
        rr_values: a.rr.clone(),
        pf_values: a.pf.clone(),
        replications: if a.full { 5000 } else { a.reps },
        level: a.level,
        seed: a.seed,
        bootstrap_replicates: a.nb,
    };
    let methods = if a.methods.is_empty() {
        GRID_METHODS.to_vec()
    } else {
        a.methods.clone()
    };
    let metrics = run_grid(&grid, &methods, &ctx.store())?;
    let mut csv = Vec::new();
    emit_figures(&metrics, &mut csv)?;
    match &a.out {
        Some(path) => {
            write_atomic(path, &csv)?;
            let text = format!(
                "wrote metrics for {} cells x {} methods to {}\n",
                grid.cells().len(),
                methods.len(),
                path.display()
            );
            ctx.emit(
                text,
                json!({ "command": "simulate", "out": path, "metrics": metrics }),
            )
        }
        None => ctx.emit(
            String::from_utf8_lossy(&csv).into_owned(),
            json!({ "command": "simulate", "metrics": metrics }),
        ),
    }
}

pub fn build_ws_table(ctx: &Context, a: &BuildWsArgs) -> Result<String, CliError> {
    let nc = a.nc.unwrap_or(a.nf);
    let cfg = WangShanConfig {
        grid_size: a.grid_size,
        max_n: u64::MAX,
        ..WangShanConfig::default()
    };
    let target = a
        .out
        .clone()
        .or_else(|| ctx.table_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let path = if target.is_dir() {
        target.join(WangShanTable::file_name(a.nf, nc, a.level))
    } else {
        target
    };
    let table = WangShanTable::build(a.nf, nc, a.level, &cfg)?;
    let mut buf = Vec::new();
    table.write_to(&mut buf)?;
    write_atomic(&path, &buf)?;
    ctx.emit(
        format!("wrote {}\n", path.display()),
        json!({ "command": "build-ws-table", "n_f": a.nf, "n_c": nc, "level": a.level, "out": path }),
    )
}
