//! Ensemble input files: header-bearing CSV with columns
//! `scenario, year (optional), member, value`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use riskratio::internal_variability::EnsembleSeries;
use riskratio::RawSample;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Factual,
    Counterfactual,
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "factual" | "f" => Ok(Scenario::Factual),
            "counterfactual" | "c" => Ok(Scenario::Counterfactual),
            other => Err(CliError::Parse(format!("unknown scenario {other:?}"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Factual => "factual",
            Scenario::Counterfactual => "counterfactual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub scenario: Scenario,
    pub year: Option<i32>,
    pub member: i64,
    pub value: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    scenario: String,
    #[serde(default)]
    year: Option<i32>,
    member: i64,
    value: f64,
}

/// Parses records and checks that `(scenario, year, member)` is unique and
/// every value is finite.
pub fn read_records<R: Read>(input: R) -> Result<Vec<IngestRecord>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Parse(e.to_string()))?
        .clone();
    for col in ["scenario", "member", "value"] {
        if !headers.iter().any(|h| h == col) {
            return Err(CliError::Parse(format!("missing column {col:?}")));
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CliError::Parse(format!("line {line}: {e}")))?;
        let rec = IngestRecord {
            scenario: row
                .scenario
                .parse()
                .map_err(|e: CliError| CliError::Parse(format!("line {line}: {e}")))?,
            year: row.year,
            member: row.member,
            value: row.value,
        };
        if !rec.value.is_finite() {
            return Err(CliError::Parse(format!(
                "line {line}: value must be finite"
            )));
        }
        if !seen.insert((rec.scenario, rec.year, rec.member)) {
            return Err(CliError::Parse(format!(
                "line {line}: duplicate record for {} year {:?} member {}",
                rec.scenario, rec.year, rec.member
            )));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(CliError::Parse("input has no records".into()));
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<IngestRecord>, CliError> {
    let f =
        std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_records(f)
}

/// Writes records in the input format; the year column is written only if any record has one.
#[cfg_attr(not(test), allow(dead_code))]
pub fn write_records<W: Write>(records: &[IngestRecord], out: W) -> Result<(), CliError> {
    let with_year = records.iter().any(|r| r.year.is_some());
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    if with_year {
        w.write_record(["scenario", "year", "member", "value"])
            .map_err(csv_err)?;
    } else {
        w.write_record(["scenario", "member", "value"])
            .map_err(csv_err)?;
    }
    for r in records {
        let mut row = vec![r.scenario.to_string()];
        if with_year {
            row.push(r.year.map(|y| y.to_string()).unwrap_or_default());
        }
        row.push(r.member.to_string());
        row.push(r.value.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnomalyMode {
    Subtract,
    Divide,
}

/// Mean of the `value` column of a reference file.
pub fn reference_mean(path: &Path) -> Result<f64, CliError> {
    let f =
        std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(f);
    let idx = rdr
        .headers()
        .map_err(|e| CliError::Parse(e.to_string()))?
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| CliError::Parse(format!("{}: missing column \"value\"", path.display())))?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Parse(e.to_string()))?;
        let v: f64 = rec.get(idx).unwrap_or_default().parse().map_err(|_| {
            CliError::Parse(format!("{}: bad value {:?}", path.display(), rec.get(idx)))
        })?;
        sum += v;
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Parse(format!(
            "{}: reference file has no values",
            path.display()
        )));
    }
    Ok(sum / n as f64)
}

/// Expresses every value relative to the reference mean.
pub fn apply_anomaly(
    records: &mut [IngestRecord],
    mean: f64,
    mode: AnomalyMode,
) -> Result<(), CliError> {
    if mode == AnomalyMode::Divide && mean == 0.0 {
        return Err(CliError::Parse(
            "reference mean is zero; cannot divide".into(),
        ));
    }
    for r in records {
        r.value = match mode {
            AnomalyMode::Subtract => r.value - mean,
            AnomalyMode::Divide => r.value / mean,
        };
    }
    Ok(())
}

/// All values of one scenario, ordered by year then member.
pub fn scenario_sample(records: &[IngestRecord], s: Scenario) -> Result<RawSample, CliError> {
    let mut v: Vec<&IngestRecord> = records.iter().filter(|r| r.scenario == s).collect();
    if v.is_empty() {
        return Err(CliError::Parse(format!("no {s} records")));
    }
    v.sort_by_key(|r| (r.year, r.member));
    Ok(RawSample::new(v.iter().map(|r| r.value).collect())?)
}

/// One scenario as a year-by-member matrix. Members are matched across
/// years by their `member` label.
pub fn scenario_series(records: &[IngestRecord], s: Scenario) -> Result<EnsembleSeries, CliError> {
    let mut by_year: BTreeMap<i32, BTreeMap<i64, f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.scenario == s) {
        let y = r
            .year
            .ok_or_else(|| CliError::Parse("time averaging needs a year on every record".into()))?;
        by_year.entry(y).or_default().insert(r.member, r.value);
    }
    if by_year.is_empty() {
        return Err(CliError::Parse(format!("no {s} records")));
    }
    let members: Vec<i64> = by_year
        .values()
        .next()
        .map(|m| m.keys().copied().collect())
        .unwrap_or_default();
    for (y, m) in &by_year {
        if m.keys().ne(members.iter()) {
            return Err(CliError::Parse(format!(
                "{s} year {y} does not have the same members as the first year"
            )));
        }
    }
    let years = by_year.keys().copied().collect();
    let values = by_year
        .into_values()
        .map(|m| m.into_values().collect())
        .collect();
    Ok(EnsembleSeries::from_values(years, values)?)
}
