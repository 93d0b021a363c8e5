//! Domain types shared by every estimator and interval method.
//!
//! Risk ratios live on the extended half-line `[0, +inf]`, and `0/0` is a
//! legitimate outcome of counting exceedances, so [`ExtReal`] carries the
//! infinities and the undefined state explicitly instead of leaning on IEEE
//! payloads.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An extended real number: finite, `±inf`, or the explicit `undefined` (0/0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
    Undefined,
}

impl std::ops::Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(x) => ExtReal::Finite(-x),
            ExtReal::PosInf => ExtReal::NegInf,
            ExtReal::Undefined => ExtReal::Undefined,
        }
    }
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);
    pub const ONE: ExtReal = ExtReal::Finite(1.0);

    /// Maps IEEE values onto the extended reals; NaN becomes `Undefined`.
    pub fn from_f64(x: f64) -> Self {
        if x.is_nan() {
            ExtReal::Undefined
        } else if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    /// IEEE view, for arithmetic at call sites that have already excluded `Undefined`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::Undefined => f64::NAN,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_undefined(self) -> bool {
        matches!(self, ExtReal::Undefined)
    }

    /// Natural log of a non-negative extended real: `ln 0 = -inf`, `ln inf = inf`.
    pub fn ln(self) -> ExtReal {
        match self {
            ExtReal::Finite(0.0) => ExtReal::NegInf,
            ExtReal::Finite(x) if x > 0.0 => ExtReal::Finite(x.ln()),
            ExtReal::PosInf => ExtReal::PosInf,
            _ => ExtReal::Undefined,
        }
    }

    pub fn exp(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::ZERO,
            ExtReal::Finite(x) => ExtReal::from_f64(x.exp()),
            ExtReal::PosInf => ExtReal::PosInf,
            ExtReal::Undefined => ExtReal::Undefined,
        }
    }

    /// Reciprocal on `[0, inf]`: `1/0 = inf`, `1/inf = 0`.
    pub fn recip(self) -> ExtReal {
        match self {
            ExtReal::Finite(0.0) => ExtReal::PosInf,
            ExtReal::Finite(x) => ExtReal::Finite(1.0 / x),
            ExtReal::PosInf | ExtReal::NegInf => ExtReal::ZERO,
            ExtReal::Undefined => ExtReal::Undefined,
        }
    }

    /// Total order on the defined values; `None` when either side is undefined.
    pub fn try_cmp(self, other: ExtReal) -> Option<Ordering> {
        if self.is_undefined() || other.is_undefined() {
            return None;
        }
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.try_cmp(*other)
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::Finite(x) => match f.precision() {
                Some(p) => write!(f, "{x:.p$}"),
                None => write!(f, "{x}"),
            },
            ExtReal::PosInf => f.write_str("inf"),
            ExtReal::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ExtRealRepr {
    value: Option<f64>,
    flag: String,
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (value, flag) = match *self {
            ExtReal::NegInf => (None, "-inf"),
            ExtReal::Finite(x) => (Some(x), "finite"),
            ExtReal::PosInf => (None, "inf"),
            ExtReal::Undefined => (None, "undefined"),
        };
        ExtRealRepr {
            value,
            flag: flag.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ExtRealRepr::deserialize(d)?;
        match (repr.flag.as_str(), repr.value) {
            ("finite", Some(x)) if x.is_finite() => Ok(ExtReal::Finite(x)),
            ("inf", _) => Ok(ExtReal::PosInf),
            ("-inf", _) => Ok(ExtReal::NegInf),
            ("undefined", _) => Ok(ExtReal::Undefined),
            (flag, _) => Err(serde::de::Error::custom(format!(
                "bad extended real flag {flag:?}"
            ))),
        }
    }
}

/// Number of events out of a number of trials (ensemble members) for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinomialCount {
    events: u64,
    trials: u64,
}

impl BinomialCount {
    pub fn new(events: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if events > trials {
            return Err(Error::invalid(format!(
                "events ({events}) exceed trials ({trials})"
            )));
        }
        Ok(Self { events, trials })
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn proportion(&self) -> f64 {
        self.events as f64 / self.trials as f64
    }
}

/// Raw per-member values of the analysed variable for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    values: Vec<f64>,
}

impl RawSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("raw sample must contain at least one value"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "raw sample contains non-finite value {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Counts members meeting the event definition.
    pub fn count(&self, event: &EventDefinition) -> BinomialCount {
        let events = self.values.iter().filter(|&&v| event.occurs(v)).count() as u64;
        BinomialCount {
            events,
            trials: self.values.len() as u64,
        }
    }

    /// Values mapped so that the event of interest is always an upper-tail exceedance.
    pub fn oriented(&self, tail: Tail) -> Vec<f64> {
        self.values.iter().map(|&v| tail.orient(v)).collect()
    }
}

/// One scenario's data, either as counts or raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sample {
    Counts(BinomialCount),
    Raw(RawSample),
}

impl Sample {
    pub fn count(&self, event: Option<&EventDefinition>) -> Result<BinomialCount> {
        match (self, event) {
            (Sample::Counts(c), _) => Ok(*c),
            (Sample::Raw(r), Some(e)) => Ok(r.count(e)),
            (Sample::Raw(_), None) => Err(Error::invalid(
                "an event definition is required to count raw values",
            )),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sample::Counts(c) => c.trials as usize,
            Sample::Raw(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Factual and counterfactual data in matching representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPair {
    factual: Sample,
    counterfactual: Sample,
}

impl ScenarioPair {
    pub fn new(factual: Sample, counterfactual: Sample) -> Result<Self> {
        match (&factual, &counterfactual) {
            (Sample::Counts(_), Sample::Counts(_)) | (Sample::Raw(_), Sample::Raw(_)) => Ok(Self {
                factual,
                counterfactual,
            }),
            _ => Err(Error::invalid(
                "factual and counterfactual must use the same representation",
            )),
        }
    }

    /// Shorthand for the counts-only workflow.
    pub fn from_counts(y_f: u64, n_f: u64, y_c: u64, n_c: u64) -> Result<Self> {
        Ok(Self {
            factual: Sample::Counts(BinomialCount::new(y_f, n_f)?),
            counterfactual: Sample::Counts(BinomialCount::new(y_c, n_c)?),
        })
    }

    pub fn from_raw(factual: RawSample, counterfactual: RawSample) -> Self {
        Self {
            factual: Sample::Raw(factual),
            counterfactual: Sample::Raw(counterfactual),
        }
    }

    pub fn factual(&self) -> &Sample {
        &self.factual
    }

    pub fn counterfactual(&self) -> &Sample {
        &self.counterfactual
    }

    /// Reduces both sides to counts (the raw case needs an event definition).
    pub fn counts(&self, event: Option<&EventDefinition>) -> Result<CountPair> {
        Ok(CountPair {
            factual: self.factual.count(event)?,
            counterfactual: self.counterfactual.count(event)?,
        })
    }
}

/// Factual and counterfactual counts, the sufficient statistic for the binomial methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountPair {
    pub factual: BinomialCount,
    pub counterfactual: BinomialCount,
}

impl CountPair {
    pub fn new(y_f: u64, n_f: u64, y_c: u64, n_c: u64) -> Result<Self> {
        Ok(Self {
            factual: BinomialCount::new(y_f, n_f)?,
            counterfactual: BinomialCount::new(y_c, n_c)?,
        })
    }

    pub fn y_f(&self) -> u64 {
        self.factual.events
    }

    pub fn n_f(&self) -> u64 {
        self.factual.trials
    }

    pub fn y_c(&self) -> u64 {
        self.counterfactual.events
    }

    pub fn n_c(&self) -> u64 {
        self.counterfactual.trials
    }

    /// Counterfactual and factual exchanged; the risk ratio becomes its reciprocal.
    pub fn swapped(&self) -> Self {
        Self {
            factual: self.counterfactual,
            counterfactual: self.factual,
        }
    }

    pub fn risk_ratio(&self) -> ExtReal {
        risk_ratio_estimate(self.factual.proportion(), self.counterfactual.proportion())
    }
}

impl TryFrom<&ScenarioPair> for CountPair {
    type Error = Error;

    fn try_from(pair: &ScenarioPair) -> Result<Self> {
        pair.counts(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    #[default]
    Upper,
    Lower,
}

impl Tail {
    /// Maps a value so that the event is an upper-tail exceedance.
    pub fn orient(self, x: f64) -> f64 {
        match self {
            Tail::Upper => x,
            Tail::Lower => -x,
        }
    }
}

impl FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upper" | "above" | "high" => Ok(Tail::Upper),
            "lower" | "below" | "low" => Ok(Tail::Lower),
            other => Err(Error::invalid(format!("unknown tail {other:?}"))),
        }
    }
}

/// An event `R > c` (upper tail) or `R < c` (lower tail).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventDefinition {
    cutoff: f64,
    tail: Tail,
}

impl EventDefinition {
    pub fn new(cutoff: f64, tail: Tail) -> Result<Self> {
        if !cutoff.is_finite() {
            return Err(Error::invalid(format!(
                "cutoff must be finite, got {cutoff}"
            )));
        }
        Ok(Self { cutoff, tail })
    }

    pub fn upper(cutoff: f64) -> Result<Self> {
        Self::new(cutoff, Tail::Upper)
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// Cutoff after orientation, i.e. the event is `oriented value > oriented cutoff`.
    pub fn oriented_cutoff(&self) -> f64 {
        self.tail.orient(self.cutoff)
    }

    pub fn occurs(&self, x: f64) -> bool {
        self.tail.orient(x) > self.oriented_cutoff()
    }
}

/// Which bounds an interval reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `(lower, inf)`
    LowerOneSided,
    /// `(0, upper)`
    UpperOneSided,
    #[default]
    TwoSided,
}

impl Side {
    /// Level of the two-sided interval whose endpoint(s) realise this side.
    ///
    /// A one-sided `1 - a` bound is the matching endpoint of the two-sided
    /// `1 - 2a` interval, so each tail carries `a` in either case.
    pub fn two_sided_level(self, level: f64) -> f64 {
        match self {
            Side::TwoSided => level,
            Side::LowerOneSided | Side::UpperOneSided => 2.0 * level - 1.0,
        }
    }

    /// Probability in each tail for the requested level.
    pub fn tail_alpha(self, level: f64) -> f64 {
        match self {
            Side::TwoSided => (1.0 - level) / 2.0,
            Side::LowerOneSided | Side::UpperOneSided => 1.0 - level,
        }
    }

    pub fn wants_lower(self) -> bool {
        !matches!(self, Side::UpperOneSided)
    }

    pub fn wants_upper(self) -> bool {
        !matches!(self, Side::LowerOneSided)
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "two_sided" | "two" | "both" => Ok(Side::TwoSided),
            "lower" | "lower_one_sided" => Ok(Side::LowerOneSided),
            "upper" | "upper_one_sided" => Ok(Side::UpperOneSided),
            other => Err(Error::invalid(format!("unknown side {other:?}"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::LowerOneSided => "lower",
            Side::UpperOneSided => "upper",
            Side::TwoSided => "two-sided",
        })
    }
}

/// Interval construction methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Delta,
    Lrt,
    Koopman,
    Wilson,
    WangShan,
    BootNormal,
    BootPercentile,
    BootBasic,
    BootStudentized,
    BootBca,
    EvaLrt,
    EvaDelta,
    TimeAveragedDelta,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Delta,
        Method::Lrt,
        Method::Koopman,
        Method::Wilson,
        Method::WangShan,
        Method::BootNormal,
        Method::BootPercentile,
        Method::BootBasic,
        Method::BootStudentized,
        Method::BootBca,
        Method::EvaLrt,
        Method::EvaDelta,
        Method::TimeAveragedDelta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Delta => "delta",
            Method::Lrt => "lrt",
            Method::Koopman => "koopman",
            Method::Wilson => "wilson",
            Method::WangShan => "wang-shan",
            Method::BootNormal => "boot-normal",
            Method::BootPercentile => "boot-percentile",
            Method::BootBasic => "boot-basic",
            Method::BootStudentized => "boot-studentized",
            Method::BootBca => "boot-bca",
            Method::EvaLrt => "eva-lrt",
            Method::EvaDelta => "eva-delta",
            Method::TimeAveragedDelta => "time-averaged-delta",
        }
    }

    pub fn is_bootstrap(self) -> bool {
        matches!(
            self,
            Method::BootNormal
                | Method::BootPercentile
                | Method::BootBasic
                | Method::BootStudentized
                | Method::BootBca
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        let key = match key.as_str() {
            "boot-t" | "bootstrap-t" => "boot-studentized",
            "wangshan" => "wang-shan",
            "lr" => "lrt",
            other => other,
        };
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

/// A confidence interval for the risk ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioInterval {
    pub estimate: ExtReal,
    pub lower: ExtReal,
    pub upper: ExtReal,
    pub level: f64,
    pub side: Side,
    pub method: Method,
    pub diagnostics: BTreeMap<String, f64>,
}

impl RatioInterval {
    /// Builds an interval from the endpoints of the underlying two-sided
    /// construction, replacing the unused endpoint by `0` or `inf` per `side`.
    pub fn from_two_sided(
        method: Method,
        estimate: ExtReal,
        lower: ExtReal,
        upper: ExtReal,
        level: f64,
        side: Side,
    ) -> Self {
        let lower = if side.wants_lower() {
            lower
        } else {
            ExtReal::ZERO
        };
        let upper = if side.wants_upper() {
            upper
        } else {
            ExtReal::PosInf
        };
        Self {
            estimate,
            lower,
            upper,
            level,
            side,
            method,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    /// True when `rr` lies in the closed interval.
    pub fn contains(&self, rr: f64) -> bool {
        let x = ExtReal::Finite(rr);
        self.lower <= x && x <= self.upper
    }
}

/// Point estimate of the risk ratio `pF / pC` on the extended half-line.
pub fn risk_ratio_estimate(p_f: f64, p_c: f64) -> ExtReal {
    match (p_f == 0.0, p_c == 0.0) {
        (true, true) => ExtReal::Undefined,
        (false, true) => ExtReal::PosInf,
        (true, false) => ExtReal::ZERO,
        (false, false) => ExtReal::Finite(p_f / p_c),
    }
}

/// Validates a confidence level.
pub(crate) fn check_level(level: f64) -> Result<()> {
    if level.is_finite() && level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {level}"
        )))
    }
}

/// Validates a level/side combination; one-sided levels must exceed 1/2.
pub(crate) fn check_level_side(level: f64, side: Side) -> Result<()> {
    check_level(level)?;
    if side != Side::TwoSided && level <= 0.5 {
        return Err(Error::invalid(format!(
            "one-sided level must exceed 0.5, got {level}"
        )));
    }
    Ok(())
}
