//! Event-probability estimators for a single scenario.

use serde::{Deserialize, Serialize};

use crate::domain::{EventDefinition, RawSample, Sample};
use crate::error::{Error, Result};
use crate::special::normal_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    Nonparametric,
    ParametricNormal,
    Eva,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub n_effective: usize,
    pub source: EstimateSource,
    /// Free-form caveats, e.g. extrapolation outside the fitted region.
    pub warnings: Vec<String>,
}

impl ProbabilityEstimate {
    pub(crate) fn new(value: f64, n_effective: usize, source: EstimateSource) -> Self {
        Self {
            value,
            n_effective,
            source,
            warnings: Vec::new(),
        }
    }
}

/// Proportion of members in which the event occurs.
pub fn estimate_nonparametric(sample: &Sample, event: &EventDefinition) -> ProbabilityEstimate {
    let count = match sample {
        Sample::Counts(c) => *c,
        Sample::Raw(r) => r.count(event),
    };
    ProbabilityEstimate::new(
        count.proportion(),
        count.trials() as usize,
        EstimateSource::Nonparametric,
    )
}

/// Tail mass beyond the cutoff of a normal fitted by sample mean and
/// unbiased (`n - 1`) variance.
pub fn estimate_parametric_normal(
    sample: &RawSample,
    event: &EventDefinition,
) -> Result<ProbabilityEstimate> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::invalid(
            "parametric normal fit needs at least two values",
        ));
    }
    let values = sample.oriented(event.tail());
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate("sample variance is zero".into()));
    }
    let z = (event.oriented_cutoff() - mean) / var.sqrt();
    // Clamp into the open unit interval; the normal tail never reaches 0 or 1.
    let p = normal_sf(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    Ok(ProbabilityEstimate::new(
        p,
        n,
        EstimateSource::ParametricNormal,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BinomialCount, Tail};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn raw(v: &[f64]) -> RawSample {
        RawSample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn counts_give_table_proportion() {
        let s = Sample::Counts(BinomialCount::new(129, 400).unwrap());
        let e = EventDefinition::upper(1.5).unwrap();
        assert_eq!(estimate_nonparametric(&s, &e).value, 0.3225);
    }

    #[test]
    fn raw_counting() {
        let e = EventDefinition::upper(2.5).unwrap();
        let p = estimate_nonparametric(&Sample::Raw(raw(&[1.0, 2.0, 3.0, 4.0])), &e);
        assert_eq!(p.value, 0.5);
        assert_eq!(p.source, EstimateSource::Nonparametric);
        let none = estimate_nonparametric(&Sample::Raw(raw(&[1.0, 2.0])), &e);
        assert_eq!(none.value, 0.0);
    }

    #[test]
    fn normal_at_mean_is_half() {
        let e = EventDefinition::upper(2.0).unwrap();
        let p = estimate_parametric_normal(&raw(&[1.0, 2.0, 3.0]), &e).unwrap();
        assert!((p.value - 0.5).abs() < 1e-15);
        let e0 = EventDefinition::upper(0.0).unwrap();
        let p = estimate_parametric_normal(&raw(&[-1.0, 1.0]), &e0).unwrap();
        assert!((p.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lower_tail_mirrors_upper() {
        let s = raw(&[0.1, 0.7, 1.3, 2.2, 2.9]);
        let up = estimate_parametric_normal(&s, &EventDefinition::new(2.0, Tail::Upper).unwrap())
            .unwrap();
        let neg = raw(&s.values().iter().map(|v| -v).collect::<Vec<_>>());
        let low =
            estimate_parametric_normal(&neg, &EventDefinition::new(-2.0, Tail::Lower).unwrap())
                .unwrap();
        assert!((up.value - low.value).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let e = EventDefinition::upper(0.0).unwrap();
        assert!(matches!(
            estimate_parametric_normal(&raw(&[1.0, 1.0, 1.0]), &e),
            Err(Error::Degenerate(_))
        ));
        assert!(estimate_parametric_normal(&raw(&[1.0]), &e).is_err());
    }

    #[test]
    fn far_cutoff_is_positive() {
        let e = EventDefinition::upper(10.0).unwrap();
        let p = estimate_parametric_normal(&raw(&[-1.0, 0.0, 1.0]), &e).unwrap();
        assert!(p.value > 0.0 && p.value < 1e-15);
    }

    /// Independent check of the fitted tail mass: Simpson quadrature of the
    /// fitted normal density from the cutoff out to 12 standard deviations.
    #[test]
    fn seeded_normal_fit_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = raw(&v);
        let c = 1.6449;
        let p = estimate_parametric_normal(&s, &EventDefinition::upper(c).unwrap()).unwrap();

        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let density = |x: f64| {
            (-(x - mean).powi(2) / (2.0 * sd * sd)).exp()
                / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        let (a, b) = (c, mean + 12.0 * sd);
        let m = 20_000;
        let h = (b - a) / m as f64;
        let mut acc = density(a) + density(b);
        for i in 1..m {
            acc += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = acc * h / 3.0;
        assert!((p.value - quad).abs() < 1e-10, "{} vs {}", p.value, quad);
        assert!((p.value - 0.05).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut v in prop::collection::vec(-5.0f64..5.0, 1..40), c in -5.0f64..5.0) {
            let e = EventDefinition::upper(c).unwrap();
            let a = estimate_nonparametric(&Sample::Raw(raw(&v)), &e).value;
            v.reverse();
            let k = v.len() / 3;
            v.rotate_left(k);
            let b = estimate_nonparametric(&Sample::Raw(raw(&v)), &e).value;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn monotone_in_cutoff(v in prop::collection::vec(-5.0f64..5.0, 2..40), c in -5.0f64..5.0, d in 0.0f64..3.0) {
            let s = raw(&v);
            let lo = EventDefinition::upper(c).unwrap();
            let hi = EventDefinition::upper(c + d).unwrap();
            prop_assert!(estimate_nonparametric(&Sample::Raw(s.clone()), &hi).value
                <= estimate_nonparametric(&Sample::Raw(s.clone()), &lo).value);
            if let (Ok(a), Ok(b)) = (estimate_parametric_normal(&s, &lo), estimate_parametric_normal(&s, &hi)) {
                prop_assert!(b.value <= a.value);
                prop_assert!(a.value > 0.0 && a.value < 1.0);
            }
        }
    }
}
