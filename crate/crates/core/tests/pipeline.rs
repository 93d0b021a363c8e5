use riskratio::bootstrap::{boot_interval, resample_pair, BootstrapConfig};
use riskratio::ratio_intervals::{delta_interval, koopman_interval, lrt_interval, wilson_interval};
use riskratio::{
    EventDefinition, ExtReal, Method, RatioInterval, RawSample, ScenarioPair, Side, Tail,
};

fn pair() -> ScenarioPair {
    let f: Vec<f64> = (0..200)
        .map(|i| (i as f64 * 0.37).sin() * 2.0 + 0.5)
        .collect();
    let c: Vec<f64> = (0..200).map(|i| (i as f64 * 0.53).cos() * 2.0).collect();
    ScenarioPair::from_raw(RawSample::new(f).unwrap(), RawSample::new(c).unwrap())
}

#[test]
fn raw_values_to_intervals() {
    let event = EventDefinition::new(1.5, Tail::Upper).unwrap();
    let counts = pair().counts(Some(&event)).unwrap();
    let rr = counts.risk_ratio().finite().unwrap();
    assert!(rr > 1.0);
    let intervals = [
        delta_interval(&counts, 0.9, Side::TwoSided).unwrap(),
        koopman_interval(&counts, 0.9, Side::TwoSided).unwrap(),
        lrt_interval(&counts, 0.9, Side::TwoSided).unwrap(),
        wilson_interval(&counts, 0.9, Side::TwoSided).unwrap(),
    ];
    for iv in &intervals {
        assert!(iv.contains(rr), "{:?} misses {rr}", iv.method);
    }
}

#[test]
fn lower_tail_swaps_roles() {
    let p = pair();
    let upper = p
        .counts(Some(&EventDefinition::new(-1.0, Tail::Upper).unwrap()))
        .unwrap();
    let lower = p
        .counts(Some(&EventDefinition::new(-1.0, Tail::Lower).unwrap()))
        .unwrap();
    assert_eq!(upper.y_f() + lower.y_f(), 200);
    assert_eq!(upper.y_c() + lower.y_c(), 200);
}

#[test]
fn bootstrap_on_raw_values_brackets_the_estimate() {
    let event = EventDefinition::upper(1.5).unwrap();
    let cfg = BootstrapConfig::new(2000, 3).unwrap();
    let dist = resample_pair(&pair(), Some(&event), &cfg).unwrap();
    let est = pair().counts(Some(&event)).unwrap().risk_ratio();
    for m in [Method::BootPercentile, Method::BootBasic, Method::BootBca] {
        let iv = boot_interval(m, &dist, 0.9, Side::TwoSided).unwrap();
        assert!(iv.lower <= est && est <= iv.upper, "{m:?}: {iv:?}");
    }
}

#[test]
fn intervals_survive_json() {
    let counts = riskratio::CountPair::new(43, 400, 0, 400).unwrap();
    let iv = lrt_interval(&counts, 0.9, Side::LowerOneSided).unwrap();
    assert_eq!(iv.upper, ExtReal::PosInf);
    let back: RatioInterval = serde_json::from_str(&serde_json::to_string(&iv).unwrap()).unwrap();
    assert_eq!(back, iv);
}
