//! Relay streams checked against a direct reading of the detection rules.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use mtdc_sim::protection::{dmr_vote, Detection, DetectorConfig, DetectorKind, Relay};
use mtdc_sim::scenario::sample_time;

const DT: f64 = 10e-6;

type CaseResult = Result<(), TestCaseError>;

pub fn cfg() -> DetectorConfig {
    DetectorConfig::default()
}

/// Piecewise-constant stream: `baseline` for the first 10 ms, then each
/// `(samples, level)` segment in turn.
pub fn stream(baseline: f64, segments: &[(usize, f64)]) -> Vec<(f64, f64)> {
    let mut levels = vec![baseline; 1000];
    for &(n, level) in segments {
        levels.extend(std::iter::repeat_n(level, n));
    }
    levels
        .into_iter()
        .enumerate()
        .map(|(k, i)| (sample_time(k, DT), i))
        .collect()
}

pub struct Expected {
    pub threshold: Option<f64>,
    pub direction: Option<f64>,
    pub trip: Option<f64>,
}

pub fn expected(samples: &[(f64, f64)], c: &DetectorConfig) -> Expected {
    let threshold = samples
        .iter()
        .find(|s| s.1.abs() > c.threshold)
        .map(|s| s.0);
    let t0 = samples[0].0;
    let in_window = |t: f64| t - t0 < c.baseline_window - 1e-12;
    let pre: Vec<f64> = samples
        .iter()
        .filter(|s| in_window(s.0))
        .map(|s| s.1)
        .collect();
    let mean = pre.iter().sum::<f64>() / pre.len() as f64;
    let direction = if mean.abs() < c.noise_floor {
        None
    } else {
        samples
            .iter()
            .filter(|s| !in_window(s.0))
            .find(|s| s.1.abs() > c.noise_floor && s.1.signum() != mean.signum())
            .map(|s| s.0)
    };
    let trip = match (threshold, direction) {
        (Some(a), Some(b)) if (a - b).abs() <= c.coincidence_window => Some(a.max(b)),
        _ => None,
    };
    Expected {
        threshold,
        direction,
        trip,
    }
}

pub fn relay_trip(samples: &[(f64, f64)], c: &DetectorConfig) -> Option<f64> {
    let mut relay = Relay::new(4, *c);
    let mut out = None;
    for &(t, i) in samples {
        let (_, d) = relay.sample(t, i).unwrap();
        if let Some(d) = d {
            assert!(out.is_none(), "relay decided twice");
            let [a, b] = d.contributing;
            assert_eq!(d.decided_at, a.fired_at.max(b.fired_at));
            out = Some(d.decided_at);
        }
    }
    out
}

pub fn segments(levels: impl Strategy<Value = f64>) -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((1usize..400, levels), 0..8)
}

fn det(detector: DetectorKind, fired_at: f64) -> Detection {
    Detection {
        detector,
        fired_at,
        line: 4,
        current: 0.0,
    }
}

pub fn arbitrary_stream(baseline: f64, segs: &[(usize, f64)]) -> CaseResult {
    let c = cfg();
    let s = stream(baseline, segs);
    prop_assert_eq!(relay_trip(&s, &c), expected(&s, &c).trip);
    Ok(())
}

pub fn arbitrary_cases() -> impl Strategy<Value = (f64, Vec<(usize, f64)>)> {
    (-1000.0f64..1000.0, segments(-4000.0f64..4000.0))
}

/// The current grows past the threshold but never reverses.
pub fn threshold_alone(baseline: f64, segs: &[(usize, f64)], negative: bool) -> CaseResult {
    let sign = if negative { -1.0 } else { 1.0 };
    let segs: Vec<(usize, f64)> = segs
        .iter()
        .map(|&(n, l)| (n, sign * l))
        .chain([(5, sign * 2000.0)])
        .collect();
    let c = cfg();
    let s = stream(sign * baseline, &segs);
    let e = expected(&s, &c);
    prop_assert!(e.threshold.is_some() && e.direction.is_none());
    prop_assert_eq!(relay_trip(&s, &c), None);
    Ok(())
}

pub fn threshold_alone_cases() -> impl Strategy<Value = (f64, Vec<(usize, f64)>, bool)> {
    (100.0f64..1000.0, segments(0.0f64..6000.0), any::<bool>())
}

/// The current reverses but stays under the threshold.
pub fn direction_alone(baseline: f64, segs: &[(usize, f64)]) -> CaseResult {
    let segs: Vec<(usize, f64)> = segs.iter().copied().chain([(5, -200.0)]).collect();
    let c = cfg();
    let s = stream(baseline, &segs);
    let e = expected(&s, &c);
    prop_assert!(e.threshold.is_none() && e.direction.is_some());
    prop_assert_eq!(relay_trip(&s, &c), None);
    Ok(())
}

pub fn direction_alone_cases() -> impl Strategy<Value = (f64, Vec<(usize, f64)>)> {
    (100.0f64..1000.0, segments(-1500.0f64..1500.0))
}

/// Reversal and overcurrent `gap` samples apart, inside the window: always
/// a trip, stamped at the later firing.
pub fn dual_within_window(
    baseline: f64,
    reversed: f64,
    overcurrent: f64,
    gap: usize,
    threshold_first: bool,
) -> CaseResult {
    let c = cfg();
    let segs = if threshold_first {
        // Same-sign overcurrent, then it swings through zero.
        vec![(gap.max(1), overcurrent), (50, -overcurrent)]
    } else if gap == 0 {
        vec![(50, -overcurrent)]
    } else {
        vec![(gap, -reversed), (50, -overcurrent)]
    };
    let s = stream(baseline, &segs);
    let e = expected(&s, &c);
    let (a, b) = (e.threshold.unwrap(), e.direction.unwrap());
    prop_assert!((a - b).abs() <= c.coincidence_window + 1e-12);
    let trip = relay_trip(&s, &c);
    prop_assert_eq!(trip, Some(a.max(b)));
    prop_assert_eq!(trip, e.trip);
    Ok(())
}

pub fn dual_within_cases() -> impl Strategy<Value = (f64, f64, f64, usize, bool)> {
    (
        100.0f64..1000.0,
        60.0f64..1500.0,
        1500.5f64..8000.0,
        0usize..=100,
        any::<bool>(),
    )
}

/// Firings further apart than the window never trip.
pub fn dual_outside_window(
    baseline: f64,
    reversed: f64,
    overcurrent: f64,
    gap: usize,
) -> CaseResult {
    let c = cfg();
    let s = stream(baseline, &[(gap, -reversed), (50, -overcurrent)]);
    prop_assert_eq!(relay_trip(&s, &c), None);
    Ok(())
}

pub fn dual_outside_cases() -> impl Strategy<Value = (f64, f64, f64, usize)> {
    (
        100.0f64..1000.0,
        60.0f64..1500.0,
        1500.5f64..8000.0,
        101usize..2000,
    )
}

pub fn voter(a: Option<f64>, b: Option<f64>, window: f64) -> CaseResult {
    let c = DetectorConfig {
        coincidence_window: window,
        ..cfg()
    };
    let th = a.map(|t| det(DetectorKind::Threshold, t));
    let dir = b.map(|t| det(DetectorKind::Direction, t));
    let d = dmr_vote(th.as_ref(), dir.as_ref(), &c).unwrap();
    match (a, b) {
        (Some(x), Some(y)) if (x - y).abs() <= window => {
            prop_assert_eq!(d.unwrap().decided_at, x.max(y));
        }
        _ => prop_assert!(d.is_none()),
    }
    Ok(())
}

pub fn voter_cases() -> impl Strategy<Value = (Option<f64>, Option<f64>, f64)> {
    (
        prop::option::of(0.0f64..1.0),
        prop::option::of(0.0f64..1.0),
        1e-4f64..1e-2,
    )
}
