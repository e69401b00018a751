//! Dual-modular-redundant fault detection.
//!
//! Each line end carries two independent detectors fed by the local current
//! (positive when flowing from the bus into the line): an overcurrent
//! threshold and a current-direction reversal detector. A trip needs both to
//! fire within the coincidence window.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Overcurrent pickup, amperes.
    pub threshold: f64,
    /// Pre-fault averaging interval for the direction baseline, seconds.
    pub baseline_window: f64,
    /// Currents at or below this magnitude carry no direction information.
    pub noise_floor: f64,
    /// Maximum separation of the two detections, seconds.
    pub coincidence_window: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            threshold: 1500.0,
            baseline_window: 5e-3,
            noise_floor: 50.0,
            coincidence_window: 1e-3,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_floor > 0.0 && self.noise_floor.is_finite()) {
            return Err(SimError::config("detector.noise_floor", "must be > 0"));
        }
        if !(self.threshold > self.noise_floor && self.threshold.is_finite()) {
            return Err(SimError::config(
                "detector.threshold",
                "must exceed the noise floor",
            ));
        }
        if !(self.coincidence_window > 0.0 && self.coincidence_window.is_finite()) {
            return Err(SimError::config(
                "detector.coincidence_window",
                "must be > 0",
            ));
        }
        if !(self.baseline_window > 0.0 && self.baseline_window.is_finite()) {
            return Err(SimError::config("detector.baseline_window", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Threshold,
    Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub detector: DetectorKind,
    pub fired_at: f64,
    pub line: usize,
    /// The sample that fired the detector.
    pub current: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripDecision {
    pub line: usize,
    pub decided_at: f64,
    /// Threshold detection, then direction detection.
    pub contributing: [Detection; 2],
}

fn check_order(time: f64, last: &mut f64) -> Result<()> {
    if !time.is_finite() || time < *last {
        return Err(SimError::StreamOrder {
            time,
            previous: *last,
        });
    }
    *last = time;
    Ok(())
}

/// Fires once, at the first sample whose magnitude exceeds the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDetector {
    pub line: usize,
    pub threshold: f64,
    last_time: f64,
    fired: Option<Detection>,
}

impl ThresholdDetector {
    pub fn new(line: usize, threshold: f64) -> Self {
        ThresholdDetector {
            line,
            threshold,
            last_time: f64::NEG_INFINITY,
            fired: None,
        }
    }

    pub fn fired(&self) -> Option<Detection> {
        self.fired
    }

    pub fn sample(&mut self, time: f64, current: f64) -> Result<Option<Detection>> {
        check_order(time, &mut self.last_time)?;
        if self.fired.is_some() || current.abs() <= self.threshold {
            return Ok(None);
        }
        self.fired = Some(Detection {
            detector: DetectorKind::Threshold,
            fired_at: time,
            line: self.line,
            current,
        });
        Ok(self.fired)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Still averaging.
    Collecting,
    Armed(f64),
    /// Pre-fault mean inside the noise floor.
    Disarmed,
}

/// Fires once, at the first sample whose sign differs from the baseline.
///
/// The baseline is the sign of the mean current over the first
/// `baseline_window` of the stream; nothing fires before that.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionDetector {
    pub line: usize,
    pub noise_floor: f64,
    pub baseline_window: f64,
    baseline: Baseline,
    start: Option<f64>,
    sum: f64,
    count: usize,
    last_time: f64,
    fired: Option<Detection>,
}

impl DirectionDetector {
    pub fn new(line: usize, noise_floor: f64, baseline_window: f64) -> Self {
        DirectionDetector {
            line,
            noise_floor,
            baseline_window,
            baseline: Baseline::Collecting,
            start: None,
            sum: 0.0,
            count: 0,
            last_time: f64::NEG_INFINITY,
            fired: None,
        }
    }

    pub fn baseline(&self) -> Baseline {
        self.baseline
    }

    pub fn fired(&self) -> Option<Detection> {
        self.fired
    }

    pub fn sample(&mut self, time: f64, current: f64) -> Result<Option<Detection>> {
        check_order(time, &mut self.last_time)?;
        let start = *self.start.get_or_insert(time);
        if self.baseline == Baseline::Collecting {
            if time - start < self.baseline_window - 1e-12 {
                self.sum += current;
                self.count += 1;
                return Ok(None);
            }
            let mean = if self.count == 0 {
                0.0
            } else {
                self.sum / self.count as f64
            };
            self.baseline = if mean.abs() < self.noise_floor {
                Baseline::Disarmed
            } else {
                Baseline::Armed(mean.signum())
            };
        }
        let Baseline::Armed(sign) = self.baseline else {
            return Ok(None);
        };
        if self.fired.is_some() || current.abs() <= self.noise_floor || current.signum() == sign {
            return Ok(None);
        }
        self.fired = Some(Detection {
            detector: DetectorKind::Direction,
            fired_at: time,
            line: self.line,
            current,
        });
        Ok(self.fired)
    }
}

/// Dual-modular-redundancy vote: trips iff both detections exist and lie
/// within the coincidence window; the decision takes the later firing time.
pub fn dmr_vote(
    threshold: Option<&Detection>,
    direction: Option<&Detection>,
    config: &DetectorConfig,
) -> Result<Option<TripDecision>> {
    let (Some(a), Some(b)) = (threshold, direction) else {
        return Ok(None);
    };
    if a.line != b.line {
        return Err(SimError::Wiring {
            first: a.line,
            second: b.line,
        });
    }
    if (a.fired_at - b.fired_at).abs() > config.coincidence_window {
        return Ok(None);
    }
    Ok(Some(TripDecision {
        line: a.line,
        decided_at: a.fired_at.max(b.fired_at),
        contributing: [*a, *b],
    }))
}

/// Both detectors of one line end plus the vote. Reads only its own current.
#[derive(Debug, Clone, PartialEq)]
pub struct Relay {
    pub line: usize,
    pub config: DetectorConfig,
    pub threshold: ThresholdDetector,
    pub direction: DirectionDetector,
    pub decision: Option<TripDecision>,
}

impl Relay {
    pub fn new(line: usize, config: DetectorConfig) -> Self {
        Relay {
            line,
            config,
            threshold: ThresholdDetector::new(line, config.threshold),
            direction: DirectionDetector::new(line, config.noise_floor, config.baseline_window),
            decision: None,
        }
    }

    /// Feeds one sample; returns the new detections and, the first time the
    /// vote passes, the trip decision.
    pub fn sample(
        &mut self,
        time: f64,
        current: f64,
    ) -> Result<(Vec<Detection>, Option<TripDecision>)> {
        let mut new = Vec::new();
        new.extend(self.threshold.sample(time, current)?);
        new.extend(self.direction.sample(time, current)?);
        if new.is_empty() || self.decision.is_some() {
            return Ok((new, None));
        }
        self.decision = dmr_vote(
            self.threshold.fired().as_ref(),
            self.direction.fired().as_ref(),
            &self.config,
        )?;
        Ok((new, self.decision))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(detector: DetectorKind, fired_at: f64) -> Detection {
        Detection {
            detector,
            fired_at,
            line: 4,
            current: 0.0,
        }
    }

    fn vote(a: f64, b: f64) -> Option<TripDecision> {
        let th = det(DetectorKind::Threshold, a);
        let dir = det(DetectorKind::Direction, b);
        dmr_vote(Some(&th), Some(&dir), &DetectorConfig::default()).unwrap()
    }

    #[test]
    fn close_detections_trip() {
        let trip = vote(0.0201, 0.0203).unwrap();
        assert_eq!(trip.line, 4);
        assert_eq!(trip.decided_at, 0.0203);
    }

    #[test]
    fn distant_detections_do_not_trip() {
        assert_eq!(vote(0.020, 0.025), None);
    }

    #[test]
    fn single_detector_does_not_trip() {
        let th = det(DetectorKind::Threshold, 0.02);
        assert_eq!(
            dmr_vote(Some(&th), None, &DetectorConfig::default()).unwrap(),
            None
        );
        assert_eq!(
            dmr_vote(None, Some(&th), &DetectorConfig::default()).unwrap(),
            None
        );
    }

    #[test]
    fn mixed_lines_are_a_wiring_error() {
        let th = det(DetectorKind::Threshold, 0.02);
        let mut dir = det(DetectorKind::Direction, 0.02);
        dir.line = 2;
        assert_eq!(
            dmr_vote(Some(&th), Some(&dir), &DetectorConfig::default()),
            Err(SimError::Wiring {
                first: 4,
                second: 2
            })
        );
    }

    #[test]
    fn threshold_ignores_steady_load() {
        let mut th = ThresholdDetector::new(1, 1500.0);
        for k in 0..1000 {
            assert!(th.sample(k as f64 * 1e-5, 357.0).unwrap().is_none());
        }
    }

    #[test]
    fn threshold_fires_at_crossing_sample() {
        let mut th = ThresholdDetector::new(1, 1500.0);
        let dt = 1e-5;
        let mut hit = None;
        for k in 0..100 {
            if let Some(d) = th.sample(k as f64 * dt, 100.0 * k as f64).unwrap() {
                hit.get_or_insert(d);
            }
        }
        assert_eq!(hit.unwrap().fired_at, 16.0 * dt);
    }

    fn direction_after_baseline(base: f64) -> DirectionDetector {
        let mut d = DirectionDetector::new(1, 50.0, 5e-3);
        for k in 0..=500 {
            assert!(d.sample(k as f64 * 1e-5, base).unwrap().is_none());
        }
        d
    }

    #[test]
    fn direction_constant_current_never_fires() {
        let mut d = direction_after_baseline(300.0);
        assert_eq!(d.baseline(), Baseline::Armed(1.0));
        for k in 501..2000 {
            assert!(d.sample(k as f64 * 1e-5, 300.0).unwrap().is_none());
        }
    }

    #[test]
    fn direction_fires_on_swing() {
        let mut d = direction_after_baseline(300.0);
        assert!(d.sample(0.006, 40.0).unwrap().is_none());
        assert!(d.sample(0.00601, -40.0).unwrap().is_none());
        let hit = d.sample(0.00602, -200.0).unwrap().unwrap();
        assert_eq!(hit.fired_at, 0.00602);
    }

    #[test]
    fn weak_baseline_disarms() {
        let mut d = direction_after_baseline(20.0);
        assert_eq!(d.baseline(), Baseline::Disarmed);
        assert!(d.sample(0.01, -5000.0).unwrap().is_none());
    }

    #[test]
    fn out_of_order_samples_rejected() {
        let mut th = ThresholdDetector::new(1, 1500.0);
        th.sample(1.0, 0.0).unwrap();
        assert!(matches!(
            th.sample(0.5, 0.0),
            Err(SimError::StreamOrder { .. })
        ));
        let mut d = DirectionDetector::new(1, 50.0, 5e-3);
        d.sample(1.0, 0.0).unwrap();
        assert!(matches!(
            d.sample(0.5, 0.0),
            Err(SimError::StreamOrder { .. })
        ));
    }

    #[test]
    fn relay_trips_on_reversal_and_overcurrent() {
        let mut r = Relay::new(4, DetectorConfig::default());
        let dt = 1e-5;
        let mut trip = None;
        for k in 0..3000 {
            let t = k as f64 * dt;
            let i = if k < 1000 {
                -150.0
            } else {
                -150.0 + 100.0 * (k - 1000) as f64
            };
            if let (_, Some(d)) = r.sample(t, i).unwrap() {
                trip = Some(d);
                break;
            }
        }
        let trip = trip.unwrap();
        assert!(
            (trip.decided_at - 1017.0 * dt).abs() < 1e-12,
            "{}",
            trip.decided_at
        );
        assert_eq!(trip.contributing[0].detector, DetectorKind::Threshold);
    }

    #[test]
    fn config_rules() {
        DetectorConfig::default().validate().unwrap();
        let mut c = DetectorConfig::default();
        c.noise_floor = 0.0;
        assert!(c.validate().is_err());
        c = DetectorConfig::default();
        c.threshold = 10.0;
        assert!(c.validate().is_err());
    }
}
