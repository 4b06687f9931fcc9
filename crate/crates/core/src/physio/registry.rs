//! Per-session signal state: latest readings, breath detectors, heart
//! window, armed counters, stress index and forced simulator flags.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::breath::{BreathDetectorState, BreathThresholds, DetectorCounter, DetectorEvent};
use super::heart::HeartState;
use super::stress::{stress_index, StressParams};
use super::wire::Sample;
use crate::runtime::GameTime;
use crate::script::DetectorSpec;

/// Window used to estimate breathing rate.
pub const BREATH_RATE_WINDOW_MS: u64 = 30_000;
/// Detector every registry runs on the raw `breath` signal.
pub const BASE_BREATH: &str = "breath";
pub const SIM_PREFIX: &str = "sim.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reading {
    Value(f64),
    Event(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRegistry {
    latest: BTreeMap<(String, String), Reading>,
    /// detector name -> input signal
    bindings: BTreeMap<String, String>,
    /// (detector name, source) -> state
    detectors: BTreeMap<(String, String), BreathDetectorState>,
    pub heart: HeartState,
    counters: Vec<DetectorCounter>,
    stress: f64,
    relaxed_since: Option<u64>,
    forced: BTreeMap<String, bool>,
    params: StressParams,
    thresholds: BreathThresholds,
    warned_predicates: BTreeSet<String>,
    warnings: u64,
}

impl Default for SignalRegistry {
    fn default() -> Self {
        Self::new(StressParams::default(), BreathThresholds::default())
    }
}

impl SignalRegistry {
    pub fn new(params: StressParams, thresholds: BreathThresholds) -> Self {
        let mut bindings = BTreeMap::new();
        bindings.insert(BASE_BREATH.to_string(), BASE_BREATH.to_string());
        Self {
            latest: BTreeMap::new(),
            bindings,
            detectors: BTreeMap::new(),
            heart: HeartState::default(),
            counters: Vec::new(),
            stress: 0.0,
            relaxed_since: None,
            forced: BTreeMap::new(),
            params,
            thresholds,
            warned_predicates: BTreeSet::new(),
            warnings: 0,
        }
    }

    /// Binds a detector variable (e.g. `breathVar`) to the signal it reads.
    pub fn bind_detector(&mut self, detector: &str, signal: &str) {
        self.bindings
            .entry(detector.to_string())
            .or_insert_with(|| signal.to_string());
    }

    /// Starts a fresh counter for an `ex:` subscription. A detector name
    /// with no binding reads the signal of the same name.
    pub fn arm_counter(&mut self, spec: &DetectorSpec, source: &str) {
        self.bind_detector(&spec.signal, &spec.signal);
        self.counters
            .retain(|c| !(c.spec == *spec && c.source == source));
        self.counters.push(DetectorCounter::new(spec.clone(), source));
    }

    pub fn clear_counters(&mut self) {
        self.counters.clear();
    }

    pub fn counters(&self) -> &[DetectorCounter] {
        &self.counters
    }

    pub fn stress(&self) -> f64 {
        self.stress
    }

    pub fn latest(&self, src: &str, sig: &str) -> Option<&Reading> {
        self.latest.get(&(src.to_string(), sig.to_string()))
    }

    pub fn forced_flag(&self, key: &str) -> Option<bool> {
        self.forced.get(key).copied()
    }

    pub fn detector(&self, name: &str, src: &str) -> Option<&BreathDetectorState> {
        self.detectors.get(&(name.to_string(), src.to_string()))
    }

    /// Non-fatal anomalies seen so far (non-monotonic beats, bad flags).
    pub fn warning_count(&self) -> u64 {
        self.warnings
    }

    pub fn params(&self) -> &StressParams {
        &self.params
    }

    /// Breaths per minute over the last 30 s of base-detector cycles.
    pub fn breathing_rate(&self, now: u64) -> Option<f64> {
        let from = now.saturating_sub(BREATH_RATE_WINDOW_MS);
        let durations: Vec<u64> = self
            .detectors
            .iter()
            .filter(|((name, _), _)| name == BASE_BREATH)
            .flat_map(|(_, d)| d.completed_cycles.iter())
            .filter(|c| c.t_end >= from && c.t_end <= now)
            .map(|c| c.duration_ms())
            .collect();
        if durations.is_empty() {
            return None;
        }
        let mean = durations.iter().sum::<u64>() as f64 / durations.len() as f64;
        (mean > 0.0).then(|| 60_000.0 / mean)
    }

    pub fn observe_stress(&mut self, s: f64, t: u64) {
        self.stress = s.clamp(0.0, 1.0);
        if self.stress <= self.params.threshold_relaxed {
            self.relaxed_since.get_or_insert(t);
        } else {
            self.relaxed_since = None;
        }
    }

    /// Applies one decoded sample; returns the detector events it caused.
    pub fn ingest(&mut self, sample: &Sample) -> Vec<DetectorEvent> {
        let mut events = Vec::new();
        let t = sample.t;

        if let Some(flag) = sample.sig.strip_prefix(SIM_PREFIX) {
            let value = match (&sample.v, sample.ev.as_deref()) {
                (Some(v), _) => Some(*v >= 0.5),
                (None, Some("true")) => Some(true),
                (None, Some("false")) => Some(false),
                _ => None,
            };
            match value {
                Some(b) => {
                    self.forced.insert(format!("{SIM_PREFIX}{flag}"), b);
                }
                None => {
                    log::warn!("ignoring non-boolean simulator flag {}", sample.sig);
                    self.warnings += 1;
                }
            }
        }

        let reading = match (&sample.v, &sample.ev) {
            (Some(v), _) => Reading::Value(*v),
            (None, Some(ev)) => Reading::Event(ev.clone()),
            (None, None) => return events,
        };
        self.latest
            .insert((sample.src.clone(), sample.sig.clone()), reading);

        if let Some(v) = sample.v {
            let names: Vec<String> = self
                .bindings
                .iter()
                .filter(|(_, signal)| **signal == sample.sig)
                .map(|(name, _)| name.clone())
                .collect();
            for name in names {
                let detector = self
                    .detectors
                    .entry((name.clone(), sample.src.clone()))
                    .or_insert_with(|| BreathDetectorState::new(self.thresholds));
                let Some(cycle) = detector.step(t, v) else {
                    continue;
                };
                detector.forget_before(t.saturating_sub(BREATH_RATE_WINDOW_MS));
                let deep = self.thresholds.deep;
                for counter in self
                    .counters
                    .iter_mut()
                    .filter(|c| c.spec.signal == name && c.source == sample.src)
                {
                    events.extend(counter.update_counter(&cycle, deep));
                }
            }
        }

        if sample.sig == "heart" && sample.ev.as_deref() == Some("beat") {
            if let Err(e) = self.heart.push_beat(t) {
                log::warn!("{e}");
                self.warnings += 1;
            }
        }

        let hr = self.heart.heart_rate(t).unwrap_or(self.params.hr_rest);
        let br = self.breathing_rate(t).unwrap_or(self.params.br_rest);
        let s = stress_index(hr, br, &self.params);
        self.observe_stress(s, t);
        events
    }

    /// Evaluates a named predicate. `sim.<flag>` reads the forced-flag
    /// table; a forced `sim.stressed`/`sim.relaxed` also overrides the
    /// measured predicate of the same name. Unknown names are false.
    pub fn eval_predicate(&mut self, name: &str, day: &GameTime, now: u64) -> bool {
        if name.starts_with(SIM_PREFIX) {
            return self.forced_flag(name).unwrap_or(false);
        }
        let forced = self.forced_flag(&format!("{SIM_PREFIX}{name}"));
        match name {
            "stressed" => {
                forced.unwrap_or(self.stress >= self.params.threshold_stressed)
            }
            "relaxed" => forced.unwrap_or_else(|| {
                self.relaxed_since
                    .is_some_and(|since| now.saturating_sub(since) >= self.params.relaxed_hold_ms)
            }),
            "night" => forced.unwrap_or(day.night),
            "day" => forced.unwrap_or(!day.night),
            _ => {
                if self.warned_predicates.insert(name.to_string()) {
                    log::warn!("unknown predicate `{name}` evaluates to false");
                    self.warnings += 1;
                }
                false
            }
        }
    }

    pub fn warned_predicates(&self) -> impl Iterator<Item = &str> {
        self.warned_predicates.iter().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(night: bool) -> GameTime {
        GameTime::from_fraction(if night { 0.9 } else { 0.5 })
    }

    #[test]
    fn stressed_threshold() {
        let mut r = SignalRegistry::default();
        r.observe_stress(0.9, 0);
        assert!(r.eval_predicate("stressed", &day(false), 0));
        r.observe_stress(0.49, 10);
        assert!(!r.eval_predicate("stressed", &day(false), 10));
    }

    #[test]
    fn relaxed_needs_hold() {
        let mut r = SignalRegistry::default();
        r.observe_stress(0.2, 1000);
        r.observe_stress(0.2, 3000);
        assert!(!r.eval_predicate("relaxed", &day(false), 5000));
        assert!(r.eval_predicate("relaxed", &day(false), 6000));
        r.observe_stress(0.5, 6500);
        assert!(!r.eval_predicate("relaxed", &day(false), 20_000));
    }

    #[test]
    fn day_and_night() {
        let mut r = SignalRegistry::default();
        assert!(!r.eval_predicate("night", &day(false), 0));
        assert!(r.eval_predicate("day", &day(false), 0));
        assert!(r.eval_predicate("night", &day(true), 0));
    }

    #[test]
    fn forced_flags() {
        let mut r = SignalRegistry::default();
        assert!(!r.eval_predicate("sim.stressed", &day(false), 0));
        r.ingest(&Sample::event(0, "sim", "sim.stressed", "true"));
        assert!(r.eval_predicate("sim.stressed", &day(false), 0));
        assert!(r.eval_predicate("stressed", &day(false), 0));
        r.ingest(&Sample::event(5, "sim", "sim.stressed", "false"));
        assert!(!r.eval_predicate("stressed", &day(false), 5));
    }

    #[test]
    fn unknown_predicate_warns_once() {
        let mut r = SignalRegistry::default();
        assert!(!r.eval_predicate("moonlit", &day(false), 0));
        assert!(!r.eval_predicate("moonlit", &day(false), 1));
        assert_eq!(r.warned_predicates().collect::<Vec<_>>(), vec!["moonlit"]);
        assert_eq!(r.warning_count(), 1);
    }

    #[test]
    fn counters_filter_by_source() {
        let mut r = SignalRegistry::default();
        r.bind_detector("breathVar", "breath");
        r.arm_counter(&"breathVar_1".parse().unwrap(), "bits");
        let square = [(0, 0.1), (500, 0.9), (1000, 0.05), (1500, 0.95)];
        for (t, v) in square {
            assert!(r.ingest(&Sample::value(t, "other", "breath", v)).is_empty());
        }
        let fired: Vec<_> = square
            .iter()
            .flat_map(|&(t, v)| r.ingest(&Sample::value(t, "bits", "breath", v)))
            .collect();
        assert_eq!(fired.len(), 1);
        assert_eq!(fired[0].source, "bits");
        assert_eq!(fired[0].t, 1500);
    }

    #[test]
    fn heart_feeds_stress() {
        let mut r = SignalRegistry::default();
        for k in 0..=10u64 {
            r.ingest(&Sample::event(k * 600, "bits", "heart", "beat"));
        }
        // 100 bpm, breathing at rest -> 0.5
        assert!((r.stress() - 0.5).abs() < 1e-12);
        assert!(r.eval_predicate("stressed", &day(false), 6000));
        r.ingest(&Sample::event(6000, "bits", "heart", "beat"));
        assert_eq!(r.warning_count(), 1);
    }
}
