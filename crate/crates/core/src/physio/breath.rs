//! Breath cycle segmentation with a Schmitt trigger, and deep-breath
//! counters for `ex:<signal>_<n>` subscriptions.

use serde::{Deserialize, Serialize};

use crate::script::DetectorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathThresholds {
    pub hi: f64,
    pub lo: f64,
    /// Minimum peak-to-trough amplitude of a deep cycle.
    pub deep: f64,
}

impl Default for BreathThresholds {
    fn default() -> Self {
        Self {
            hi: 0.6,
            lo: 0.4,
            deep: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreathPhase {
    Idle,
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathCycle {
    pub t_start: u64,
    pub t_end: u64,
    pub amplitude: f64,
}

impl BreathCycle {
    pub fn duration_ms(&self) -> u64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreathDetectorState {
    pub phase: BreathPhase,
    pub cycle_start: u64,
    pub cycle_min: f64,
    pub cycle_max: f64,
    pub thresholds: BreathThresholds,
    pub completed_cycles: Vec<BreathCycle>,
}

impl Default for BreathDetectorState {
    fn default() -> Self {
        Self::new(BreathThresholds::default())
    }
}

impl BreathDetectorState {
    pub fn new(thresholds: BreathThresholds) -> Self {
        assert!(thresholds.lo < thresholds.hi, "hysteresis band is empty");
        Self {
            phase: BreathPhase::Idle,
            cycle_start: 0,
            cycle_min: 0.0,
            cycle_max: 0.0,
            thresholds,
            completed_cycles: Vec::new(),
        }
    }

    fn restart(&mut self, t: u64, v: f64) {
        self.cycle_start = t;
        self.cycle_min = v;
        self.cycle_max = v;
    }

    /// Feeds one value. A cycle runs from one rise above `hi` to the next,
    /// with a dip below `lo` in between; it closes on that next rise.
    pub fn step(&mut self, t: u64, v: f64) -> Option<BreathCycle> {
        let v = v.clamp(0.0, 1.0);
        let BreathThresholds { hi, lo, .. } = self.thresholds;
        match self.phase {
            BreathPhase::Idle => {
                if v > hi {
                    self.phase = BreathPhase::Rising;
                    self.restart(t, v);
                }
                None
            }
            BreathPhase::Rising => {
                self.cycle_min = self.cycle_min.min(v);
                self.cycle_max = self.cycle_max.max(v);
                if v < lo {
                    self.phase = BreathPhase::Falling;
                }
                None
            }
            BreathPhase::Falling => {
                if v > hi {
                    let cycle = BreathCycle {
                        t_start: self.cycle_start,
                        t_end: t,
                        amplitude: self.cycle_max - self.cycle_min,
                    };
                    self.completed_cycles.push(cycle);
                    self.phase = BreathPhase::Rising;
                    self.restart(t, v);
                    return Some(cycle);
                }
                self.cycle_min = self.cycle_min.min(v);
                self.cycle_max = self.cycle_max.max(v);
                None
            }
        }
    }

    /// Drops cycles that ended before `t`.
    pub fn forget_before(&mut self, t: u64) {
        self.completed_cycles.retain(|c| c.t_end >= t);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorEvent {
    pub detector: DetectorSpec,
    pub source: String,
    pub t: u64,
}

/// Counts deep cycles for one armed `ex:` subscription; fires once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorCounter {
    pub spec: DetectorSpec,
    pub source: String,
    pub deep_cycles: u32,
    pub fired: bool,
}

impl DetectorCounter {
    pub fn new(spec: DetectorSpec, source: impl Into<String>) -> Self {
        Self {
            spec,
            source: source.into(),
            deep_cycles: 0,
            fired: false,
        }
    }

    pub fn update_counter(&mut self, cycle: &BreathCycle, deep_threshold: f64) -> Option<DetectorEvent> {
        if self.fired || cycle.amplitude < deep_threshold {
            return None;
        }
        self.deep_cycles += 1;
        if self.deep_cycles < self.spec.count {
            return None;
        }
        self.fired = true;
        Some(DetectorEvent {
            detector: self.spec.clone(),
            source: self.source.clone(),
            t: cycle.t_end,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_never_cycles() {
        let mut d = BreathDetectorState::default();
        for t in 0..1000 {
            assert!(d.step(t * 10, 0.5).is_none());
        }
    }

    #[test]
    fn square_wave_trace() {
        let mut d = BreathDetectorState::default();
        let out: Vec<_> = [(0, 0.1), (500, 0.9), (1000, 0.1), (1500, 0.9)]
            .into_iter()
            .filter_map(|(t, v)| d.step(t, v))
            .collect();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].t_end, 1500);
        assert_eq!(out[0].t_start, 500);
        assert!((out[0].amplitude - 0.8).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let mut d = BreathDetectorState::default();
        let out: Vec<_> = [(0, -3.0), (1, 7.0), (2, -1.0), (3, 2.0)]
            .into_iter()
            .filter_map(|(t, v)| d.step(t, v))
            .collect();
        assert_eq!(out[0].amplitude, 1.0);
    }

    fn cycle(amplitude: f64, t_end: u64) -> BreathCycle {
        BreathCycle {
            t_start: 0,
            t_end,
            amplitude,
        }
    }

    #[test]
    fn counter_fires_on_third_deep_cycle() {
        let spec: DetectorSpec = "breathVar_3".parse().unwrap();
        let mut c = DetectorCounter::new(spec, "bits");
        let fired: Vec<_> = [0.8, 0.3, 0.9, 0.75]
            .iter()
            .enumerate()
            .map(|(i, a)| c.update_counter(&cycle(*a, i as u64), 0.7).is_some())
            .collect();
        assert_eq!(fired, vec![false, false, false, true]);
        assert!(c.update_counter(&cycle(0.9, 9), 0.7).is_none());
        assert_eq!(c.deep_cycles, 3);
    }

    #[test]
    fn counter_of_one_fires_immediately() {
        let mut c = DetectorCounter::new("breath_1".parse().unwrap(), "bits");
        let ev = c.update_counter(&cycle(0.7, 42), 0.7).unwrap();
        assert_eq!(ev.t, 42);
    }

    #[test]
    fn shallow_cycles_never_fire() {
        let mut c = DetectorCounter::new("breath_1".parse().unwrap(), "bits");
        for i in 0..100 {
            assert!(c.update_counter(&cycle(0.69, i), 0.7).is_none());
        }
    }
}
