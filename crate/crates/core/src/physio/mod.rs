//! Physiological signals: the sensor wire format, breath and heart
//! detectors, the stress proxy, per-session registry and the simulator.

pub mod breath;
pub mod heart;
pub mod registry;
pub mod simulator;
pub mod stress;
pub mod wire;

pub use breath::{
    BreathCycle, BreathDetectorState, BreathPhase, BreathThresholds, DetectorCounter, DetectorEvent,
};
pub use heart::{HeartState, NonMonotonicBeat, HEART_WINDOW_MS};
pub use registry::{Reading, SignalRegistry};
pub use simulator::{simulate, simulate_to_vec, BadScenario, Scenario};
pub use stress::{stress_index, StressParams};
pub use wire::{decode_sample, encode_sample, MalformedSample, Sample};

/// Decodes wire lines into a registry, counting what had to be dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingest {
    pub registry: SignalRegistry,
    pub dropped: u64,
}

impl Ingest {
    pub fn new(registry: SignalRegistry) -> Self {
        Self {
            registry,
            dropped: 0,
        }
    }

    pub fn ingest_line(&mut self, line: &str) -> Result<Vec<DetectorEvent>, MalformedSample> {
        match decode_sample(line) {
            Ok(sample) => Ok(self.registry.ingest(&sample)),
            Err(e) => {
                self.dropped += 1;
                log::warn!("dropping sensor line: {e}");
                Err(e)
            }
        }
    }
}
