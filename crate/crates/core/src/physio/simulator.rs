//! Deterministic sensor simulator driven by a JSON-lines scenario.
//!
//! ```text
//! {"at":0,"cmd":"set","key":"heart.bpm","val":75}
//! {"at":0,"cmd":"set","key":"sim.stressed","val":true}
//! {"at":10000,"cmd":"deepbreath","n":3}
//! {"at":30000,"cmd":"end"}
//! ```
//!
//! Breath is sampled every 100 ms as `0.5 + A·sin(2π·phase)`, the phase
//! advancing at `rate` cycles per minute. Heart beats are emitted at
//! `60000/bpm` intervals plus optional seeded jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

use super::wire::Sample;

pub const SIM_SOURCE: &str = "bits";
pub const SIM_FLAG_SOURCE: &str = "sim";
pub const BREATH_PERIOD_MS: u64 = 100;
pub const DEFAULT_BREATH_RATE: f64 = 12.0;
pub const DEFAULT_AMPLITUDE: f64 = 0.35;
pub const DEEP_AMPLITUDE: f64 = 0.45;
pub const DEFAULT_BPM: f64 = 70.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bad scenario at line {line}: {reason}")]
pub struct BadScenario {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SetNumber { key: String, val: f64 },
    SetFlag { key: String, val: bool },
    DeepBreath { n: u32 },
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCommand {
    pub at: u64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub commands: Vec<ScenarioCommand>,
}

#[derive(Deserialize)]
struct RawCommand {
    at: u64,
    cmd: String,
    key: Option<String>,
    val: Option<Value>,
    n: Option<u32>,
}

const NUMERIC_KEYS: [&str; 4] = ["heart.bpm", "heart.jitter", "breath.rate", "breath.amplitude"];

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, BadScenario> {
        let mut commands = Vec::new();
        let mut last_at = 0;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let bad = |reason: String| BadScenario {
                line: line_no,
                reason,
            };
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawCommand = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if raw.at < last_at {
                return Err(bad(format!("timestamp {} goes back before {last_at}", raw.at)));
            }
            last_at = raw.at;
            let command = match raw.cmd.as_str() {
                "end" => Command::End,
                "deepbreath" => match raw.n {
                    Some(n) if n > 0 => Command::DeepBreath { n },
                    _ => return Err(bad("deepbreath needs n >= 1".into())),
                },
                "set" => {
                    let key = raw.key.ok_or_else(|| bad("set needs a key".into()))?;
                    match (key.as_str(), raw.val) {
                        (k, Some(Value::Bool(val))) if k.starts_with("sim.") && k.len() > 4 => {
                            Command::SetFlag { key, val }
                        }
                        (k, Some(Value::Number(n))) if NUMERIC_KEYS.contains(&k) => {
                            let val = n.as_f64().unwrap_or(f64::NAN);
                            let ok = match k {
                                "breath.rate" => val > 0.0,
                                "breath.amplitude" => (0.0..=0.5).contains(&val),
                                _ => val >= 0.0,
                            };
                            if !ok || !val.is_finite() {
                                return Err(bad(format!("value {val} out of range for {k}")));
                            }
                            Command::SetNumber { key, val }
                        }
                        (k, _) => return Err(bad(format!("cannot set `{k}` to that value"))),
                    }
                }
                other => return Err(bad(format!("unknown command `{other}`"))),
            };
            commands.push(ScenarioCommand {
                at: raw.at,
                command,
            });
        }
        Ok(Scenario { commands })
    }

    /// Time of the first `end`, or of the last command when there is none.
    pub fn end_time(&self) -> u64 {
        self.commands
            .iter()
            .find(|c| c.command == Command::End)
            .or(self.commands.last())
            .map_or(0, |c| c.at)
    }
}

struct BreathGen {
    rate: f64,
    amplitude: f64,
    phase_anchor: f64,
    t_anchor: u64,
    deep_start: f64,
    deep_end: f64,
}

impl BreathGen {
    fn phase(&self, t: u64) -> f64 {
        self.phase_anchor + self.rate * (t - self.t_anchor) as f64 / 60_000.0
    }

    fn set_rate(&mut self, t: u64, rate: f64) {
        self.phase_anchor = self.phase(t);
        self.t_anchor = t;
        self.rate = rate;
    }

    /// Deep breathing starts at the next whole cycle and lasts `n` cycles,
    /// queued after any deep run already under way.
    fn deep(&mut self, t: u64, n: u32) {
        let phase = self.phase(t);
        if self.deep_end > phase {
            self.deep_end += n as f64;
        } else {
            self.deep_start = phase.ceil();
            self.deep_end = self.deep_start + n as f64;
        }
    }

    fn value(&self, t: u64) -> f64 {
        let phase = self.phase(t);
        let a = if phase >= self.deep_start && phase < self.deep_end {
            DEEP_AMPLITUDE
        } else {
            self.amplitude
        };
        0.5 + a * (std::f64::consts::TAU * phase).sin()
    }
}

struct HeartGen {
    bpm: f64,
    jitter: f64,
    last_nominal: Option<f64>,
    not_before: f64,
    pending: Option<(u64, f64)>,
    last_emitted: Option<u64>,
}

impl HeartGen {
    fn set_bpm(&mut self, t: u64, bpm: f64) {
        if self.bpm <= 0.0 {
            self.last_nominal = None;
        }
        self.bpm = bpm;
        self.not_before = t as f64;
        self.pending = None;
    }

    fn set_jitter(&mut self, jitter: f64) {
        self.jitter = jitter;
        self.pending = None;
    }

    /// Emission time of the next beat, drawing its jitter on first look.
    fn peek(&mut self, rng: &mut ChaCha8Rng, cursor: u64) -> Option<u64> {
        if self.bpm <= 0.0 {
            return None;
        }
        if self.pending.is_none() {
            let nominal = self
                .last_nominal
                .map_or(self.not_before, |l| (l + 60_000.0 / self.bpm).max(self.not_before));
            let offset = if self.jitter > 0.0 {
                rng.random_range(-self.jitter..=self.jitter)
            } else {
                0.0
            };
            let floor = self
                .last_emitted
                .map_or(cursor, |l| (l + 1).max(cursor)) as f64;
            let t = (nominal + offset).round().max(floor) as u64;
            self.pending = Some((t, nominal));
        }
        self.pending.map(|(t, _)| t)
    }

    fn take(&mut self) -> u64 {
        let (t, nominal) = self.pending.take().expect("peeked beat");
        self.last_nominal = Some(nominal);
        self.last_emitted = Some(t);
        t
    }
}

/// Runs a scenario, handing every generated sample to `emit` in time
/// order. The same scenario and seed always produce the same stream.
pub fn simulate(scenario: &Scenario, seed: u64, mut emit: impl FnMut(Sample)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = scenario.end_time();
    let mut breath = BreathGen {
        rate: DEFAULT_BREATH_RATE,
        amplitude: DEFAULT_AMPLITUDE,
        phase_anchor: 0.0,
        t_anchor: 0,
        deep_start: 0.0,
        deep_end: 0.0,
    };
    let mut heart = HeartGen {
        bpm: DEFAULT_BPM,
        jitter: 0.0,
        last_nominal: None,
        not_before: 0.0,
        pending: None,
        last_emitted: None,
    };
    let mut commands = scenario.commands.iter().peekable();
    let mut next_breath = 0u64;
    let mut cursor = 0u64;

    loop {
        let next_cmd = commands.peek().map(|c| c.at).filter(|&at| at <= end);
        let next_beat = heart.peek(&mut rng, cursor).filter(|&t| t <= end);
        let breath_due = (next_breath <= end).then_some(next_breath);
        let Some(now) = [next_cmd, breath_due, next_beat].into_iter().flatten().min() else {
            break;
        };
        cursor = now;

        // commands, then breath, then heart at equal timestamps
        if next_cmd == Some(now) {
            let cmd = commands.next().expect("peeked");
            match &cmd.command {
                Command::SetNumber { key, val } => match key.as_str() {
                    "heart.bpm" => heart.set_bpm(now, *val),
                    "heart.jitter" => heart.set_jitter(*val),
                    "breath.rate" => breath.set_rate(now, *val),
                    "breath.amplitude" => breath.amplitude = *val,
                    _ => unreachable!("validated at parse time"),
                },
                Command::SetFlag { key, val } => {
                    let ev = if *val { "true" } else { "false" };
                    emit(Sample::event(now, SIM_FLAG_SOURCE, key, ev));
                }
                Command::DeepBreath { n } => breath.deep(now, *n),
                Command::End => {}
            }
        } else if breath_due == Some(now) {
            emit(Sample::value(now, SIM_SOURCE, "breath", breath.value(now)));
            next_breath += BREATH_PERIOD_MS;
        } else {
            let t = heart.take();
            emit(Sample::event(t, SIM_SOURCE, "heart", "beat"));
        }
    }
}

pub fn simulate_to_vec(scenario: &Scenario, seed: u64) -> Vec<Sample> {
    let mut out = Vec::new();
    simulate(scenario, seed, |s| out.push(s));
    out
}
