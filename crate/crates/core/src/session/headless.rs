//! Offline play: one merged, time-ordered queue of sensor samples, player
//! inputs and 50 ms ticks fed into a [`Session`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::physio::{simulate_to_vec, BadScenario, Sample, Scenario};
use crate::runtime::{EngineEvent, PlayerInput, RuntimeError, Session, SessionConfig};
use crate::script::{parse_script, Diagnostic, ScriptError, Story};

pub const HEADLESS_TICK_MS: u64 = 50;

/// One timed player action of an input script:
/// `{"at":6000,"cmd":"yaw","deg":180}` or `{"at":3000,"cmd":"hover","span":"s4"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputCommand {
    pub at: u64,
    #[serde(flatten)]
    pub input: PlayerInput,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bad input script at line {line}: {reason}")]
pub struct BadInputs {
    pub line: usize,
    pub reason: String,
}

pub fn parse_inputs(text: &str) -> Result<Vec<InputCommand>, BadInputs> {
    let mut out: Vec<InputCommand> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| BadInputs { line: idx + 1, reason };
        let cmd: InputCommand = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if let PlayerInput::Yaw { deg } = cmd.input {
            if !deg.is_finite() {
                return Err(bad(format!("yaw {deg} is not finite")));
            }
        }
        if out.last().is_some_and(|prev| prev.at > cmd.at) {
            return Err(bad("timestamps must not decrease".into()));
        }
        out.push(cmd);
    }
    Ok(out)
}

/// Something that happens to a session at a given time.
#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    Sample(Sample),
    Player(PlayerInput),
    Tick,
}

impl Stimulus {
    /// Processing order among stimuli sharing a timestamp.
    pub fn rank(&self) -> u8 {
        match self {
            Stimulus::Sample(_) => 0,
            Stimulus::Player(_) => 1,
            Stimulus::Tick => 2,
        }
    }
}

/// A session plus the transcript of everything it emitted. Both the
/// headless player and the server drive sessions through this.
#[derive(Debug, Clone)]
pub struct Driver {
    pub session: Session,
    pub transcript: Vec<EngineEvent>,
}

impl Driver {
    pub fn start(story: Story, config: SessionConfig) -> Result<(Self, Vec<EngineEvent>), RuntimeError> {
        let (session, events) = Session::start(story, config)?;
        Ok((
            Driver {
                session,
                transcript: events.clone(),
            },
            events,
        ))
    }

    pub fn apply(&mut self, t: u64, stimulus: &Stimulus) -> Result<Vec<EngineEvent>, RuntimeError> {
        let events = match stimulus {
            Stimulus::Sample(sample) => self.session.on_sample(sample, t)?,
            Stimulus::Player(input) => self.session.on_player_input(input, t)?,
            Stimulus::Tick => self.session.tick(t)?,
        };
        self.transcript.extend(events.iter().cloned());
        Ok(events)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlayError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("story has lint errors")]
    Lint(Vec<Diagnostic>),
    #[error(transparent)]
    Scenario(#[from] BadScenario),
    #[error(transparent)]
    Inputs(#[from] BadInputs),
    #[error(transparent)]
    Runtime(RuntimeError),
}

impl From<RuntimeError> for PlayError {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::StoryInvalid(diags) => PlayError::Lint(diags),
            e => PlayError::Runtime(e),
        }
    }
}

impl PlayError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PlayError::Script(_) | PlayError::Lint(_) => 2,
            PlayError::Scenario(_) | PlayError::Inputs(_) => 3,
            PlayError::Io { .. } | PlayError::Runtime(_) => 1,
        }
    }

    /// Diagnostics behind a rejected story, if that is what this is.
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            PlayError::Script(e) => e.diagnostics(),
            PlayError::Lint(d) => d,
            _ => &[],
        }
    }
}

/// Builds the merged queue. Ticks run from 0 to `end` inclusive; inputs
/// after `end` are dropped.
pub fn schedule(samples: Vec<Sample>, inputs: &[InputCommand], end: u64) -> Vec<(u64, Stimulus)> {
    let mut queue: Vec<(u64, Stimulus)> = samples
        .into_iter()
        .filter(|s| s.t <= end)
        .map(|s| (s.t, Stimulus::Sample(s)))
        .collect();
    queue.extend(
        inputs
            .iter()
            .filter(|c| c.at <= end)
            .map(|c| (c.at, Stimulus::Player(c.input.clone()))),
    );
    queue.extend((0..=end / HEADLESS_TICK_MS).map(|k| (k * HEADLESS_TICK_MS, Stimulus::Tick)));
    // stable: samples and inputs keep their own order within a timestamp
    queue.sort_by_key(|(t, s)| (*t, s.rank()));
    queue
}

/// Plays a story against a scenario and an input script until the
/// scenario ends; returns the full transcript.
pub fn run_headless(
    story: Story,
    scenario: &Scenario,
    inputs: &[InputCommand],
    seed: u64,
    config: SessionConfig,
) -> Result<Vec<EngineEvent>, PlayError> {
    let config = SessionConfig {
        seed,
        epoch: 0,
        ..config
    };
    let (mut driver, _) = Driver::start(story, config)?;
    let end = scenario.end_time();
    for (t, stimulus) in schedule(simulate_to_vec(scenario, seed), inputs, end) {
        driver.apply(t, &stimulus)?;
    }
    Ok(driver.transcript)
}

fn read(path: &Path) -> Result<String, PlayError> {
    std::fs::read_to_string(path).map_err(|source| PlayError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// File-level wrapper behind `vif play`. Missing scenario or inputs mean
/// "nothing happens".
pub fn play_files(
    story_path: &Path,
    scenario_path: Option<&Path>,
    inputs_path: Option<&Path>,
    seed: u64,
    config: SessionConfig,
) -> Result<Vec<EngineEvent>, PlayError> {
    let story = parse_script(&read(story_path)?)?.story.with_source_name(story_path.display().to_string());
    let scenario = match scenario_path {
        Some(p) => Scenario::parse(&read(p)?)?,
        None => Scenario::default(),
    };
    let inputs = match inputs_path {
        Some(p) => parse_inputs(&read(p)?)?,
        None => Vec::new(),
    };
    run_headless(story, &scenario, &inputs, seed, config)
}
