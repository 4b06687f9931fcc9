//! The story state machine.
//!
//! A [`Session`] consumes one ordered stream of ticks, player inputs and
//! sensor samples and answers each with the engine events it caused. All
//! mutation happens here; callers only feed it and collect events.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::clock::{day_phase, GameTime};
use super::event::{Cause, EngineEvent};
use crate::physio::{BreathThresholds, DetectorEvent, Sample, SignalRegistry, StressParams};
use crate::script::{lint_story, DetectorSpec, Diagnostic, Directive, SectionId, SpanKind, Story};
use crate::spatial::{
    normalize_yaw, resolve_block_yaw, update_view, BlockPlacement, GazeState, SelectionFired,
    ViewChange, DEFAULT_DWELL_MS, DEFAULT_HALF_FOV,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub game_day_real_seconds: f64,
    /// Day fraction at session start; 0.25 is sunrise.
    pub start_fraction: f64,
    pub half_fov: f64,
    pub dwell_threshold_ms: u64,
    pub stress: StressParams,
    pub breath: BreathThresholds,
    pub seed: u64,
    /// Session time zero, in clock milliseconds.
    pub epoch: u64,
    /// Minimum spacing of biofeedback events per signal.
    pub bio_interval_ms: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            game_day_real_seconds: 600.0,
            start_fraction: 0.25,
            half_fov: DEFAULT_HALF_FOV,
            dwell_threshold_ms: DEFAULT_DWELL_MS,
            stress: StressParams::default(),
            breath: BreathThresholds::default(),
            seed: 0,
            epoch: 0,
            bio_interval_ms: 100,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.game_day_real_seconds > 0.0 && self.game_day_real_seconds.is_finite()) {
            return Err("game_day_real_seconds must be positive".into());
        }
        if !(0.0..=180.0).contains(&self.half_fov) {
            return Err("half_fov must lie in [0, 180]".into());
        }
        let b = &self.breath;
        if !(0.0 <= b.lo && b.lo < b.hi && b.hi <= 1.0 && (0.0..=1.0).contains(&b.deep)) {
            return Err("breath thresholds must satisfy 0 <= lo < hi <= 1".into());
        }
        self.stress.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmedTrigger {
    Timer {
        fire_at: u64,
        target: SectionId,
    },
    Conditional {
        fire_at: u64,
        predicate: String,
        target: SectionId,
    },
    Choice {
        span_id: String,
        target: SectionId,
    },
    SectionChoice {
        target: SectionId,
    },
    Expect {
        detector: DetectorSpec,
        source: String,
        target: SectionId,
    },
}

impl ArmedTrigger {
    fn fire_at(&self) -> Option<u64> {
        match self {
            ArmedTrigger::Timer { fire_at, .. } | ArmedTrigger::Conditional { fire_at, .. } => {
                Some(*fire_at)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Armed {
    pub owner: SectionId,
    /// Arming order, used to break ties between equal deadlines.
    pub seq: u64,
    pub trigger: ArmedTrigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum PlayerInput {
    Yaw { deg: f64 },
    Hover { span: Option<String> },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("story has {} error diagnostic(s)", .0.len())]
    StoryInvalid(Vec<Diagnostic>),
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("clock went back from {last} to {now}")]
    ClockRegression { last: u64, now: u64 },
    #[error("bad session config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone)]
pub struct Session {
    story: Arc<Story>,
    config: SessionConfig,
    current: SectionId,
    armed: Vec<Armed>,
    /// Timer/conditional directives waiting for the block to enter view.
    deferred: Vec<Directive>,
    /// The current section's text has been revealed.
    shown: bool,
    gaze: GazeState,
    placements: Vec<BlockPlacement>,
    registry: SignalRegistry,
    night: bool,
    now: u64,
    next_seq: u64,
    bio_last: BTreeMap<String, u64>,
    batch: Vec<EngineEvent>,
    warnings: Vec<String>,
}

impl Session {
    /// Checks the story, places every speaker's block, activates the entry
    /// section and reports the initial day phase.
    pub fn start(story: Story, config: SessionConfig) -> Result<(Self, Vec<EngineEvent>), RuntimeError> {
        config.validate().map_err(RuntimeError::BadConfig)?;
        let errors: Vec<Diagnostic> = lint_story(&story).into_iter().filter(Diagnostic::is_error).collect();
        if !errors.is_empty() {
            return Err(RuntimeError::StoryInvalid(errors));
        }

        let mut registry = SignalRegistry::new(config.stress, config.breath);
        for (var, signal) in story.detector_bindings() {
            registry.bind_detector(&var, &signal);
        }
        // Only speakers that own a section get a block in the scene.
        let placements = story
            .speakers
            .iter()
            .filter(|sp| story.sections.iter().any(|sec| sec.speaker == sp.name))
            .map(|sp| {
                BlockPlacement::new(&sp.name, resolve_block_yaw(sp.position, 0.0), config.half_fov, 0.0)
            })
            .collect();
        let night = day_phase(config.game_day_real_seconds, config.start_fraction, config.epoch, config.epoch).night;
        let entry = story.entry.clone();

        let mut session = Session {
            story: Arc::new(story),
            gaze: GazeState::new(config.dwell_threshold_ms),
            now: config.epoch,
            config,
            current: entry.clone(),
            armed: Vec::new(),
            deferred: Vec::new(),
            shown: false,
            placements,
            registry,
            night,
            next_seq: 0,
            bio_last: BTreeMap::new(),
            batch: Vec::new(),
            warnings: Vec::new(),
        };
        let now = session.now;
        session.activate(&entry, now, None)?;
        session.emit(EngineEvent::DayPhaseChanged { night, t: now });
        let events = session.flush();
        Ok((session, events))
    }

    pub fn story(&self) -> &Story {
        &self.story
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn current_section(&self) -> &SectionId {
        &self.current
    }

    pub fn armed(&self) -> &[Armed] {
        &self.armed
    }

    pub fn deferred(&self) -> &[Directive] {
        &self.deferred
    }

    pub fn is_shown(&self) -> bool {
        self.shown
    }

    pub fn gaze(&self) -> &GazeState {
        &self.gaze
    }

    pub fn placements(&self) -> &[BlockPlacement] {
        &self.placements
    }

    pub fn registry(&self) -> &SignalRegistry {
        &self.registry
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn game_time(&self, now: u64) -> GameTime {
        day_phase(
            self.config.game_day_real_seconds,
            self.config.start_fraction,
            self.config.epoch,
            now,
        )
    }

    pub fn placement(&self, speaker: &str) -> Option<&BlockPlacement> {
        self.placements.iter().find(|p| p.speaker == speaker)
    }

    fn current_speaker(&self) -> String {
        self.story
            .section(&self.current)
            .map(|s| s.speaker.clone())
            .unwrap_or_default()
    }

    /// The current block is revealed and inside the field of view.
    pub fn selectable(&self) -> bool {
        self.shown
            && self
                .placement(&self.current_speaker())
                .is_some_and(|p| p.visible)
    }

    fn emit(&mut self, ev: EngineEvent) {
        self.batch.push(ev);
    }

    fn flush(&mut self) -> Vec<EngineEvent> {
        std::mem::take(&mut self.batch)
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn advance(&mut self, now: u64) -> Result<(), RuntimeError> {
        if now < self.now {
            return Err(RuntimeError::ClockRegression {
                last: self.now,
                now,
            });
        }
        self.now = now;
        Ok(())
    }

    fn arm(&mut self, trigger: ArmedTrigger) {
        self.armed.push(Armed {
            owner: self.current.clone(),
            seq: self.next_seq,
            trigger,
        });
        self.next_seq += 1;
    }

    fn arm_delayed(&mut self, directive: &Directive, now: u64) {
        match directive {
            Directive::TimerGoto { delay_ms, target } => self.arm(ArmedTrigger::Timer {
                fire_at: now + delay_ms,
                target: target.clone(),
            }),
            Directive::ConditionalGoto {
                delay_ms,
                predicate,
                target,
            } => self.arm(ArmedTrigger::Conditional {
                fire_at: now + delay_ms,
                predicate: predicate.clone(),
                target: target.clone(),
            }),
            _ => unreachable!("only delayed directives are deferred"),
        }
    }

    /// Makes `id` the current section. Triggers of the previous section are
    /// dropped; timers of a block outside the field of view wait until the
    /// block first enters view.
    pub fn activate_section(
        &mut self,
        id: &SectionId,
        now: u64,
        cause: Option<(SectionId, Cause)>,
    ) -> Result<Vec<EngineEvent>, RuntimeError> {
        self.advance(now)?;
        self.activate(id, now, cause)?;
        Ok(self.flush())
    }

    fn activate(&mut self, id: &SectionId, now: u64, cause: Option<(SectionId, Cause)>) -> Result<(), RuntimeError> {
        let story = Arc::clone(&self.story);
        let section = story
            .section(id)
            .ok_or_else(|| RuntimeError::UnknownSection(id.to_string()))?;

        if let Some((from, cause)) = cause {
            self.emit(EngineEvent::TransitionFired {
                from: from.to_string(),
                to: id.to_string(),
                cause,
                t: now,
            });
        }
        self.armed.clear();
        self.deferred.clear();
        self.registry.clear_counters();
        self.gaze.clear_hover();
        self.current = id.clone();
        self.emit(EngineEvent::SectionActivated {
            id: id.to_string(),
            t: now,
        });

        let speaker = story
            .speaker(&section.speaker)
            .expect("sections are owned by declared speakers");
        let yaw = self.gaze.player_yaw;
        let idx = self
            .placements
            .iter()
            .position(|p| p.speaker == speaker.name)
            .expect("every speaker has a placement");
        if speaker.position.is_relative() {
            self.placements[idx].yaw = resolve_block_yaw(speaker.position, yaw);
        }
        let visible = self.placements[idx].in_view(yaw);
        if visible != self.placements[idx].visible {
            self.placements[idx].visible = visible;
            let name = speaker.name.clone();
            self.emit(if visible {
                EngineEvent::BlockEnteredView { speaker: name, t: now }
            } else {
                EngineEvent::BlockExitedView { speaker: name, t: now }
            });
        }
        self.shown = visible;
        self.emit(if visible {
            EngineEvent::BlockShown {
                speaker: speaker.name.clone(),
                t: now,
            }
        } else {
            EngineEvent::BlockHidden {
                speaker: speaker.name.clone(),
                t: now,
            }
        });

        for (directive, _) in section.directives() {
            match directive {
                Directive::TimerGoto { .. } | Directive::ConditionalGoto { .. } => {
                    if self.shown {
                        self.arm_delayed(directive, now);
                    } else {
                        self.deferred.push(directive.clone());
                    }
                }
                Directive::SectionChoice { target } => self.arm(ArmedTrigger::SectionChoice {
                    target: target.clone(),
                }),
                Directive::Expect {
                    detector,
                    source,
                    target,
                } => {
                    self.registry.arm_counter(detector, source);
                    self.arm(ArmedTrigger::Expect {
                        detector: detector.clone(),
                        source: source.clone(),
                        target: target.clone(),
                    });
                }
            }
        }
        for (span, _) in section.spans() {
            if let SpanKind::Choice { target } = &span.kind {
                self.arm(ArmedTrigger::Choice {
                    span_id: span.id.clone(),
                    target: target.clone(),
                });
            }
        }
        Ok(())
    }

    fn transition(&mut self, target: &SectionId, cause: Cause, now: u64) {
        let from = self.current.clone();
        self.activate(target, now, Some((from, cause)))
            .expect("armed targets exist in a lint-clean story");
    }

    /// Advances the clock: day phase, then due timers and conditionals in
    /// deadline order (at most one transition), then the dwell timer.
    pub fn tick(&mut self, now: u64) -> Result<Vec<EngineEvent>, RuntimeError> {
        self.advance(now)?;
        let day = self.game_time(now);
        if day.night != self.night {
            self.night = day.night;
            self.emit(EngineEvent::DayPhaseChanged {
                night: day.night,
                t: now,
            });
        }

        let mut due: Vec<(u64, u64)> = self
            .armed
            .iter()
            .filter_map(|a| a.trigger.fire_at().filter(|&f| f <= now).map(|f| (f, a.seq)))
            .collect();
        due.sort_unstable();

        let mut transitioned = false;
        for (_, seq) in due {
            let pos = self
                .armed
                .iter()
                .position(|a| a.seq == seq)
                .expect("due trigger is armed");
            let armed = self.armed.remove(pos);
            match armed.trigger {
                ArmedTrigger::Timer { target, .. } => {
                    self.transition(&target, Cause::Timer, now);
                    transitioned = true;
                }
                ArmedTrigger::Conditional {
                    predicate, target, ..
                } => {
                    if self.registry.eval_predicate(&predicate, &day, now) {
                        self.transition(&target, Cause::Conditional, now);
                        transitioned = true;
                    }
                }
                _ => unreachable!("only timed triggers are due"),
            }
            if transitioned {
                break;
            }
        }

        if !transitioned {
            if let Some(sel) = self.gaze.poll(now) {
                self.select(sel, now);
            }
        }
        Ok(self.flush())
    }

    fn select(&mut self, sel: SelectionFired, now: u64) {
        if !self.selectable() {
            return;
        }
        let hit = self.armed.iter().find_map(|a| match &a.trigger {
            ArmedTrigger::Choice { span_id, target } if *span_id == sel.span_id => {
                Some((target.clone(), Cause::Choice))
            }
            _ => None,
        });
        let hit = hit.or_else(|| {
            self.armed.iter().find_map(|a| match &a.trigger {
                ArmedTrigger::SectionChoice { target } => Some((target.clone(), Cause::SectionChoice)),
                _ => None,
            })
        });
        if let Some((target, cause)) = hit {
            self.emit(EngineEvent::ChoiceSelected {
                span: sel.span_id,
                t: now,
            });
            self.transition(&target, cause, now);
        }
    }

    pub fn on_player_input(&mut self, input: &PlayerInput, now: u64) -> Result<Vec<EngineEvent>, RuntimeError> {
        self.advance(now)?;
        match input {
            PlayerInput::Yaw { deg } if !deg.is_finite() => {
                self.warn(format!("ignoring non-finite yaw {deg}"));
            }
            PlayerInput::Yaw { deg } => {
                self.gaze.player_yaw = normalize_yaw(*deg);
                let speaker = self.current_speaker();
                let mut entered_current = false;
                let mut exited_current = false;
                for change in update_view(&mut self.placements, self.gaze.player_yaw, now) {
                    self.emit(match change {
                        ViewChange::Entered { speaker: s, t } => {
                            entered_current |= s == speaker;
                            EngineEvent::BlockEnteredView { speaker: s, t }
                        }
                        ViewChange::Exited { speaker: s, t } => {
                            exited_current |= s == speaker;
                            EngineEvent::BlockExitedView { speaker: s, t }
                        }
                    });
                }
                if exited_current {
                    self.gaze.clear_hover();
                }
                if entered_current && !self.shown {
                    self.shown = true;
                    self.emit(EngineEvent::BlockShown { speaker, t: now });
                    for directive in std::mem::take(&mut self.deferred) {
                        self.arm_delayed(&directive, now);
                    }
                }
            }
            PlayerInput::Hover { span } => {
                let known = span.as_deref().is_none_or(|id| {
                    self.story
                        .section(&self.current)
                        .is_some_and(|s| s.span(id).is_some())
                });
                if !known {
                    self.warn(format!(
                        "hover on span {:?} outside section `{}`",
                        span, self.current
                    ));
                } else if !self.selectable() {
                    // text that is not on screen cannot be looked at
                    self.gaze.clear_hover();
                } else {
                    self.gaze.hover(span.as_deref(), now);
                    if let Some(sel) = self.gaze.poll(now) {
                        self.select(sel, now);
                    }
                }
            }
        }
        Ok(self.flush())
    }

    /// Feeds one sensor sample (time already mapped to session time).
    pub fn on_sample(&mut self, sample: &Sample, now: u64) -> Result<Vec<EngineEvent>, RuntimeError> {
        self.advance(now)?;
        let detector_events = self.registry.ingest(sample);
        self.forward_biofeedback(sample, now);
        for ev in detector_events {
            self.detector_event(&ev, now);
        }
        Ok(self.flush())
    }

    fn forward_biofeedback(&mut self, sample: &Sample, now: u64) {
        let story = Arc::clone(&self.story);
        let Some(section) = story.section(&self.current) else {
            return;
        };
        let bound = section.spans().any(|(span, _)| {
            matches!(&span.kind, SpanKind::Biofeedback { signal, .. } if *signal == sample.sig)
        });
        if !bound {
            return;
        }
        let (value, bpm) = match (&sample.v, sample.ev.as_deref()) {
            (Some(v), _) => (Some(v.clamp(0.0, 1.0)), None),
            (None, Some("beat")) => match self.registry.heart.heart_rate(sample.t) {
                Some(bpm) => (None, Some(bpm)),
                None => return,
            },
            _ => return,
        };
        if let Some(&last) = self.bio_last.get(&sample.sig) {
            if now < last + self.config.bio_interval_ms {
                return;
            }
        }
        self.bio_last.insert(sample.sig.clone(), now);
        // display values only; rounding keeps transcripts stable across libm builds
        let (value, bpm) = (value.map(|v| round_to(v, 1e6)), bpm.map(|b| round_to(b, 1e3)));
        self.emit(EngineEvent::Biofeedback {
            sig: sample.sig.clone(),
            value,
            bpm,
            t: now,
        });
    }

    pub fn on_detector_event(&mut self, event: &DetectorEvent, now: u64) -> Result<Vec<EngineEvent>, RuntimeError> {
        self.advance(now)?;
        self.detector_event(event, now);
        Ok(self.flush())
    }

    fn detector_event(&mut self, event: &DetectorEvent, now: u64) {
        let target = self.armed.iter().find_map(|a| match &a.trigger {
            ArmedTrigger::Expect {
                detector,
                source,
                target,
            } if *detector == event.detector && *source == event.source => Some(target.clone()),
            _ => None,
        });
        let Some(target) = target else {
            return;
        };
        self.emit(EngineEvent::DetectorFired {
            detector: event.detector.to_string(),
            source: event.source.clone(),
            t: now,
        });
        self.transition(&target, Cause::Detector, now);
    }
}

fn round_to(x: f64, scale: f64) -> f64 {
    (x * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::parse_script;

    const DEMO: &str = include_str!("../../../../corpus/adventurer.vif");

    fn story() -> Story {
        parse_script(DEMO).unwrap().story
    }

    fn id(s: &str) -> SectionId {
        SectionId::new(s).unwrap()
    }

    fn transitions(events: &[EngineEvent]) -> Vec<(String, String, Cause)> {
        events
            .iter()
            .filter_map(|e| match e {
                EngineEvent::TransitionFired { from, to, cause, .. } => {
                    Some((from.clone(), to.clone(), *cause))
                }
                _ => None,
            })
            .collect()
    }

    #[test]
    fn start_activates_entry() {
        let (s, events) = Session::start(story(), SessionConfig::default()).unwrap();
        assert_eq!(s.current_section().as_str(), "start");
        assert!(s.is_shown());
        assert_eq!(
            write_lines(&events),
            vec![
                r#"{"ev":"section","id":"start","t":0}"#,
                r#"{"ev":"show","speaker":"Narrator","t":0}"#,
                r#"{"ev":"day_phase","night":false,"t":0}"#,
            ]
        );
    }

    fn write_lines(events: &[EngineEvent]) -> Vec<String> {
        events.iter().map(EngineEvent::to_json_line).collect()
    }

    #[test]
    fn conditional_fires_on_deadline() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.on_sample(&Sample::event(0, "sim", "sim.stressed", "true"), 0)
            .unwrap();
        assert!(s.tick(1999).unwrap().is_empty());
        let events = s.tick(2000).unwrap();
        assert_eq!(
            transitions(&events),
            vec![("start".into(), "stress".into(), Cause::Conditional)]
        );
        assert_eq!(s.current_section().as_str(), "stress");
    }

    #[test]
    fn false_conditional_is_discarded() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        assert!(transitions(&s.tick(2000).unwrap()).is_empty());
        assert_eq!(s.current_section().as_str(), "start");
        assert!(s.armed().is_empty());
        // forcing stress afterwards changes nothing
        s.on_sample(&Sample::event(2500, "sim", "sim.stressed", "true"), 2500)
            .unwrap();
        assert!(transitions(&s.tick(10_000).unwrap()).is_empty());
    }

    #[test]
    fn timer_then_hidden_block() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.activate_section(&id("send_to_bob"), 0, None).unwrap();
        assert!(s.tick(1999).unwrap().is_empty());
        let events = s.tick(2000).unwrap();
        assert_eq!(
            transitions(&events),
            vec![("send_to_bob".into(), "bob_awaits".into(), Cause::Timer)]
        );
        assert!(events.contains(&EngineEvent::BlockHidden {
            speaker: "Bob Zen".into(),
            t: 2000
        }));
        assert!(!s.is_shown());
        // hover does nothing until the block is revealed
        s.on_player_input(&PlayerInput::Hover { span: Some("s10".into()) }, 2000)
            .unwrap();
        assert!(s.tick(3500).unwrap().is_empty());

        let events = s.on_player_input(&PlayerInput::Yaw { deg: 180.0 }, 4000).unwrap();
        assert_eq!(
            write_lines(&events),
            vec![
                r#"{"ev":"exit_view","speaker":"Narrator","t":4000}"#,
                r#"{"ev":"enter_view","speaker":"Bob Zen","t":4000}"#,
                r#"{"ev":"show","speaker":"Bob Zen","t":4000}"#,
            ]
        );
        s.on_player_input(&PlayerInput::Hover { span: Some("s10".into()) }, 4000)
            .unwrap();
        let events = s.tick(5000).unwrap();
        assert_eq!(
            transitions(&events),
            vec![("bob_awaits".into(), "training".into(), Cause::SectionChoice)]
        );
    }

    #[test]
    fn timers_wait_for_view() {
        let src = "#ACTIVATE: a\n* Far @south:#x:#medium:\n* a\ntimer:1000 goto:b\nHi.\n* b\nBye.\n";
        let (mut s, _) = Session::start(parse_script(src).unwrap().story, SessionConfig::default()).unwrap();
        assert_eq!(s.deferred().len(), 1);
        assert!(s.tick(5000).unwrap().is_empty());
        s.on_player_input(&PlayerInput::Yaw { deg: 170.0 }, 6000).unwrap();
        assert!(s.tick(6999).unwrap().is_empty());
        assert_eq!(transitions(&s.tick(7000).unwrap()).len(), 1);
    }

    #[test]
    fn choice_span_by_dwell() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.activate_section(&id("stress"), 0, None).unwrap();
        s.on_player_input(&PlayerInput::Hover { span: Some("s6".into()) }, 100)
            .unwrap();
        assert!(s.tick(1099).unwrap().is_empty());
        let events = s.tick(1100).unwrap();
        assert_eq!(
            events[0],
            EngineEvent::ChoiceSelected {
                span: "s6".into(),
                t: 1100
            }
        );
        assert_eq!(
            transitions(&events),
            vec![("stress".into(), "no_stress".into(), Cause::Choice)]
        );
    }

    #[test]
    fn plain_span_without_section_choice_is_inert() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.activate_section(&id("stress"), 0, None).unwrap();
        s.on_player_input(&PlayerInput::Hover { span: Some("s3".into()) }, 0)
            .unwrap();
        assert!(s.tick(5000).unwrap().is_empty());
        // unknown span: warning, no state change
        s.on_player_input(&PlayerInput::Hover { span: Some("s99".into()) }, 5000)
            .unwrap();
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn expect_arms_counter_and_filters_source() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.on_player_input(&PlayerInput::Yaw { deg: 180.0 }, 0).unwrap();
        s.activate_section(&id("training"), 0, None).unwrap();
        let counters = s.registry().counters();
        assert_eq!(counters.len(), 1);
        assert_eq!(counters[0].spec.to_string(), "breathVar_3");
        assert_eq!(counters[0].source, "bits");

        let spec: DetectorSpec = "breathVar_3".parse().unwrap();
        let other = DetectorEvent {
            detector: spec.clone(),
            source: "other".into(),
            t: 10,
        };
        assert!(s.on_detector_event(&other, 10).unwrap().is_empty());
        let bits = DetectorEvent {
            detector: spec,
            source: "bits".into(),
            t: 20,
        };
        let events = s.on_detector_event(&bits, 20).unwrap();
        assert_eq!(
            events[0].to_json_line(),
            r#"{"ev":"detector","detector":"breathVar_3","source":"bits","t":20}"#
        );
        assert_eq!(
            transitions(&events),
            vec![("training".into(), "heart".into(), Cause::Detector)]
        );
        assert!(s.registry().counters().is_empty());
    }

    #[test]
    fn deep_breaths_complete_training() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.on_player_input(&PlayerInput::Yaw { deg: 180.0 }, 0).unwrap();
        s.activate_section(&id("training"), 0, None).unwrap();
        let mut t = 0;
        let mut all = Vec::new();
        for _ in 0..4 {
            for v in [0.1, 0.95, 0.05] {
                t += 500;
                all.extend(s.on_sample(&Sample::value(t, "bits", "breath", v), t).unwrap());
            }
        }
        assert_eq!(s.current_section().as_str(), "heart");
        assert!(all.iter().any(|e| e.is_biofeedback()));
    }

    #[test]
    fn biofeedback_is_decimated() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.on_player_input(&PlayerInput::Yaw { deg: 180.0 }, 0).unwrap();
        s.activate_section(&id("training"), 0, None).unwrap();
        let mut n = 0;
        for k in 0..10u64 {
            let t = k * 50;
            n += s
                .on_sample(&Sample::value(t, "bits", "breath", 0.5), t)
                .unwrap()
                .len();
        }
        assert_eq!(n, 5);
    }

    #[test]
    fn clock_regression_is_an_error() {
        let (mut s, _) = Session::start(story(), SessionConfig::default()).unwrap();
        s.tick(100).unwrap();
        assert_eq!(
            s.tick(99),
            Err(RuntimeError::ClockRegression { last: 100, now: 99 })
        );
    }

    #[test]
    fn day_phase_flip() {
        let config = SessionConfig {
            game_day_real_seconds: 10.0,
            ..SessionConfig::default()
        };
        let (mut s, _) = Session::start(story(), config).unwrap();
        assert!(s.tick(4999).unwrap().is_empty());
        let events = s.tick(5001).unwrap();
        assert!(events.contains(&EngineEvent::DayPhaseChanged { night: true, t: 5001 }));
    }

    #[test]
    fn rejects_dangling_story() {
        let src = "#ACTIVATE: a\n* a\nbind:goto:nowhere\nHi.\n";
        let parsed = parse_script(src);
        // the parser accepts it, the session refuses it
        let story = parsed.unwrap().story;
        assert!(matches!(
            Session::start(story, SessionConfig::default()),
            Err(RuntimeError::StoryInvalid(_))
        ));
    }
}
