use serde::{Deserialize, Serialize};

/// Why a transition happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Timer,
    Conditional,
    Choice,
    SectionChoice,
    Detector,
}

/// One line of the session transcript. The JSON shape is frozen:
/// `{"ev":"transition","from":"start","to":"stress","cause":"conditional","t":2000}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev")]
pub enum EngineEvent {
    #[serde(rename = "section")]
    SectionActivated { id: String, t: u64 },
    #[serde(rename = "show")]
    BlockShown { speaker: String, t: u64 },
    #[serde(rename = "hide")]
    BlockHidden { speaker: String, t: u64 },
    #[serde(rename = "enter_view")]
    BlockEnteredView { speaker: String, t: u64 },
    #[serde(rename = "exit_view")]
    BlockExitedView { speaker: String, t: u64 },
    #[serde(rename = "choice")]
    ChoiceSelected { span: String, t: u64 },
    #[serde(rename = "transition")]
    TransitionFired {
        from: String,
        to: String,
        cause: Cause,
        t: u64,
    },
    #[serde(rename = "detector")]
    DetectorFired {
        detector: String,
        source: String,
        t: u64,
    },
    #[serde(rename = "day_phase")]
    DayPhaseChanged { night: bool, t: u64 },
    #[serde(rename = "bio")]
    Biofeedback {
        sig: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bpm: Option<f64>,
        t: u64,
    },
}

impl EngineEvent {
    pub fn t(&self) -> u64 {
        match self {
            EngineEvent::SectionActivated { t, .. }
            | EngineEvent::BlockShown { t, .. }
            | EngineEvent::BlockHidden { t, .. }
            | EngineEvent::BlockEnteredView { t, .. }
            | EngineEvent::BlockExitedView { t, .. }
            | EngineEvent::ChoiceSelected { t, .. }
            | EngineEvent::TransitionFired { t, .. }
            | EngineEvent::DetectorFired { t, .. }
            | EngineEvent::DayPhaseChanged { t, .. }
            | EngineEvent::Biofeedback { t, .. } => *t,
        }
    }

    pub fn is_biofeedback(&self) -> bool {
        matches!(self, EngineEvent::Biofeedback { .. })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Renders events as a JSON-lines transcript, one event per line.
pub fn write_transcript(events: &[EngineEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&ev.to_json_line());
        out.push('\n');
    }
    out
}
