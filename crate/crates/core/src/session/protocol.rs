//! Client channel messages: JSON text frames, `type`-tagged.

use serde::{Deserialize, Serialize};

use crate::runtime::{EngineEvent, GameTime, PlayerInput, Session};
use crate::script::{Position, Size, Span};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed client message: {0}")]
pub struct MalformedClientMessage(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Hello { protocol_version: u32 },
    Yaw { deg: f64 },
    Hover { span: Option<String> },
}

impl ClientMessage {
    /// The runtime input this message maps to; `Hello` has none.
    pub fn to_input(&self) -> Option<PlayerInput> {
        match self {
            ClientMessage::Hello { .. } => None,
            ClientMessage::Yaw { deg } => Some(PlayerInput::Yaw { deg: *deg }),
            ClientMessage::Hover { span } => Some(PlayerInput::Hover { span: span.clone() }),
        }
    }
}

pub fn decode_client_message(text: &str) -> Result<ClientMessage, MalformedClientMessage> {
    // `hover` must carry `span` explicitly, null included
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| MalformedClientMessage(e.to_string()))?;
    if raw.get("type").and_then(|t| t.as_str()) == Some("hover") && raw.get("span").is_none() {
        return Err(MalformedClientMessage("hover without `span`".into()));
    }
    let msg: ClientMessage = serde_json::from_value(raw).map_err(|e| MalformedClientMessage(e.to_string()))?;
    match &msg {
        ClientMessage::Yaw { deg } if !deg.is_finite() => Err(MalformedClientMessage(format!("yaw {deg} is not finite"))),
        ClientMessage::Hello { protocol_version } if *protocol_version != PROTOCOL_VERSION => Err(MalformedClientMessage(
            format!("unsupported protocol version {protocol_version}"),
        )),
        _ => Ok(msg),
    }
}

pub fn encode_client_message(msg: &ClientMessage) -> String {
    serde_json::to_string(msg).expect("client message serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpeaker {
    pub name: String,
    pub position: Position,
    pub yaw: f64,
    pub style: String,
    pub size: Size,
    pub visible: bool,
}

/// Everything a reader needs to draw the current moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub t: u64,
    pub section: String,
    /// Owner of `section`.
    pub speaker: String,
    /// Whether the section text has been revealed.
    pub shown: bool,
    pub speakers: Vec<SceneSpeaker>,
    pub spans: Vec<Span>,
    pub player_yaw: f64,
    pub half_fov: f64,
    pub dwell_threshold_ms: u64,
    pub day: GameTime,
}

impl Scene {
    pub fn of(session: &Session, now: u64) -> Self {
        let story = session.story();
        let section = story
            .section(session.current_section())
            .expect("current section exists");
        let speakers = session
            .placements()
            .iter()
            .map(|p| {
                let sp = story.speaker(&p.speaker).expect("placed speakers are declared");
                SceneSpeaker {
                    name: sp.name.clone(),
                    position: sp.position,
                    yaw: p.yaw,
                    style: sp.style.clone(),
                    size: sp.size,
                    visible: p.visible,
                }
            })
            .collect();
        Scene {
            t: now,
            section: section.id.to_string(),
            speaker: section.speaker.clone(),
            shown: session.is_shown(),
            speakers,
            spans: section.spans().map(|(s, _)| s.clone()).collect(),
            player_yaw: session.gaze().player_yaw,
            half_fov: session.config().half_fov,
            dwell_threshold_ms: session.config().dwell_threshold_ms,
            day: session.game_time(now),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Scene { scene: Scene },
    Event { event: EngineEvent },
    Bio {
        sig: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bpm: Option<f64>,
        t: u64,
    },
}

impl ServerMessage {
    /// Biofeedback events travel as `bio` messages, everything else as
    /// `event`.
    pub fn from_event(event: EngineEvent) -> Self {
        match event {
            EngineEvent::Biofeedback { sig, value, bpm, t } => ServerMessage::Bio { sig, value, bpm, t },
            event => ServerMessage::Event { event },
        }
    }

    /// Bio messages may be dropped when the client falls behind.
    pub fn is_droppable(&self) -> bool {
        matches!(self, ServerMessage::Bio { .. })
    }
}

pub fn encode_server_message(msg: &ServerMessage) -> String {
    serde_json::to_string(msg).expect("server message serializes")
}

pub fn decode_server_message(text: &str) -> Result<ServerMessage, serde_json::Error> {
    serde_json::from_str(text)
}
