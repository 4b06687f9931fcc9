//! The VIF story markup: parsing, linting and canonical serialization.
//!
//! A script is line oriented. `#ACTIVATE: <id>` names the entry section,
//! other `#` lines are comments, `*` lines either declare a speaker
//! (`* Name @north:#style:#size:`) or open a section, and everything else is
//! section body: standalone directive lines (`timer:2000 goto:x`,
//! `bind:2000 goto:x`, `bind:goto:x`, `ex:breath_3:src:x`) or paragraphs with
//! inline spans (`/emphasis/`, `bind:goto:x:label.`, `bind:sig:style:text`).

mod lint;
mod model;
mod parse;
mod serialize;

use serde::{Deserialize, Serialize};

pub use lint::{lint_story, BUILTIN_SIGNALS};
pub use model::{
    normalize_section_id, DetectorSpec, Directive, Position, Section, SectionId, SectionItem,
    Size, SourceLine, Span, SpanKind, Speaker, Story, DEFAULT_PREDICATE,
};
pub use parse::{extract_spans, parse_directive, parse_script, Parsed, ParsedDirective, Piece};
pub use serialize::serialize_story;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("section id `{0}` is empty after normalization")]
    EmptyId(String),
    #[error("malformed directive `{0}`")]
    MalformedDirective(String),
    #[error("bad integer in directive `{0}`")]
    BadInteger(String),
    #[error("bad detector `{0}` (expected <signal>_<count>, count >= 1)")]
    BadDetector(String),
    #[error("script rejected with {} error(s)", .0.iter().filter(|d| d.is_error()).count())]
    Rejected(Vec<Diagnostic>),
}

impl ScriptError {
    /// Diagnostic code for errors raised while parsing a single line.
    pub fn code(&self) -> &'static str {
        match self {
            ScriptError::EmptyId(_) => codes::EMPTY_ID,
            ScriptError::MalformedDirective(_) => codes::MALFORMED_DIRECTIVE,
            ScriptError::BadInteger(_) => codes::BAD_INTEGER,
            ScriptError::BadDetector(_) => codes::BAD_DETECTOR,
            ScriptError::Rejected(_) => codes::REJECTED,
        }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ScriptError::Rejected(d) => d,
            _ => &[],
        }
    }
}

/// Diagnostic codes. `E0xx`/`W0xx` come from the linter, `E1xx`/`W1xx` from
/// the parser.
pub mod codes {
    pub const DANGLING_TARGET: &str = "E001";
    pub const UNREACHABLE: &str = "W001";
    pub const EMPTY_CHOICE_LABEL: &str = "W002";
    pub const UNKNOWN_SIGNAL: &str = "W003";
    pub const IDLE_SPEAKER: &str = "W004";

    pub const NO_ENTRY_POINT: &str = "E100";
    pub const BODY_OUTSIDE_SECTION: &str = "E101";
    pub const UNKNOWN_ENTRY: &str = "E102";
    pub const DUPLICATE_SECTION: &str = "E103";
    pub const DUPLICATE_SPEAKER: &str = "E104";
    pub const MALFORMED_DIRECTIVE: &str = "E105";
    pub const BAD_INTEGER: &str = "E106";
    pub const BAD_DETECTOR: &str = "E107";
    pub const EMPTY_ID: &str = "E108";
    pub const BAD_SPEAKER: &str = "E109";
    pub const DUPLICATE_ENTRY: &str = "E110";
    pub const REJECTED: &str = "E199";
    pub const UNTERMINATED_EMPHASIS: &str = "W101";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One finding, serialized as a JSON line by the CLI:
/// `{"severity":"error","code":"E001","line":12,"message":"…"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub line: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &str, line: u32, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code: code.to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn warning(code: &str, line: u32, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            code: code.to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("diagnostic serializes")
    }
}
