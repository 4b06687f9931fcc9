//! Story data model produced by the parser.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScriptError;

/// A 1-based source line.
///
/// Source positions never participate in equality: two stories are equal
/// when their structure is, regardless of where things sat in the file.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceLine(pub u32);

impl PartialEq for SourceLine {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for SourceLine {}

/// Normalized section identifier, always matching `[a-z0-9_]+`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SectionId(String);

impl SectionId {
    pub fn new(raw: &str) -> Result<Self, ScriptError> {
        normalize_section_id(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for SectionId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Turns a section header or goto target into its canonical id.
///
/// Lowercases, trims, collapses each internal whitespace run into `_`, then
/// drops every character outside `[a-z0-9_]`.
pub fn normalize_section_id(raw: &str) -> Result<SectionId, ScriptError> {
    let lowered = raw.trim().to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut in_ws = false;
    for c in lowered.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push('_');
            }
            in_ws = true;
            continue;
        }
        in_ws = false;
        if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(ScriptError::EmptyId(raw.to_string()));
    }
    Ok(SectionId(out))
}

/// Where a speaker's text block sits around the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    North,
    East,
    South,
    West,
    Front,
    Right,
    Behind,
    Left,
}

impl Position {
    pub const ALL: [Position; 8] = [
        Position::North,
        Position::East,
        Position::South,
        Position::West,
        Position::Front,
        Position::Right,
        Position::Behind,
        Position::Left,
    ];

    /// Relative positions follow the reader's head; cardinals are fixed.
    pub fn is_relative(self) -> bool {
        matches!(
            self,
            Position::Front | Position::Right | Position::Behind | Position::Left
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Position::North => "north",
            Position::East => "east",
            Position::South => "south",
            Position::West => "west",
            Position::Front => "front",
            Position::Right => "right",
            Position::Behind => "behind",
            Position::Left => "left",
        }
    }
}

impl FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Position::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown position `{s}`"))
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Size {
    Small,
    Medium,
    Large,
}

impl Size {
    pub fn as_str(self) -> &'static str {
        match self {
            Size::Small => "small",
            Size::Medium => "medium",
            Size::Large => "large",
        }
    }
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(Size::Small),
            "medium" => Ok(Size::Medium),
            "large" => Ok(Size::Large),
            _ => Err(format!("unknown size `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Speaker {
    pub name: String,
    pub position: Position,
    pub style: String,
    pub size: Size,
    /// The implicit narrator owning sections that precede any declaration.
    pub builtin: bool,
    pub line: SourceLine,
}

impl Speaker {
    pub const BUILTIN_NAME: &'static str = "narrator";

    pub fn builtin() -> Self {
        Self {
            name: Self::BUILTIN_NAME.to_string(),
            position: Position::Front,
            style: "default".to_string(),
            size: Size::Medium,
            builtin: true,
            line: SourceLine(0),
        }
    }
}

/// `<signal>_<count>`, e.g. `breathVar_3`: fire after `count` deep cycles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub signal: String,
    pub count: u32,
}

impl FromStr for DetectorSpec {
    type Err = ScriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScriptError::BadDetector(s.to_string());
        let (signal, count) = s.rsplit_once('_').ok_or_else(bad)?;
        if signal.is_empty() || count.is_empty() || !count.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let count: u32 = count.parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(bad());
        }
        Ok(DetectorSpec {
            signal: signal.to_string(),
            count,
        })
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.signal, self.count)
    }
}

/// Predicate used by a conditional goto when the script names none.
pub const DEFAULT_PREDICATE: &str = "stressed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Directive {
    /// `timer:<ms> goto:<id>`
    TimerGoto { delay_ms: u64, target: SectionId },
    /// `bind:<ms>[:<predicate>] goto:<id>`
    ConditionalGoto {
        delay_ms: u64,
        predicate: String,
        target: SectionId,
    },
    /// `bind:goto:<id>` with no label: any span of the section selects it.
    SectionChoice { target: SectionId },
    /// `ex:<signal>_<n>:<source>:<id>`
    Expect {
        detector: DetectorSpec,
        source: String,
        target: SectionId,
    },
}

impl Directive {
    pub fn target(&self) -> &SectionId {
        match self {
            Directive::TimerGoto { target, .. }
            | Directive::ConditionalGoto { target, .. }
            | Directive::SectionChoice { target }
            | Directive::Expect { target, .. } => target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpanKind {
    Plain,
    Emphasis,
    Choice {
        target: SectionId,
    },
    Biofeedback {
        signal: String,
        style: String,
        /// Set for active biofeedback: names the detector fed by `signal`.
        detector_var: Option<String>,
    },
}

impl SpanKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpanKind::Plain => "plain",
            SpanKind::Emphasis => "emphasis",
            SpanKind::Choice { .. } => "choice",
            SpanKind::Biofeedback { .. } => "biofeedback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    /// `s<ordinal>`, unique and dense in document order.
    pub id: String,
    #[serde(flatten)]
    pub kind: SpanKind,
    pub text: String,
}

impl Span {
    pub fn is_active_biofeedback(&self) -> bool {
        matches!(
            self.kind,
            SpanKind::Biofeedback {
                detector_var: Some(_),
                ..
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum SectionItem {
    Directive {
        directive: Directive,
        line: SourceLine,
    },
    Paragraph {
        spans: Vec<Span>,
        line: SourceLine,
    },
}

impl SectionItem {
    pub fn line(&self) -> u32 {
        match self {
            SectionItem::Directive { line, .. } | SectionItem::Paragraph { line, .. } => line.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub id: SectionId,
    pub display_name: String,
    pub speaker: String,
    pub items: Vec<SectionItem>,
    pub line: SourceLine,
}

impl Section {
    pub fn directives(&self) -> impl Iterator<Item = (&Directive, u32)> {
        self.items.iter().filter_map(|item| match item {
            SectionItem::Directive { directive, line } => Some((directive, line.0)),
            SectionItem::Paragraph { .. } => None,
        })
    }

    pub fn spans(&self) -> impl Iterator<Item = (&Span, u32)> {
        self.items
            .iter()
            .filter_map(|item| match item {
                SectionItem::Paragraph { spans, line } => Some((spans, line.0)),
                SectionItem::Directive { .. } => None,
            })
            .flat_map(|(spans, line)| spans.iter().map(move |s| (s, line)))
    }

    pub fn span(&self, id: &str) -> Option<&Span> {
        self.spans().map(|(s, _)| s).find(|s| s.id == id)
    }

    /// Every section id this section can transition to, with the source line.
    pub fn targets(&self) -> Vec<(&SectionId, u32)> {
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                SectionItem::Directive { directive, line } => out.push((directive.target(), line.0)),
                SectionItem::Paragraph { spans, line } => {
                    for span in spans {
                        if let SpanKind::Choice { target } = &span.kind {
                            out.push((target, line.0));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub source_name: String,
    pub entry: SectionId,
    /// Built-in narrator first, then declarations in source order.
    pub speakers: Vec<Speaker>,
    pub sections: Vec<Section>,
}

impl Story {
    pub fn section(&self, id: &SectionId) -> Option<&Section> {
        self.sections.iter().find(|s| &s.id == id)
    }

    pub fn section_by_str(&self, id: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.id.as_str() == id)
    }

    pub fn speaker(&self, name: &str) -> Option<&Speaker> {
        self.speakers.iter().find(|s| s.name == name)
    }

    pub fn declared_speakers(&self) -> impl Iterator<Item = &Speaker> {
        self.speakers.iter().filter(|s| !s.builtin)
    }

    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        self.sections.iter().flat_map(|s| s.spans().map(|(span, _)| span))
    }

    /// Detector variable -> input signal, from active biofeedback spans.
    pub fn detector_bindings(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for span in self.spans() {
            if let SpanKind::Biofeedback {
                signal,
                detector_var: Some(var),
                ..
            } = &span.kind
            {
                if !out.iter().any(|(v, _)| v == var) {
                    out.push((var.clone(), signal.clone()));
                }
            }
        }
        out
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = name.into();
        self
    }
}
