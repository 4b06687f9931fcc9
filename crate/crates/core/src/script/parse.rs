use std::collections::HashSet;

use super::model::*;
use super::{codes, Diagnostic, ScriptError};

/// A span before it has been given its story-wide id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub kind: SpanKind,
    pub text: String,
}

impl Piece {
    fn plain(text: &str) -> Self {
        Piece {
            kind: SpanKind::Plain,
            text: text.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedDirective {
    Directive(Directive),
    Span(Piece),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub story: Story,
    /// Non-fatal findings (warnings only).
    pub diagnostics: Vec<Diagnostic>,
}

const HEADS: [&str; 3] = ["bind:", "timer:", "ex:"];
const TRAILING_PUNCT: [char; 6] = ['.', ',', ';', ':', '!', '?'];

fn split_head(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    }
}

fn parse_delay(digits: &str, raw: &str) -> Result<u64, ScriptError> {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ScriptError::BadInteger(raw.to_string()));
    }
    digits
        .parse()
        .map_err(|_| ScriptError::BadInteger(raw.to_string()))
}

fn parse_goto(tail: &str, raw: &str) -> Result<SectionId, ScriptError> {
    let tail = tail.trim();
    match tail.strip_prefix("goto:") {
        Some(id) if !id.is_empty() && !id.contains(char::is_whitespace) => normalize_section_id(id),
        _ => Err(ScriptError::MalformedDirective(raw.to_string())),
    }
}

fn token_ok(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace)
}

/// Parses one complete directive, e.g. `timer:2000 goto:bob_awaits` or
/// `bind:heart:heartstyle:heartbeat`.
///
/// Inline forms (choice and biofeedback) come back as span pieces; for a
/// choice the whole remainder after `bind:goto:<id>:` is the label.
pub fn parse_directive(raw: &str) -> Result<ParsedDirective, ScriptError> {
    let raw = raw.trim();
    let malformed = || ScriptError::MalformedDirective(raw.to_string());

    if let Some(rest) = raw.strip_prefix("timer:") {
        let (delay, tail) = split_head(rest);
        let delay_ms = parse_delay(delay, raw)?;
        let target = parse_goto(tail, raw)?;
        return Ok(ParsedDirective::Directive(Directive::TimerGoto {
            delay_ms,
            target,
        }));
    }

    if let Some(rest) = raw.strip_prefix("ex:") {
        if rest.contains(char::is_whitespace) {
            return Err(malformed());
        }
        let fields: Vec<&str> = rest.split(':').collect();
        let [detector, source, target] = fields[..] else {
            return Err(malformed());
        };
        if source.is_empty() || target.is_empty() {
            return Err(malformed());
        }
        return Ok(ParsedDirective::Directive(Directive::Expect {
            detector: detector.parse()?,
            source: source.to_string(),
            target: normalize_section_id(target)?,
        }));
    }

    let Some(rest) = raw.strip_prefix("bind:") else {
        return Err(malformed());
    };

    if rest.starts_with(|c: char| c.is_ascii_digit()) {
        let (head, tail) = split_head(rest);
        let (delay, predicate) = head.split_once(':').unwrap_or((head, DEFAULT_PREDICATE));
        let delay_ms = parse_delay(delay, raw)?;
        if predicate.is_empty() {
            return Err(malformed());
        }
        let target = parse_goto(tail, raw)?;
        return Ok(ParsedDirective::Directive(Directive::ConditionalGoto {
            delay_ms,
            predicate: predicate.to_string(),
            target,
        }));
    }

    if let Some(after) = rest.strip_prefix("goto:") {
        return match after.split_once(':') {
            None if token_ok(after) => Ok(ParsedDirective::Directive(Directive::SectionChoice {
                target: normalize_section_id(after)?,
            })),
            None => Err(malformed()),
            Some((id, label)) if token_ok(id) => Ok(ParsedDirective::Span(Piece {
                kind: SpanKind::Choice {
                    target: normalize_section_id(id)?,
                },
                text: label.to_string(),
            })),
            Some(_) => Err(malformed()),
        };
    }

    let fields: Vec<&str> = rest.split(':').collect();
    let (signal, style, detector_var, display) = if fields.len() >= 5 && fields[2] == "ac" {
        (fields[0], fields[1], Some(fields[3]), fields[4..].join(":"))
    } else if fields.len() >= 3 {
        (fields[0], fields[1], None, fields[2..].join(":"))
    } else {
        return Err(malformed());
    };
    if !token_ok(signal) || !token_ok(style) || display.is_empty() {
        return Err(malformed());
    }
    if detector_var.is_some_and(|v| !token_ok(v)) {
        return Err(malformed());
    }
    Ok(ParsedDirective::Span(Piece {
        kind: SpanKind::Biofeedback {
            signal: signal.to_string(),
            style: style.to_string(),
            detector_var: detector_var.map(str::to_string),
        },
        text: display,
    }))
}

/// Token that may appear on a standalone directive line.
fn is_fragment(tok: &str) -> bool {
    if tok.starts_with("timer:") || tok.starts_with("ex:") || tok.starts_with("goto:") {
        return true;
    }
    match tok.strip_prefix("bind:") {
        Some(r) if r.starts_with(|c: char| c.is_ascii_digit()) => true,
        Some(r) => r.strip_prefix("goto:").is_some_and(|id| !id.contains(':')),
        None => false,
    }
}

fn parse_directive_line(tokens: &[&str]) -> Result<Vec<Directive>, ScriptError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        let delayed = tok.starts_with("timer:")
            || tok
                .strip_prefix("bind:")
                .is_some_and(|r| r.starts_with(|c: char| c.is_ascii_digit()));
        let raw = if delayed {
            let Some(next) = tokens.get(i + 1).filter(|t| t.starts_with("goto:")) else {
                return Err(ScriptError::MalformedDirective(tok.to_string()));
            };
            i += 2;
            format!("{tok} {next}")
        } else {
            i += 1;
            tok.to_string()
        };
        match parse_directive(&raw)? {
            ParsedDirective::Directive(d) => out.push(d),
            ParsedDirective::Span(_) => return Err(ScriptError::MalformedDirective(raw)),
        }
    }
    Ok(out)
}

/// Result of splitting one body line into span pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub pieces: Vec<Piece>,
    /// An odd `/` was left as plain text.
    pub unterminated_emphasis: bool,
}

fn push_plain(pieces: &mut Vec<Piece>, text: &str, unterminated: &mut bool) {
    if text.is_empty() {
        return;
    }
    let slashes: Vec<usize> = text.match_indices('/').map(|(i, _)| i).collect();
    if slashes.len() % 2 == 1 {
        *unterminated = true;
    }
    let mut cursor = 0;
    for pair in slashes.chunks_exact(2) {
        let (open, close) = (pair[0], pair[1]);
        if open > cursor {
            pieces.push(Piece::plain(&text[cursor..open]));
        }
        pieces.push(Piece {
            kind: SpanKind::Emphasis,
            text: text[open + 1..close].to_string(),
        });
        cursor = close + 1;
    }
    if cursor < text.len() {
        pieces.push(Piece::plain(&text[cursor..]));
    }
}

fn starts_directive(rest: &str) -> bool {
    HEADS.iter().any(|h| {
        rest.strip_prefix(h)
            .is_some_and(|r| r.starts_with(|c: char| !c.is_whitespace()))
    })
}

/// Scans the inline directive at the start of `rest`; returns the bytes it
/// consumed and the resulting span piece.
fn scan_inline(rest: &str) -> Result<(usize, Piece), ScriptError> {
    let (token, _) = split_head(rest);
    let standalone_only = || {
        ScriptError::MalformedDirective(format!("{token} (must stand on its own line)"))
    };
    if rest.starts_with("timer:") || rest.starts_with("ex:") || is_fragment(token) {
        return Err(standalone_only());
    }
    if let Some(after) = rest.strip_prefix("bind:goto:") {
        let id_len = after.find(':').ok_or_else(standalone_only)?;
        let label_start = "bind:goto:".len() + id_len + 1;
        let end = rest[label_start..]
            .find('.')
            .map(|i| label_start + i + 1)
            .unwrap_or(rest.len());
        let ParsedDirective::Span(piece) = parse_directive(&rest[..end])? else {
            return Err(standalone_only());
        };
        return Ok((end, piece));
    }
    let display = token.trim_end_matches(TRAILING_PUNCT);
    match parse_directive(display)? {
        ParsedDirective::Span(piece) => Ok((display.len(), piece)),
        ParsedDirective::Directive(_) => Err(standalone_only()),
    }
}

/// Splits a paragraph line into plain text, `/emphasis/` and inline
/// directive spans, in source order.
pub fn extract_spans(body_line: &str) -> Result<Extracted, ScriptError> {
    let mut pieces = Vec::new();
    let mut unterminated = false;
    let mut plain_start = 0;
    let mut i = 0;
    let mut prev_ws = true;
    while i < body_line.len() {
        let rest = &body_line[i..];
        if prev_ws && starts_directive(rest) {
            push_plain(&mut pieces, &body_line[plain_start..i], &mut unterminated);
            let (len, piece) = scan_inline(rest)?;
            pieces.push(piece);
            i += len;
            plain_start = i;
            prev_ws = false;
            continue;
        }
        let c = rest.chars().next().expect("non-empty");
        prev_ws = c.is_whitespace();
        i += c.len_utf8();
    }
    push_plain(&mut pieces, &body_line[plain_start..], &mut unterminated);
    Ok(Extracted {
        pieces,
        unterminated_emphasis: unterminated,
    })
}

enum Open {
    Nothing,
    Section(usize),
    /// Body lines of a rejected section header are skipped silently.
    Discard,
}

fn parse_speaker(header: &str, line: u32) -> Result<Speaker, String> {
    let (name, spec) = header.split_once('@').expect("caller checked for '@'");
    let name = name.trim();
    if name.is_empty() {
        return Err("speaker name is empty".into());
    }
    let spec = spec.trim();
    let spec = spec.strip_suffix(':').unwrap_or(spec);
    let fields: Vec<&str> = spec.split(':').collect();
    let [position, style, size] = fields[..] else {
        return Err(format!("expected @<position>:#<style>:#<size>:, got `@{spec}`"));
    };
    let position: Position = position.trim().parse()?;
    let style = style
        .trim()
        .strip_prefix('#')
        .filter(|s| token_ok(s))
        .ok_or_else(|| format!("bad style `{style}`"))?;
    let size: Size = size
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| format!("bad size `{size}`"))?
        .parse()?;
    Ok(Speaker {
        name: name.to_string(),
        position,
        style: style.to_string(),
        size,
        builtin: false,
        line: SourceLine(line),
    })
}

/// Parses a whole script. Any error-level diagnostic rejects the script
/// with [`ScriptError::Rejected`]; warnings ride along with the story.
pub fn parse_script(source: &str) -> Result<Parsed, ScriptError> {
    let source = source.strip_prefix('\u{feff}').unwrap_or(source);
    let mut diags = Vec::new();
    let mut entry: Option<(SectionId, u32)> = None;
    let mut speakers = vec![Speaker::builtin()];
    let mut sections: Vec<Section> = Vec::new();
    let mut section_ids: HashSet<SectionId> = HashSet::new();
    let mut current_speaker = Speaker::BUILTIN_NAME.to_string();
    let mut open = Open::Nothing;
    let mut span_count = 0usize;

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }

        if let Some(rest) = t.strip_prefix("#ACTIVATE:") {
            match normalize_section_id(rest) {
                Ok(_) if entry.is_some() => diags.push(Diagnostic::error(
                    codes::DUPLICATE_ENTRY,
                    line_no,
                    "entry point declared more than once",
                )),
                Ok(id) => entry = Some((id, line_no)),
                Err(e) => diags.push(Diagnostic::error(e.code(), line_no, e.to_string())),
            }
            continue;
        }
        if t.starts_with('#') {
            continue;
        }

        if let Some(header) = t.strip_prefix('*') {
            let header = header.trim();
            if header.contains('@') {
                match parse_speaker(header, line_no) {
                    Ok(sp) if speakers.iter().any(|s| s.name == sp.name) => {
                        diags.push(Diagnostic::error(
                            codes::DUPLICATE_SPEAKER,
                            line_no,
                            format!("speaker `{}` declared twice", sp.name),
                        ));
                    }
                    Ok(sp) => {
                        current_speaker = sp.name.clone();
                        speakers.push(sp);
                    }
                    Err(msg) => diags.push(Diagnostic::error(codes::BAD_SPEAKER, line_no, msg)),
                }
                continue;
            }
            match normalize_section_id(header) {
                Ok(id) if section_ids.contains(&id) => {
                    diags.push(Diagnostic::error(
                        codes::DUPLICATE_SECTION,
                        line_no,
                        format!("section `{id}` defined twice"),
                    ));
                    open = Open::Discard;
                }
                Ok(id) => {
                    section_ids.insert(id.clone());
                    sections.push(Section {
                        id,
                        display_name: header.to_string(),
                        speaker: current_speaker.clone(),
                        items: Vec::new(),
                        line: SourceLine(line_no),
                    });
                    open = Open::Section(sections.len() - 1);
                }
                Err(e) => {
                    diags.push(Diagnostic::error(e.code(), line_no, e.to_string()));
                    open = Open::Discard;
                }
            }
            continue;
        }

        let section = match open {
            Open::Section(i) => &mut sections[i],
            Open::Discard => continue,
            Open::Nothing => {
                diags.push(Diagnostic::error(
                    codes::BODY_OUTSIDE_SECTION,
                    line_no,
                    "body text before any section",
                ));
                continue;
            }
        };

        let tokens: Vec<&str> = t.split_whitespace().collect();
        if tokens.iter().all(|tok| is_fragment(tok)) {
            match parse_directive_line(&tokens) {
                Ok(directives) => section.items.extend(directives.into_iter().map(|directive| {
                    SectionItem::Directive {
                        directive,
                        line: SourceLine(line_no),
                    }
                })),
                Err(e) => diags.push(Diagnostic::error(e.code(), line_no, e.to_string())),
            }
            continue;
        }

        match extract_spans(t) {
            Ok(extracted) => {
                if extracted.unterminated_emphasis {
                    diags.push(Diagnostic::warning(
                        codes::UNTERMINATED_EMPHASIS,
                        line_no,
                        "unmatched `/` kept as plain text",
                    ));
                }
                let spans = extracted
                    .pieces
                    .into_iter()
                    .map(|p| {
                        span_count += 1;
                        Span {
                            id: format!("s{span_count}"),
                            kind: p.kind,
                            text: p.text,
                        }
                    })
                    .collect();
                section.items.push(SectionItem::Paragraph {
                    spans,
                    line: SourceLine(line_no),
                });
            }
            Err(e) => diags.push(Diagnostic::error(e.code(), line_no, e.to_string())),
        }
    }

    let entry = match entry {
        None => {
            diags.push(Diagnostic::error(
                codes::NO_ENTRY_POINT,
                1,
                "missing `#ACTIVATE: <section>`",
            ));
            None
        }
        Some((id, line)) if !section_ids.contains(&id) => {
            diags.push(Diagnostic::error(
                codes::UNKNOWN_ENTRY,
                line,
                format!("entry section `{id}` does not exist"),
            ));
            None
        }
        Some((id, _)) => Some(id),
    };

    match entry {
        Some(entry) if !diags.iter().any(Diagnostic::is_error) => Ok(Parsed {
            story: Story {
                source_name: String::new(),
                entry,
                speakers,
                sections,
            },
            diagnostics: diags,
        }),
        _ => Err(ScriptError::Rejected(diags)),
    }
}
