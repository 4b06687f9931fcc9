use std::fmt::Write;

use super::model::*;

fn write_directive(out: &mut String, directive: &Directive) {
    match directive {
        Directive::TimerGoto { delay_ms, target } => {
            let _ = write!(out, "timer:{delay_ms} goto:{target}");
        }
        Directive::ConditionalGoto {
            delay_ms,
            predicate,
            target,
        } if predicate == DEFAULT_PREDICATE => {
            let _ = write!(out, "bind:{delay_ms} goto:{target}");
        }
        Directive::ConditionalGoto {
            delay_ms,
            predicate,
            target,
        } => {
            let _ = write!(out, "bind:{delay_ms}:{predicate} goto:{target}");
        }
        Directive::SectionChoice { target } => {
            let _ = write!(out, "bind:goto:{target}");
        }
        Directive::Expect {
            detector,
            source,
            target,
        } => {
            let _ = write!(out, "ex:{detector}:{source}:{target}");
        }
    }
}

fn write_span(out: &mut String, span: &Span) {
    match &span.kind {
        SpanKind::Plain => out.push_str(&span.text),
        SpanKind::Emphasis => {
            let _ = write!(out, "/{}/", span.text);
        }
        SpanKind::Choice { target } => {
            let _ = write!(out, "bind:goto:{target}:{}", span.text);
        }
        SpanKind::Biofeedback {
            signal,
            style,
            detector_var: None,
        } => {
            let _ = write!(out, "bind:{signal}:{style}:{}", span.text);
        }
        SpanKind::Biofeedback {
            signal,
            style,
            detector_var: Some(var),
        } => {
            let _ = write!(out, "bind:{signal}:{style}:ac:{var}:{}", span.text);
        }
    }
}

/// Emits the canonical markup for a story: entry line, then each speaker's
/// declaration followed by the sections it owns. Comments are not kept.
pub fn serialize_story(story: &Story) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#ACTIVATE: {}", story.entry);
    for speaker in &story.speakers {
        if !speaker.builtin {
            let _ = writeln!(
                out,
                "* {} @{}:#{}:#{}:",
                speaker.name,
                speaker.position,
                speaker.style,
                speaker.size.as_str()
            );
        }
        for section in story.sections.iter().filter(|s| s.speaker == speaker.name) {
            let _ = writeln!(out, "* {}", section.display_name);
            for item in &section.items {
                match item {
                    SectionItem::Directive { directive, .. } => write_directive(&mut out, directive),
                    SectionItem::Paragraph { spans, .. } => {
                        for span in spans {
                            write_span(&mut out, span);
                        }
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}
