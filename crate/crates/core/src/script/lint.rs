use std::collections::{HashSet, VecDeque};

use super::model::{Directive, SectionId, SpanKind, Story};
use super::{codes, Diagnostic};

/// Signals the engine always knows how to produce.
pub const BUILTIN_SIGNALS: [&str; 4] = ["breath", "heart", "breathVar", "stress"];

/// Authoring checks over a parsed story.
///
/// E001 dangling target, W001 unreachable section, W002 empty choice label,
/// W003 biofeedback signal nobody produces, W004 speaker without sections.
pub fn lint_story(story: &Story) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let ids: HashSet<&SectionId> = story.sections.iter().map(|s| &s.id).collect();

    for section in &story.sections {
        for (target, line) in section.targets() {
            if !ids.contains(target) {
                out.push(Diagnostic::error(
                    codes::DANGLING_TARGET,
                    line,
                    format!("`{}` jumps to unknown section `{target}`", section.id),
                ));
            }
        }
    }

    let mut seen: HashSet<&SectionId> = HashSet::new();
    let mut queue = VecDeque::from([&story.entry]);
    while let Some(id) = queue.pop_front() {
        if !seen.insert(id) {
            continue;
        }
        if let Some(section) = story.section(id) {
            queue.extend(section.targets().into_iter().map(|(t, _)| t));
        }
    }
    for section in &story.sections {
        if !seen.contains(&section.id) {
            out.push(Diagnostic::warning(
                codes::UNREACHABLE,
                section.line.0,
                format!("section `{}` is unreachable from `{}`", section.id, story.entry),
            ));
        }
    }

    let mut produced: HashSet<&str> = BUILTIN_SIGNALS.into_iter().collect();
    for section in &story.sections {
        for (directive, _) in section.directives() {
            if let Directive::Expect { detector, .. } = directive {
                produced.insert(detector.signal.as_str());
            }
        }
    }

    for section in &story.sections {
        for (span, line) in section.spans() {
            match &span.kind {
                SpanKind::Choice { target } if span.text.trim().is_empty() => {
                    out.push(Diagnostic::warning(
                        codes::EMPTY_CHOICE_LABEL,
                        line,
                        format!("choice to `{target}` has an empty label"),
                    ));
                }
                SpanKind::Biofeedback { signal, .. } if !produced.contains(signal.as_str()) => {
                    out.push(Diagnostic::warning(
                        codes::UNKNOWN_SIGNAL,
                        line,
                        format!("signal `{signal}` is never produced"),
                    ));
                }
                _ => {}
            }
        }
    }

    for speaker in story.declared_speakers() {
        if !story.sections.iter().any(|s| s.speaker == speaker.name) {
            out.push(Diagnostic::warning(
                codes::IDLE_SPEAKER,
                speaker.line.0,
                format!("speaker `{}` owns no sections", speaker.name),
            ));
        }
    }

    out.sort_by_key(|d| d.line);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::parse_script;

    fn lint(src: &str) -> Vec<(String, u32)> {
        let story = parse_script(src).unwrap().story;
        lint_story(&story)
            .into_iter()
            .map(|d| (d.code, d.line))
            .collect()
    }

    #[test]
    fn clean_story() {
        assert!(lint("#ACTIVATE: a\n* a\nbind:goto:b\n* b\nbye").is_empty());
    }

    #[test]
    fn dangling_target() {
        assert_eq!(
            lint("#ACTIVATE: a\n* a\ntimer:10 goto:nowhere\n"),
            vec![("E001".to_string(), 3)]
        );
    }

    #[test]
    fn unreachable_orphan() {
        assert_eq!(
            lint("#ACTIVATE: a\n* a\nhi\n* orphan\nlost\n"),
            vec![("W001".to_string(), 4)]
        );
    }

    #[test]
    fn empty_label_and_unknown_signal() {
        let found = lint("#ACTIVATE: a\n* a\nPick bind:goto:a:\nbind:eeg:calm:focus\n");
        assert_eq!(
            found,
            vec![("W002".to_string(), 3), ("W003".to_string(), 4)]
        );
    }

    #[test]
    fn expect_declares_signal() {
        let found = lint("#ACTIVATE: a\n* a\nex:eeg_1:src:a\nbind:eeg:calm:focus\n");
        assert!(found.is_empty(), "{found:?}");
    }

    #[test]
    fn idle_speaker() {
        assert_eq!(
            lint("#ACTIVATE: a\n* a\nhi\n* Ghost @west:#g:#small:\n"),
            vec![("W004".to_string(), 4)]
        );
    }
}
