mod common;

use proptest::prelude::*;
use vif_core::physio::{stress_index, BreathDetectorState, BreathThresholds, StressParams};
use vif_core::script::{normalize_section_id, parse_script, serialize_story, Position};
use vif_core::session::{decode_client_message, encode_client_message, ClientMessage};
use vif_core::spatial::{angular_distance, normalize_yaw, resolve_block_yaw, update_view, BlockPlacement, ViewChange};

fn word() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9,']{0,8}"
}

fn position() -> impl Strategy<Value = Position> {
    proptest::sample::select(Position::ALL.to_vec())
}

/// A random lint-clean story built from the grammar's pieces.
fn story_source() -> impl Strategy<Value = String> {
    (2usize..6, prop::collection::vec((word(), word(), 0u8..6, any::<bool>()), 2..6), position())
        .prop_map(|(n, lines, pos)| {
            let n = n.min(lines.len());
            let mut out = String::from("#ACTIVATE: sec_0\n");
            out.push_str(&format!("* Voice @{}:#default:#medium:\n", pos.as_str()));
            for (i, (a, b, kind, flag)) in lines.iter().take(n).enumerate() {
                let next = (i + 1) % n;
                out.push_str(&format!("* Sec {i}\n"));
                match kind {
                    0 => out.push_str(&format!("timer:{} goto:sec_{next}\n", 100 * (i + 1))),
                    1 => out.push_str(&format!("bind:{} goto:sec_{next}\n", 50 * (i + 1))),
                    2 => out.push_str(&format!("bind:goto:sec_{next}\n")),
                    3 => out.push_str(&format!("ex:breath_{}:bits:sec_{next}\n", i + 1)),
                    _ => {}
                }
                let extra = match kind {
                    4 => format!(" bind:goto:sec_{next}:{b}."),
                    5 => format!(" bind:heart:heartstyle:{b}"),
                    _ if *flag => format!(" /{b}/"),
                    _ => String::new(),
                };
                out.push_str(&format!("{a}{extra} end\n"));
            }
            out
        })
}

proptest! {
    #[test]
    fn normalize_is_idempotent(raw in "[ -~]{0,24}") {
        if let Ok(id) = normalize_section_id(&raw) {
            let again = normalize_section_id(id.as_str()).unwrap();
            prop_assert_eq!(again, id);
        }
    }

    #[test]
    fn generated_stories_round_trip(src in story_source()) {
        let first = parse_script(&src).unwrap().story;
        let text = serialize_story(&first);
        let second = parse_script(&text).unwrap().story;
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(serialize_story(&second), text);
    }

    #[test]
    fn angular_distance_is_a_circle_metric(a in -1e4..1e4f64, b in -1e4..1e4f64, k in -5i32..5) {
        let d = angular_distance(a, b);
        prop_assert!((0.0..=180.0).contains(&d));
        prop_assert!((d - angular_distance(b, a)).abs() < 1e-9);
        prop_assert!((d - angular_distance(a + 360.0 * k as f64, b)).abs() < 1e-6);
        prop_assert!(angular_distance(a, a) < 1e-9);
    }

    #[test]
    fn relative_positions_follow_the_player(pos in position(), yaw in 0.0..360.0f64, shift in 0.0..360.0f64) {
        let base = resolve_block_yaw(pos, yaw);
        let moved = resolve_block_yaw(pos, yaw + shift);
        let expected = if pos.is_relative() { normalize_yaw(base + shift) } else { base };
        prop_assert!(angular_distance(moved, expected) < 1e-9);
    }

    #[test]
    fn view_changes_alternate(block in 0.0..360.0f64, fov in 1.0..179.0f64, yaws in prop::collection::vec(-720.0..720.0f64, 1..60)) {
        let mut blocks = [BlockPlacement::new("x", block, fov, 0.0)];
        let mut visible = blocks[0].visible;
        for (t, yaw) in yaws.into_iter().enumerate() {
            for change in update_view(&mut blocks, yaw, t as u64) {
                let entered = matches!(change, ViewChange::Entered { .. });
                prop_assert_ne!(entered, visible);
                visible = entered;
            }
            prop_assert_eq!(visible, blocks[0].in_view(yaw));
        }
    }

    #[test]
    fn stress_is_monotone(hr in 30.0..200.0f64, br in 2.0..60.0f64, dh in 0.0..50.0f64, db in 0.0..20.0f64) {
        let p = StressParams::default();
        let s = stress_index(hr, br, &p);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(stress_index(hr + dh, br + db, &p) >= s);
    }

    #[test]
    fn breath_detector_matches_oracle(values in prop::collection::vec(-0.2..1.2f64, 0..300)) {
        let t = BreathThresholds::default();
        let mut d = BreathDetectorState::new(t);
        let streamed = values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| d.step(i as u64 * 100, *v))
            .filter(|c| c.amplitude >= t.deep)
            .count() as u32;
        prop_assert_eq!(streamed, common::oracle_deep_cycles(&values, t.hi, t.lo, t.deep));
    }

    #[test]
    fn detector_is_deterministic(values in prop::collection::vec(0.0..1.0f64, 0..200)) {
        let run = || {
            let mut d = BreathDetectorState::default();
            values.iter().enumerate().filter_map(|(i, v)| d.step(i as u64, *v)).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn client_messages_round_trip(deg in -1e6..1e6f64, span in proptest::option::of("s[0-9]{1,3}"), which in 0u8..3) {
        let msg = match which {
            0 => ClientMessage::Yaw { deg },
            1 => ClientMessage::Hover { span },
            _ => ClientMessage::Hello { protocol_version: 1 },
        };
        let text = encode_client_message(&msg);
        let back = decode_client_message(&text).unwrap();
        prop_assert_eq!(&back, &msg);
        prop_assert_eq!(encode_client_message(&back), text);
    }
}
