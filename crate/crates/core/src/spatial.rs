//! Yaw placement of text blocks, field-of-view visibility and dwell
//! selection. Angles are degrees; only the horizontal plane is modelled.

use serde::{Deserialize, Serialize};

use crate::script::Position;

pub const DEFAULT_HALF_FOV: f64 = 45.0;
pub const DEFAULT_DWELL_MS: u64 = 1000;

/// Wraps any angle into `[0, 360)`.
pub fn normalize_yaw(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Absolute yaw of a block. Cardinals are fixed (north = 0, clockwise);
/// relative positions are offsets from the reader's yaw at activation.
pub fn resolve_block_yaw(position: Position, player_yaw_at_activation: f64) -> f64 {
    let base = if position.is_relative() {
        player_yaw_at_activation
    } else {
        0.0
    };
    let offset = match position {
        Position::North | Position::Front => 0.0,
        Position::East | Position::Right => 90.0,
        Position::South | Position::Behind => 180.0,
        Position::West | Position::Left => 270.0,
    };
    normalize_yaw(base + offset)
}

/// Shortest angle between two headings, in `[0, 180]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = normalize_yaw(a - b);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlacement {
    pub speaker: String,
    pub yaw: f64,
    pub half_fov: f64,
    pub visible: bool,
}

impl BlockPlacement {
    pub fn new(speaker: impl Into<String>, yaw: f64, half_fov: f64, player_yaw: f64) -> Self {
        let yaw = normalize_yaw(yaw);
        Self {
            speaker: speaker.into(),
            yaw,
            half_fov,
            visible: angular_distance(yaw, player_yaw) <= half_fov,
        }
    }

    pub fn in_view(&self, player_yaw: f64) -> bool {
        angular_distance(self.yaw, player_yaw) <= self.half_fov
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewChange {
    Entered { speaker: String, t: u64 },
    Exited { speaker: String, t: u64 },
}

/// Recomputes visibility for every block and reports each flag flip.
pub fn update_view(placements: &mut [BlockPlacement], player_yaw: f64, now: u64) -> Vec<ViewChange> {
    let mut out = Vec::new();
    for p in placements.iter_mut() {
        let visible = p.in_view(player_yaw);
        if visible == p.visible {
            continue;
        }
        p.visible = visible;
        let speaker = p.speaker.clone();
        out.push(if visible {
            ViewChange::Entered { speaker, t: now }
        } else {
            ViewChange::Exited { speaker, t: now }
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionFired {
    pub span_id: String,
}

/// Head yaw plus the hover/dwell timer. The client reports hover; the
/// engine owns the clock so selections are replayable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeState {
    pub player_yaw: f64,
    pub hovered_span: Option<String>,
    pub hover_since: Option<u64>,
    pub dwell_threshold_ms: u64,
    /// The current hover episode already produced its selection.
    fired: bool,
}

impl Default for GazeState {
    fn default() -> Self {
        Self::new(DEFAULT_DWELL_MS)
    }
}

impl GazeState {
    pub fn new(dwell_threshold_ms: u64) -> Self {
        Self {
            player_yaw: 0.0,
            hovered_span: None,
            hover_since: None,
            dwell_threshold_ms,
            fired: false,
        }
    }

    /// Records a hover report. Re-reporting the span already hovered keeps
    /// the running timer; anything else starts a new episode.
    pub fn hover(&mut self, span: Option<&str>, t: u64) {
        if span == self.hovered_span.as_deref() {
            return;
        }
        self.hovered_span = span.map(str::to_string);
        self.hover_since = span.map(|_| t);
        self.fired = false;
    }

    pub fn clear_hover(&mut self) {
        self.hovered_span = None;
        self.hover_since = None;
        self.fired = false;
    }

    pub fn poll(&mut self, now: u64) -> Option<SelectionFired> {
        let (span, since) = (self.hovered_span.as_ref()?, self.hover_since?);
        if self.fired || now.saturating_sub(since) < self.dwell_threshold_ms || now < since {
            return None;
        }
        self.fired = true;
        Some(SelectionFired {
            span_id: span.clone(),
        })
    }

    pub fn update_dwell(&mut self, hover_input: Option<(Option<&str>, u64)>, now: u64) -> Option<SelectionFired> {
        if let Some((span, t)) = hover_input {
            self.hover(span, t);
        }
        self.poll(now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinal_and_relative_yaw() {
        assert_eq!(resolve_block_yaw(Position::North, 123.0), 0.0);
        assert_eq!(resolve_block_yaw(Position::South, 42.0), 180.0);
        assert_eq!(resolve_block_yaw(Position::Behind, 30.0), 210.0);
        assert_eq!(resolve_block_yaw(Position::Left, 100.0), 10.0);
        assert_eq!(resolve_block_yaw(Position::Front, 359.5), 359.5);
    }

    #[test]
    fn distances() {
        assert_eq!(angular_distance(0.0, 0.0), 0.0);
        assert_eq!(angular_distance(350.0, 10.0), 20.0);
        assert_eq!(angular_distance(0.0, 180.0), 180.0);
        assert_eq!(angular_distance(-90.0, 90.0), 180.0);
        assert_eq!(normalize_yaw(-1e-20), 0.0);
    }

    #[test]
    fn view_events() {
        let mut blocks = vec![BlockPlacement::new("Bob", 170.0, 45.0, 0.0)];
        assert!(!blocks[0].visible);
        assert!(update_view(&mut blocks, 0.0, 0).is_empty());
        assert_eq!(
            update_view(&mut blocks, 150.0, 10),
            vec![ViewChange::Entered {
                speaker: "Bob".into(),
                t: 10
            }]
        );
        let mut kinds = Vec::new();
        for (i, yaw) in [0.0, 150.0].into_iter().enumerate() {
            kinds.extend(update_view(&mut blocks, yaw, 20 + i as u64));
        }
        assert_eq!(kinds.len(), 2);
        assert!(matches!(kinds[0], ViewChange::Exited { .. }));
        assert!(matches!(kinds[1], ViewChange::Entered { .. }));
    }

    #[test]
    fn dwell_boundary() {
        let mut g = GazeState::new(1000);
        g.hover(Some("s3"), 0);
        assert_eq!(g.poll(999), None);
        assert_eq!(
            g.poll(1000),
            Some(SelectionFired {
                span_id: "s3".into()
            })
        );
        assert_eq!(g.poll(5000), None);
    }

    #[test]
    fn dwell_resets_on_new_span() {
        let mut g = GazeState::new(1000);
        assert_eq!(g.update_dwell(Some((Some("s3"), 0)), 0), None);
        assert_eq!(g.update_dwell(Some((Some("s4"), 500)), 500), None);
        assert_eq!(g.update_dwell(None, 1400), None);
        assert_eq!(
            g.update_dwell(None, 1500),
            Some(SelectionFired {
                span_id: "s4".into()
            })
        );
    }

    #[test]
    fn dwell_refires_only_after_leaving() {
        let mut g = GazeState::new(100);
        g.hover(Some("s1"), 0);
        assert!(g.poll(100).is_some());
        g.hover(Some("s1"), 150);
        assert!(g.poll(400).is_none());
        g.hover(None, 450);
        g.hover(Some("s1"), 500);
        assert!(g.poll(600).is_some());
    }

    #[test]
    fn no_hover_never_fires() {
        let mut g = GazeState::default();
        for t in (0..10_000).step_by(50) {
            assert!(g.update_dwell(Some((None, t)), t).is_none());
        }
    }
}
