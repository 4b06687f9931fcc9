use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const HEART_WINDOW_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("beat at {t} ms does not follow previous beat at {previous} ms")]
pub struct NonMonotonicBeat {
    pub t: u64,
    pub previous: u64,
}

/// Sliding window of beat times.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HeartState {
    beat_times: VecDeque<u64>,
}

impl HeartState {
    pub fn push_beat(&mut self, t: u64) -> Result<(), NonMonotonicBeat> {
        if let Some(&previous) = self.beat_times.back() {
            if t <= previous {
                return Err(NonMonotonicBeat { t, previous });
            }
        }
        self.beat_times.push_back(t);
        let horizon = t.saturating_sub(HEART_WINDOW_MS);
        while self.beat_times.front().is_some_and(|&b| b < horizon) {
            self.beat_times.pop_front();
        }
        Ok(())
    }

    pub fn beats(&self) -> impl Iterator<Item = u64> + '_ {
        self.beat_times.iter().copied()
    }

    pub fn last_beat(&self) -> Option<u64> {
        self.beat_times.back().copied()
    }

    /// Beats per minute from the mean inter-beat interval over the last
    /// ten seconds; `None` with fewer than two beats in that window.
    pub fn heart_rate(&self, now: u64) -> Option<f64> {
        let from = now.saturating_sub(HEART_WINDOW_MS);
        let mut in_window = self.beat_times.iter().filter(|&&b| b >= from && b <= now);
        let first = *in_window.next()?;
        let (count, last) = in_window.fold((1u64, first), |(n, _), &b| (n + 1, b));
        if count < 2 {
            return None;
        }
        let mean_ibi = (last - first) as f64 / (count - 1) as f64;
        Some(60_000.0 / mean_ibi)
    }
}
