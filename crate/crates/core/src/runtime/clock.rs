//! Virtual day/night cycle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// Position in the game day. `fraction` 0 is midnight, 0.5 is noon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameTime {
    pub fraction: f64,
    pub sun_azimuth: f64,
    pub sun_elevation: f64,
    pub night: bool,
}

impl GameTime {
    pub fn from_fraction(fraction: f64) -> Self {
        let fraction = fraction.rem_euclid(1.0);
        let fraction = if fraction >= 1.0 { 0.0 } else { fraction };
        // Same curve as -90·cos(2π·f), written so sunrise and sunset land on
        // an exact zero.
        let sun_elevation = 90.0 * (TAU * (fraction - 0.25)).sin();
        Self {
            fraction,
            sun_azimuth: 360.0 * fraction,
            sun_elevation,
            night: sun_elevation < 0.0,
        }
    }
}

/// `((now−epoch)/1000 + start_fraction·D) mod D / D` with `D` the length of
/// a game day in real seconds.
pub fn day_phase(game_day_real_seconds: f64, start_fraction: f64, epoch: u64, now: u64) -> GameTime {
    let elapsed = now.saturating_sub(epoch) as f64 / 1000.0;
    let d = game_day_real_seconds;
    GameTime::from_fraction((elapsed + start_fraction * d).rem_euclid(d) / d)
}
