//! Deterministic narrative runtime: section activation, trigger arming and
//! firing, the day/night clock and the engine event stream.

mod clock;
mod engine;
mod event;

pub use clock::{day_phase, GameTime};
pub use engine::{Armed, ArmedTrigger, PlayerInput, RuntimeError, Session, SessionConfig};
pub use event::{write_transcript, Cause, EngineEvent};
