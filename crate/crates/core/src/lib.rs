//! Engine for physiology-driven interactive fiction.
//!
//! [`script`] parses the VIF story markup, [`physio`] turns sensor streams
//! into detector events, [`spatial`] handles yaw, field of view and dwell
//! selection, [`runtime`] is the deterministic story state machine and
//! [`session`] wires everything to files, sockets and the CLI.

pub mod script;
pub mod physio;
pub mod runtime;
pub mod session;
pub mod spatial;
