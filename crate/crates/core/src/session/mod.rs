//! Process entry points: the reader protocol, headless play and the live
//! service.

mod headless;
mod protocol;
mod serve;

pub use headless::{
    parse_inputs, play_files, run_headless, schedule, BadInputs, Driver, InputCommand, PlayError, Stimulus,
    HEADLESS_TICK_MS,
};
pub use protocol::{
    decode_client_message, decode_server_message, encode_client_message, encode_server_message, ClientMessage,
    MalformedClientMessage, Scene, SceneSpeaker, ServerMessage, PROTOCOL_VERSION,
};
pub use serve::{serve, stream_samples, ServeConfig, ServeError, ServeStats, ServerHandle, SINGLE_READER};
