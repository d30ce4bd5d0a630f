//! Live sessions: a simulation driven over HTTP, streamed over a websocket.

mod http;
mod session;

pub use http::{router, serve, AppState, ControlCommand, ErrorBody};
pub use session::{Ack, AvatarDetail, AvatarPage, RunMode, SessionHandle, SessionStatus, COMMAND_QUEUE_CAPACITY};
