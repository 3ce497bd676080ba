//! Live classroom sessions over WebSocket: classroom state, the session
//! event log, the server and a trace-replay client.

pub mod classroom;
pub mod client;
pub mod eventlog;
pub mod protocol;
pub mod server;

pub use classpulse_core::Channel;
pub use classroom::{Classroom, ClassroomStatus, IngestError};
pub use eventlog::{read_log, recompute_evaluations, replay_log, EventBody, EventLog, ReplayError, ReplaySummary, SessionEvent};
pub use protocol::{ClientMessage, ErrorCode, RosterEntry, ServerMessage};
pub use server::{router, serve, Hub, RunningServer, ServerSettings, TeacherOutbox};
