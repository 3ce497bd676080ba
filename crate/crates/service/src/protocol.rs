//! JSON wire messages. Every WebSocket text frame carries one object with a
//! `type` discriminator.

use classpulse_core::{Channel, ClassEvaluation, ReactionLabel};
use serde::{Deserialize, Serialize};

/// Messages accepted from students and teachers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    /// Student joins a classroom by id (or by name of an open classroom).
    Join { classroom: String, name: String },
    Landmarks { ts_ms: i64, w: i64, h: i64, points: Vec<[f64; 2]> },
    /// Label text is validated by the server so unknown labels get a
    /// dedicated rejection instead of a parse failure.
    Expression { ts_ms: i64, label: String },
    Leave,
    /// Teacher creates a classroom; the connection is subscribed to it.
    Create { name: String },
    Subscribe { classroom: String, token: String },
    Close { classroom: String, token: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub student: String,
    pub name: String,
    pub p: u64,
    pub n: u64,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Joined { student_id: String },
    Error { code: ErrorCode, detail: String },
    Created { classroom: String, name: String, token: String },
    Subscribed { classroom: String },
    Closed { classroom: String },
    Roster { classroom: String, students: Vec<RosterEntry> },
    Reaction { student: String, reaction: ReactionLabel, source: Channel, ts_ms: i64 },
    Evaluation(ClassEvaluation),
}

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self::Error { code, detail: detail.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    BadMessage,
    JoinRejected,
    NotJoined,
    FrameRejected,
    MessageRejected,
    StreamOrder,
    Unauthorized,
    ClassroomClosed,
}
