//! Trace files and the replay client that stands in for a student's camera.
//!
//! A trace is JSON Lines. Each line is a client message with an extra
//! `at_ms` field giving its send time relative to the start of the trace:
//!
//! ```text
//! {"at_ms":0,"type":"join","classroom":"algebra-101","name":"Ann"}
//! {"at_ms":100,"type":"landmarks","ts_ms":100,"w":640,"h":480,"points":[[312.0,260.5], ...]}
//! {"at_ms":250,"type":"expression","ts_ms":250,"label":"focused"}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use classpulse_core::headpose::{synthesize_frame, EulerAngles};
use classpulse_core::{GestureKind, HeadPoseConfig, HeadPoseError};
use futures::{SinkExt, StreamExt};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use tokio::time::Instant;
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{ClientMessage, ErrorCode, ServerMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub at_ms: u64,
    #[serde(flatten)]
    pub message: ClientMessage,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Trace { path: PathBuf, line: usize, message: String },
    #[error("cannot connect to {url}: {message}")]
    Connect { url: String, message: String },
    #[error("connection lost: {0}")]
    Connection(String),
    #[error("join rejected: {0}")]
    JoinRejected(String),
    #[error("speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceEntry>, ClientError> {
    let io = |source| ClientError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry = serde_json::from_str(line).map_err(|e| ClientError::Trace {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_trace(path: &Path, entries: &[TraceEntry]) -> Result<(), ClientError> {
    let io = |source| ClientError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for e in entries {
        let line = serde_json::to_string(e).expect("trace entries always serialize");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Span of the trace from its first to its last entry.
pub fn trace_duration(entries: &[TraceEntry]) -> Duration {
    let first = entries.iter().map(|e| e.at_ms).min().unwrap_or(0);
    let last = entries.iter().map(|e| e.at_ms).max().unwrap_or(0);
    Duration::from_millis(last - first)
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    /// Delays are divided by this factor.
    pub speed: f64,
    /// Overrides the classroom of every join message.
    pub classroom: Option<String>,
    /// Time to stay connected after the last message.
    pub linger: Duration,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { speed: 1.0, classroom: None, linger: Duration::ZERO }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReplayReport {
    pub sent: usize,
    pub student_id: Option<String>,
    /// Error messages received from the server, in arrival order.
    pub errors: Vec<(ErrorCode, String)>,
    pub elapsed: Duration,
}

/// Plays `entries` against `url` (a `ws://host:port/ws` address).
pub async fn replay(url: &str, entries: &[TraceEntry], options: &ReplayOptions) -> Result<ReplayReport, ClientError> {
    if !(options.speed.is_finite() && options.speed > 0.0) {
        return Err(ClientError::InvalidSpeed(options.speed));
    }
    let (socket, _) = tokio_tungstenite::connect_async(url)
        .await
        .map_err(|e| ClientError::Connect { url: url.to_string(), message: e.to_string() })?;
    let (mut sink, mut stream) = socket.split();

    let received: Arc<Mutex<Vec<ServerMessage>>> = Arc::default();
    let (joined_tx, mut joined_rx) = tokio::sync::mpsc::unbounded_channel::<Result<String, String>>();
    let inbox = received.clone();
    let reader = tokio::spawn(async move {
        while let Some(Ok(frame)) = stream.next().await {
            let Message::Text(text) = frame else { continue };
            let Ok(message) = serde_json::from_str::<ServerMessage>(text.as_str()) else {
                tracing::warn!(%text, "unparseable server message");
                continue;
            };
            match &message {
                ServerMessage::Joined { student_id } => {
                    let _ = joined_tx.send(Ok(student_id.clone()));
                }
                ServerMessage::Error { code: ErrorCode::JoinRejected, detail } => {
                    let _ = joined_tx.send(Err(detail.clone()));
                }
                _ => {}
            }
            inbox.lock().expect("inbox lock").push(message);
        }
    });

    let start = Instant::now();
    let origin = entries.first().map(|e| e.at_ms).unwrap_or(0);
    let mut report = ReplayReport::default();
    for entry in entries {
        let offset = entry.at_ms.saturating_sub(origin) as f64 / options.speed;
        tokio::time::sleep_until(start + Duration::from_secs_f64(offset / 1000.0)).await;
        let mut message = entry.message.clone();
        if let (ClientMessage::Join { classroom, .. }, Some(name)) = (&mut message, &options.classroom) {
            classroom.clone_from(name);
        }
        let is_join = matches!(message, ClientMessage::Join { .. });
        let text = serde_json::to_string(&message).expect("client messages always serialize");
        sink.send(Message::Text(text.into())).await.map_err(|e| ClientError::Connection(e.to_string()))?;
        report.sent += 1;
        if is_join {
            match tokio::time::timeout(Duration::from_secs(10), joined_rx.recv()).await {
                Ok(Some(Ok(id))) => report.student_id = Some(id),
                Ok(Some(Err(detail))) => return Err(ClientError::JoinRejected(detail)),
                Ok(None) => return Err(ClientError::Connection("server closed the connection".into())),
                Err(_) => return Err(ClientError::Connection("no reply to join".into())),
            }
        }
    }
    tokio::time::sleep(options.linger).await;
    report.elapsed = start.elapsed();
    let _ = sink.close().await;
    let _ = tokio::time::timeout(Duration::from_secs(2), reader).await;
    report.errors = received
        .lock()
        .expect("inbox lock")
        .iter()
        .filter_map(|m| match m {
            ServerMessage::Error { code, detail } => Some((*code, detail.clone())),
            _ => None,
        })
        .collect();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedGesture {
    pub at_ms: u64,
    pub kind: GestureKind,
}

/// Synthetic trace parameters. Frames hold the head frontal except for a
/// single frame at each scripted gesture, which tilts the head by
/// `nod_deg` (pitch) or `shake_deg` (yaw).
#[derive(Debug, Clone)]
pub struct GestureTraceSpec {
    pub classroom: String,
    pub name: String,
    pub frame_period_ms: u64,
    pub duration_ms: u64,
    pub gestures: Vec<ScriptedGesture>,
    pub nod_deg: f64,
    pub shake_deg: f64,
    pub size: (u32, u32),
}

impl GestureTraceSpec {
    pub fn new(classroom: impl Into<String>, name: impl Into<String>, duration_ms: u64) -> Self {
        Self {
            classroom: classroom.into(),
            name: name.into(),
            frame_period_ms: 100,
            duration_ms,
            gestures: Vec::new(),
            nod_deg: 12.0,
            shake_deg: 14.0,
            size: (640, 480),
        }
    }
}

/// Builds a join message followed by one landmark frame per period. Gesture
/// times are snapped to the frame grid; gestures closer together than the
/// refractory period will be partly suppressed by the detector.
pub fn gesture_trace(spec: &GestureTraceSpec, config: &HeadPoseConfig) -> Result<Vec<TraceEntry>, HeadPoseError> {
    let period = spec.frame_period_ms.max(1);
    let mut entries = vec![TraceEntry {
        at_ms: 0,
        message: ClientMessage::Join { classroom: spec.classroom.clone(), name: spec.name.clone() },
    }];
    let translation = Vector3::new(0.0, 0.0, 50.0);
    let mut t = 0;
    while t <= spec.duration_ms {
        let mut angles = EulerAngles::new(0.0, 0.0, 0.0);
        for g in &spec.gestures {
            if (g.at_ms + period / 2) / period * period == t {
                match g.kind {
                    GestureKind::Nod => angles.pitch = spec.nod_deg,
                    GestureKind::Shake => angles.yaw = spec.shake_deg,
                }
            }
        }
        let frame = synthesize_frame("", t as i64, angles, translation, spec.size, config)?;
        entries.push(TraceEntry {
            at_ms: t,
            message: ClientMessage::Landmarks {
                ts_ms: t as i64,
                w: i64::from(frame.width),
                h: i64::from(frame.height),
                points: frame.points,
            },
        });
        t += period;
    }
    Ok(entries)
}
