//! Append-only JSON Lines session log and its replay.
//!
//! Each line holds one [`SessionEvent`] with fields in the order
//! `ts_ms, classroom_id, kind, payload`. Lines are written with a single
//! `write_all` followed by a flush.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use classpulse_core::{
    apply_reaction, class_score, Channel, ClassEvaluation, EvaluationParams, ReactionLabel, StudentRecord,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub ts_ms: i64,
    pub classroom_id: String,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventBody {
    ClassroomCreated { name: String, params: EvaluationParams },
    StudentJoined { student_id: String, name: String },
    StudentLeft { student_id: String },
    Reaction { student_id: String, reaction: ReactionLabel, source: Channel },
    Evaluation(ClassEvaluation),
    ClassroomClosed {},
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: corrupt event: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("event {index}: {message}")]
    Inconsistent { index: usize, message: String },
}

/// Writer half of the log. A log without a path discards events.
#[derive(Debug)]
pub struct EventLog {
    file: Option<File>,
    path: Option<PathBuf>,
}

impl EventLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Some(file), path: Some(path.to_path_buf()) })
    }

    pub fn disabled() -> Self {
        Self { file: None, path: None }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&mut self, event: &SessionEvent) -> std::io::Result<()> {
        let Some(file) = self.file.as_mut() else {
            return Ok(());
        };
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.flush()
    }
}

/// Reads every event, halting at the first line that does not parse.
pub fn read_log(path: &Path) -> Result<Vec<SessionEvent>, ReplayError> {
    let io = |source| ReplayError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| ReplayError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationCheck {
    pub ts_ms: i64,
    pub logged: f64,
    pub recomputed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplaySummary {
    pub events: usize,
    pub checks: Vec<EvaluationCheck>,
}

impl ReplaySummary {
    pub fn max_abs_difference(&self) -> f64 {
        self.checks.iter().map(|c| (c.logged - c.recomputed).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug)]
struct ReplayStudent {
    record: StudentRecord,
    connected: bool,
    pending: Option<ReactionLabel>,
}

/// Rebuilds classroom state from the log and recomputes every evaluation
/// from the logged reactions.
pub fn recompute_evaluations(events: &[SessionEvent]) -> Result<ReplaySummary, ReplayError> {
    let mut params = EvaluationParams::default();
    let mut students: Vec<ReplayStudent> = Vec::new();
    let mut checks = Vec::new();
    let find = |students: &mut Vec<ReplayStudent>, id: &str, index: usize| {
        students
            .iter()
            .position(|s| s.record.student_id == id)
            .ok_or_else(|| ReplayError::Inconsistent { index, message: format!("unknown student {id}") })
    };
    for (index, event) in events.iter().enumerate() {
        match &event.body {
            EventBody::ClassroomCreated { params: p, .. } => params = *p,
            EventBody::StudentJoined { student_id, name } => students.push(ReplayStudent {
                record: StudentRecord::new(student_id.clone(), name.clone()),
                connected: true,
                pending: None,
            }),
            EventBody::StudentLeft { student_id } => {
                let i = find(&mut students, student_id, index)?;
                students[i].connected = false;
                students[i].pending = None;
            }
            EventBody::Reaction { student_id, reaction, .. } => {
                let i = find(&mut students, student_id, index)?;
                students[i].pending = merge_pending(students[i].pending, *reaction);
            }
            EventBody::Evaluation(logged) => {
                let present: Vec<&mut ReplayStudent> = students.iter_mut().filter(|s| s.connected).collect();
                let records: Vec<StudentRecord> = present.iter().map(|s| s.record.clone()).collect();
                let reactions: Vec<ReactionLabel> =
                    present.iter().map(|s| s.pending.unwrap_or(ReactionLabel::Neutral)).collect();
                let recomputed = class_score(&records, &reactions, &params).map_err(|e| {
                    ReplayError::Inconsistent { index, message: e.to_string() }
                })?;
                for (s, r) in present.into_iter().zip(reactions) {
                    s.record = apply_reaction(&s.record, r);
                    s.pending = None;
                }
                checks.push(EvaluationCheck {
                    ts_ms: event.ts_ms,
                    logged: logged.r_class,
                    recomputed: recomputed.r_class,
                });
            }
            EventBody::ClassroomClosed {} => {}
        }
    }
    Ok(ReplaySummary { events: events.len(), checks })
}

/// Reads a log file and recomputes its evaluations.
pub fn replay_log(path: &Path) -> Result<(Vec<SessionEvent>, ReplaySummary), ReplayError> {
    let events = read_log(path)?;
    let summary = recompute_evaluations(&events)?;
    Ok((events, summary))
}

/// One pending reaction per student per tick: the latest non-neutral
/// reaction wins, and neutral only fills an empty slot.
pub fn merge_pending(current: Option<ReactionLabel>, incoming: ReactionLabel) -> Option<ReactionLabel> {
    match (current, incoming) {
        (Some(existing), ReactionLabel::Neutral) => Some(existing),
        (_, label) => Some(label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use classpulse_core::ClassLevel;

    fn ev(ts_ms: i64, body: EventBody) -> SessionEvent {
        SessionEvent { ts_ms, classroom_id: "c".into(), body }
    }

    #[test]
    fn field_order_is_fixed() {
        let e = ev(5, EventBody::StudentLeft { student_id: "s".into() });
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"ts_ms":5,"classroom_id":"c","kind":"STUDENT_LEFT","payload":{"student_id":"s"}}"#
        );
        let closed = ev(6, EventBody::ClassroomClosed {});
        let text = serde_json::to_string(&closed).unwrap();
        assert_eq!(text, r#"{"ts_ms":6,"classroom_id":"c","kind":"CLASSROOM_CLOSED","payload":{}}"#);
        assert_eq!(serde_json::from_str::<SessionEvent>(&text).unwrap(), closed);
    }

    #[test]
    fn merge_rule() {
        use ReactionLabel::*;
        assert_eq!(merge_pending(None, Neutral), Some(Neutral));
        assert_eq!(merge_pending(Some(Positive), Neutral), Some(Positive));
        assert_eq!(merge_pending(Some(Positive), Negative), Some(Negative));
        assert_eq!(merge_pending(Some(Neutral), Positive), Some(Positive));
    }

    #[test]
    fn write_read_recompute() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut log = EventLog::open(&path).unwrap();
        let events = vec![
            ev(0, EventBody::ClassroomCreated { name: "x".into(), params: EvaluationParams::default() }),
            ev(1, EventBody::StudentJoined { student_id: "a".into(), name: "A".into() }),
            ev(2, EventBody::StudentJoined { student_id: "b".into(), name: "B".into() }),
            ev(3, EventBody::Reaction { student_id: "a".into(), reaction: ReactionLabel::Positive, source: Channel::Head }),
            ev(4, EventBody::Evaluation(ClassEvaluation {
                r_class: 0.5,
                level: ClassLevel::Positive,
                per_student: vec![],
                ts_ms: 4,
            })),
        ];
        for e in &events {
            log.append(e).unwrap();
        }
        let (read, summary) = replay_log(&path).unwrap();
        assert_eq!(read, events);
        assert_eq!(summary.checks.len(), 1);
        assert_eq!(summary.checks[0].recomputed, 0.5);
        assert_eq!(summary.max_abs_difference(), 0.0);
    }

    #[test]
    fn empty_log_is_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let (events, summary) = replay_log(&path).unwrap();
        assert!(events.is_empty());
        assert!(summary.checks.is_empty());
    }

    #[test]
    fn truncated_line_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&ev(1, EventBody::StudentLeft { student_id: "s".into() })).unwrap();
        std::fs::write(&path, format!("{good}\n{good}\n{}", &good[..20])).unwrap();
        match read_log(&path) {
            Err(ReplayError::Corrupt { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected corrupt-line error, got {other:?}"),
        }
    }

    #[test]
    fn reaction_for_unknown_student_is_inconsistent() {
        let events = vec![ev(
            0,
            EventBody::Reaction { student_id: "ghost".into(), reaction: ReactionLabel::Positive, source: Channel::Head },
        )];
        assert!(matches!(recompute_evaluations(&events), Err(ReplayError::Inconsistent { index: 0, .. })));
    }
}
