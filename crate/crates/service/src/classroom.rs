//! Synchronous classroom state. Every mutation returns the session events it
//! produced; the owning actor logs them before anything reaches the wire.

use std::collections::HashMap;

use classpulse_core::{
    apply_reaction, class_score, estimate_euler, expression_to_reaction, gesture_to_reaction, Channel,
    ClassEvaluation, EulerEstimate, EvaluationParams, ExpressionLabel, GestureDetector, HeadPoseConfig,
    LandmarkFrame, ReactionLabel, StudentRecord,
};

use crate::eventlog::{merge_pending, EventBody, SessionEvent};
use crate::protocol::{ErrorCode, RosterEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassroomStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("student {0} is not in this classroom")]
    NotJoined(String),
    #[error("classroom is closed")]
    Closed,
    #[error("frame rejected: {0}")]
    FrameRejected(String),
    #[error("message rejected: {0}")]
    MessageRejected(String),
    #[error("out-of-order sample: {0}")]
    StreamOrder(String),
}

impl IngestError {
    pub fn code(&self) -> ErrorCode {
        match self {
            Self::NotJoined(_) => ErrorCode::NotJoined,
            Self::Closed => ErrorCode::ClassroomClosed,
            Self::FrameRejected(_) => ErrorCode::FrameRejected,
            Self::MessageRejected(_) => ErrorCode::MessageRejected,
            Self::StreamOrder(_) => ErrorCode::StreamOrder,
        }
    }
}

#[derive(Debug)]
struct StudentState {
    record: StudentRecord,
    detector: GestureDetector,
    pending: Option<ReactionLabel>,
    connected: bool,
}

#[derive(Debug)]
pub struct Classroom {
    id: String,
    name: String,
    params: EvaluationParams,
    headpose: HeadPoseConfig,
    status: ClassroomStatus,
    created_at: i64,
    /// Join order; departed students stay with `connected == false`.
    students: Vec<StudentState>,
    index: HashMap<String, usize>,
    last_ts: i64,
}

impl Classroom {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        params: EvaluationParams,
        headpose: HeadPoseConfig,
        now_ms: i64,
    ) -> (Self, SessionEvent) {
        let mut room = Self {
            id: id.into(),
            name: name.into(),
            params,
            headpose,
            status: ClassroomStatus::Open,
            created_at: now_ms,
            students: Vec::new(),
            index: HashMap::new(),
            last_ts: now_ms,
        };
        let event = room.event(now_ms, EventBody::ClassroomCreated { name: room.name.clone(), params });
        (room, event)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn status(&self) -> ClassroomStatus {
        self.status
    }

    pub fn created_at(&self) -> i64 {
        self.created_at
    }

    pub fn active_students(&self) -> usize {
        self.students.iter().filter(|s| s.connected).count()
    }

    pub fn record(&self, student_id: &str) -> Option<&StudentRecord> {
        self.index.get(student_id).map(|&i| &self.students[i].record)
    }

    pub fn pending(&self, student_id: &str) -> Option<ReactionLabel> {
        self.index.get(student_id).and_then(|&i| self.students[i].pending)
    }

    pub fn roster(&self) -> Vec<RosterEntry> {
        self.students
            .iter()
            .map(|s| RosterEntry {
                student: s.record.student_id.clone(),
                name: s.record.display_name.clone(),
                p: s.record.p,
                n: s.record.n,
                connected: s.connected,
            })
            .collect()
    }

    fn event(&mut self, now_ms: i64, body: EventBody) -> SessionEvent {
        self.last_ts = self.last_ts.max(now_ms);
        SessionEvent { ts_ms: self.last_ts, classroom_id: self.id.clone(), body }
    }

    fn connected_index(&self, student_id: &str) -> Result<usize, IngestError> {
        if self.status == ClassroomStatus::Closed {
            return Err(IngestError::Closed);
        }
        match self.index.get(student_id) {
            Some(&i) if self.students[i].connected => Ok(i),
            _ => Err(IngestError::NotJoined(student_id.to_string())),
        }
    }

    /// Adds a student under a fresh connection-scoped id. Display names need
    /// not be unique.
    pub fn join(&mut self, student_id: String, display_name: String, now_ms: i64) -> Result<SessionEvent, IngestError> {
        if self.status == ClassroomStatus::Closed {
            return Err(IngestError::Closed);
        }
        if self.index.contains_key(&student_id) {
            return Err(IngestError::MessageRejected(format!("student id {student_id} already used")));
        }
        self.index.insert(student_id.clone(), self.students.len());
        self.students.push(StudentState {
            record: StudentRecord::new(student_id.clone(), display_name.clone()),
            detector: GestureDetector::new(&self.headpose),
            pending: None,
            connected: true,
        });
        Ok(self.event(now_ms, EventBody::StudentJoined { student_id, name: display_name }))
    }

    /// Marks the student as departed. Their record is kept but no longer
    /// scored; pending reactions are dropped.
    pub fn leave(&mut self, student_id: &str, now_ms: i64) -> Result<SessionEvent, IngestError> {
        let i = self.connected_index(student_id)?;
        let s = &mut self.students[i];
        s.connected = false;
        s.pending = None;
        Ok(self.event(now_ms, EventBody::StudentLeft { student_id: student_id.to_string() }))
    }

    fn record_reaction(&mut self, i: usize, reaction: ReactionLabel, source: Channel, now_ms: i64) -> SessionEvent {
        let s = &mut self.students[i];
        s.pending = merge_pending(s.pending, reaction);
        let student_id = s.record.student_id.clone();
        self.event(now_ms, EventBody::Reaction { student_id, reaction, source })
    }

    /// Runs pose estimation and gesture detection for one frame. Frames whose
    /// pose cannot be solved or lies outside the head range are skipped.
    pub fn ingest_frame(
        &mut self,
        student_id: &str,
        frame: &LandmarkFrame,
        now_ms: i64,
    ) -> Result<Option<SessionEvent>, IngestError> {
        let i = self
            .connected_index(student_id)
            .map_err(|e| match e {
                IngestError::NotJoined(id) => IngestError::FrameRejected(format!("unknown student {id}")),
                other => other,
            })?;
        frame.validate().map_err(|e| IngestError::FrameRejected(e.to_string()))?;
        let sample = match estimate_euler(frame, &self.headpose) {
            EulerEstimate::Sample(s) => s,
            EulerEstimate::Outlier(o) => {
                tracing::debug!(student = student_id, ts_ms = frame.ts_ms, outlier = ?o, "frame skipped");
                return Ok(None);
            }
        };
        let gesture = self.students[i]
            .detector
            .step(sample)
            .map_err(|e| IngestError::StreamOrder(e.to_string()))?;
        Ok(gesture.map(|g| self.record_reaction(i, gesture_to_reaction(&g), Channel::Head, now_ms)))
    }

    pub fn ingest_expression(
        &mut self,
        student_id: &str,
        label: &str,
        now_ms: i64,
    ) -> Result<Option<SessionEvent>, IngestError> {
        let i = self
            .connected_index(student_id)
            .map_err(|e| match e {
                IngestError::NotJoined(id) => IngestError::MessageRejected(format!("unknown student {id}")),
                other => other,
            })?;
        let label: ExpressionLabel = label.parse().map_err(IngestError::MessageRejected)?;
        let reaction = expression_to_reaction(label);
        if reaction == ReactionLabel::Neutral && self.students[i].pending.is_some() {
            return Ok(None);
        }
        Ok(Some(self.record_reaction(i, reaction, Channel::Expression, now_ms)))
    }

    /// Scores connected students (neutral where nothing is pending), then
    /// folds the reactions into their history. Skipped for an empty class.
    pub fn tick(&mut self, now_ms: i64) -> Option<SessionEvent> {
        if self.status == ClassroomStatus::Closed {
            return None;
        }
        let present: Vec<usize> = (0..self.students.len()).filter(|&i| self.students[i].connected).collect();
        if present.is_empty() {
            return None;
        }
        let records: Vec<StudentRecord> = present.iter().map(|&i| self.students[i].record.clone()).collect();
        let reactions: Vec<ReactionLabel> = present
            .iter()
            .map(|&i| self.students[i].pending.unwrap_or(ReactionLabel::Neutral))
            .collect();
        let mut evaluation: ClassEvaluation = class_score(&records, &reactions, &self.params)
            .expect("roster and reaction vectors have equal non-zero length");
        for (&i, &r) in present.iter().zip(&reactions) {
            let s = &mut self.students[i];
            s.record = apply_reaction(&s.record, r);
            s.pending = None;
        }
        evaluation.ts_ms = self.last_ts.max(now_ms);
        Some(self.event(now_ms, EventBody::Evaluation(evaluation)))
    }

    pub fn close(&mut self, now_ms: i64) -> Option<SessionEvent> {
        if self.status == ClassroomStatus::Closed {
            return None;
        }
        self.status = ClassroomStatus::Closed;
        for s in &mut self.students {
            s.pending = None;
        }
        Some(self.event(now_ms, EventBody::ClassroomClosed {}))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::recompute_evaluations;
    use classpulse_core::headpose::{synthesize_frame, EulerAngles};
    use classpulse_core::ClassLevel;
    use nalgebra::Vector3;

    fn room() -> (Classroom, Vec<SessionEvent>) {
        let (room, created) =
            Classroom::new("c1", "algebra-101", EvaluationParams::default(), HeadPoseConfig::default(), 0);
        (room, vec![created])
    }

    fn frame(ts: i64, pitch: f64, yaw: f64) -> LandmarkFrame {
        synthesize_frame(
            "x",
            ts,
            EulerAngles::new(pitch, yaw, 0.0),
            Vector3::new(0.0, 0.0, 50.0),
            (640, 480),
            &HeadPoseConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn empty_classroom_tick_is_skipped() {
        let (mut r, _) = room();
        assert!(r.tick(10).is_none());
    }

    #[test]
    fn duplicate_names_get_distinct_ids() {
        let (mut r, _) = room();
        r.join("a".into(), "Sam".into(), 1).unwrap();
        r.join("b".into(), "Sam".into(), 2).unwrap();
        assert_eq!(r.active_students(), 2);
        assert_eq!(r.roster().len(), 2);
    }

    #[test]
    fn nod_becomes_positive_reaction() {
        let (mut r, _) = room();
        r.join("a".into(), "A".into(), 1).unwrap();
        assert!(r.ingest_frame("a", &frame(0, 0.0, 0.0), 2).unwrap().is_none());
        let e = r.ingest_frame("a", &frame(100, 12.0, 0.0), 3).unwrap().unwrap();
        assert_eq!(
            e.body,
            EventBody::Reaction { student_id: "a".into(), reaction: ReactionLabel::Positive, source: Channel::Head }
        );
        assert!(r.ingest_frame("a", &frame(200, 12.5, 0.0), 4).unwrap().is_none());
    }

    #[test]
    fn frame_errors() {
        let (mut r, _) = room();
        r.join("a".into(), "A".into(), 1).unwrap();
        assert!(matches!(r.ingest_frame("zz", &frame(0, 0.0, 0.0), 2), Err(IngestError::FrameRejected(_))));
        let mut bad = frame(0, 0.0, 0.0);
        bad.points.truncate(10);
        assert!(matches!(r.ingest_frame("a", &bad, 2), Err(IngestError::FrameRejected(_))));
        r.ingest_frame("a", &frame(100, 0.0, 0.0), 3).unwrap();
        assert!(matches!(r.ingest_frame("a", &frame(50, 0.0, 0.0), 4), Err(IngestError::StreamOrder(_))));
    }

    #[test]
    fn expression_precedence() {
        let (mut r, _) = room();
        r.join("a".into(), "A".into(), 1).unwrap();
        let e = r.ingest_expression("a", "focused", 2).unwrap().unwrap();
        assert!(matches!(e.body, EventBody::Reaction { reaction: ReactionLabel::Positive, source: Channel::Expression, .. }));
        assert!(r.ingest_expression("a", "neutral", 3).unwrap().is_none());
        assert_eq!(r.pending("a"), Some(ReactionLabel::Positive));
        assert!(matches!(r.ingest_expression("a", "bored", 4), Err(IngestError::MessageRejected(_))));
    }

    #[test]
    fn ticks_score_and_update_history() {
        let (mut r, mut log) = room();
        for id in ["a", "b", "c"] {
            log.push(r.join(id.into(), id.into(), 1).unwrap());
        }
        let e = r.tick(5).unwrap();
        match &e.body {
            EventBody::Evaluation(ev) => {
                assert_eq!(ev.r_class, 0.0);
                assert_eq!(ev.level, ClassLevel::Neutral);
                assert_eq!(ev.ts_ms, 5);
            }
            other => panic!("{other:?}"),
        }
        log.push(e);
        for id in ["a", "b", "c"] {
            log.push(r.ingest_expression(id, "happiness", 6).unwrap().unwrap());
        }
        let e = r.tick(7).unwrap();
        if let EventBody::Evaluation(ev) = &e.body {
            assert_eq!(ev.r_class, 1.0);
            assert_eq!(ev.level, ClassLevel::Positive);
        }
        log.push(e);
        assert_eq!(r.record("a").unwrap().p, 1);
        log.push(r.ingest_expression("a", "tired", 8).unwrap().unwrap());
        log.push(r.ingest_expression("b", "happiness", 8).unwrap().unwrap());
        log.push(r.leave("c", 9).unwrap());
        log.push(r.tick(10).unwrap());
        let summary = recompute_evaluations(&log).unwrap();
        assert_eq!(summary.checks.len(), 3);
        for c in &summary.checks {
            assert_eq!(c.logged.to_bits(), c.recomputed.to_bits());
        }
    }

    #[test]
    fn timestamps_never_decrease() {
        let (mut r, _) = room();
        let a = r.join("a".into(), "A".into(), 100).unwrap();
        let b = r.join("b".into(), "B".into(), 50).unwrap();
        assert!(b.ts_ms >= a.ts_ms);
    }

    #[test]
    fn closed_classroom_rejects_everything() {
        let (mut r, _) = room();
        r.join("a".into(), "A".into(), 1).unwrap();
        assert!(r.close(2).is_some());
        assert!(r.close(3).is_none());
        assert_eq!(r.join("b".into(), "B".into(), 4), Err(IngestError::Closed));
        assert_eq!(r.ingest_expression("a", "focused", 5), Err(IngestError::Closed));
        assert!(r.tick(6).is_none());
    }
}
