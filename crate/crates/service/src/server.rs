//! WebSocket session server.
//!
//! Each classroom is owned by one actor task that serializes every mutation
//! through a command queue, appends the resulting events to the log and only
//! then fans messages out. Connections never touch classroom state directly.

use std::collections::{HashMap, VecDeque};
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use classpulse_core::config::Config;
use classpulse_core::{EvaluationParams, HeadPoseConfig, LandmarkFrame};
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch, Notify};

use crate::classroom::{Classroom, IngestError};
use crate::eventlog::{EventBody, EventLog, SessionEvent};
use crate::protocol::{ClientMessage, ErrorCode, ServerMessage};

#[derive(Debug, Clone)]
pub struct ServerSettings {
    pub tick: Duration,
    /// Teacher messages buffered per connection before the drop policy kicks in.
    pub teacher_queue: usize,
    pub student_queue: usize,
    pub command_queue: usize,
    /// One `<classroom_id>.jsonl` file per classroom; no logging when `None`.
    pub log_dir: Option<PathBuf>,
    pub headpose: HeadPoseConfig,
    pub evaluation: EvaluationParams,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self {
            tick: Duration::from_millis(1000),
            teacher_queue: 256,
            student_queue: 64,
            command_queue: 1024,
            log_dir: None,
            headpose: HeadPoseConfig::default(),
            evaluation: EvaluationParams::default(),
        }
    }
}

impl ServerSettings {
    pub fn from_config(config: &Config) -> Self {
        Self {
            tick: Duration::from_millis(config.server.tick_ms),
            teacher_queue: config.server.teacher_queue,
            headpose: config.headpose.clone(),
            evaluation: config.evaluation,
            ..Self::default()
        }
    }
}

/// Wall-clock milliseconds that never run backwards within a process.
#[derive(Debug, Clone)]
struct Clock {
    origin_ms: i64,
    start: Instant,
}

impl Clock {
    fn new() -> Self {
        let origin_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0);
        Self { origin_ms, start: Instant::now() }
    }

    fn now_ms(&self) -> i64 {
        self.origin_ms + self.start.elapsed().as_millis() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Priority {
    Evaluation,
    Reaction,
    Other,
}

/// Bounded teacher queue. Overflow drops the oldest evaluation first, then
/// the oldest non-reaction message, and only then the oldest message.
#[derive(Debug)]
pub struct TeacherOutbox {
    queue: Mutex<VecDeque<(Priority, String)>>,
    notify: Notify,
    capacity: usize,
    dropped: AtomicU64,
}

impl TeacherOutbox {
    pub fn new(capacity: usize) -> Self {
        Self { queue: Mutex::new(VecDeque::new()), notify: Notify::new(), capacity: capacity.max(1), dropped: AtomicU64::new(0) }
    }

    pub fn push(&self, message: &ServerMessage) {
        let priority = match message {
            ServerMessage::Evaluation(_) => Priority::Evaluation,
            ServerMessage::Reaction { .. } => Priority::Reaction,
            _ => Priority::Other,
        };
        let mut queue = self.queue.lock().expect("outbox lock");
        if queue.len() >= self.capacity {
            let victim = queue
                .iter()
                .position(|(p, _)| *p == Priority::Evaluation)
                .or_else(|| queue.iter().position(|(p, _)| *p != Priority::Reaction))
                .unwrap_or(0);
            queue.remove(victim);
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        queue.push_back((priority, message.to_json()));
        drop(queue);
        self.notify.notify_one();
    }

    pub fn pop(&self) -> Option<String> {
        self.queue.lock().expect("outbox lock").pop_front().map(|(_, m)| m)
    }

    pub async fn next(&self) -> String {
        loop {
            if let Some(m) = self.pop() {
                return m;
            }
            self.notify.notified().await;
        }
    }

    pub fn len(&self) -> usize {
        self.queue.lock().expect("outbox lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

type Rejection = (ErrorCode, String);

enum Command {
    Join { name: String, outbox: mpsc::Sender<String>, reply: oneshot::Sender<Result<String, Rejection>> },
    Frame { student_id: String, frame: LandmarkFrame },
    Expression { student_id: String, label: String },
    Leave { student_id: String },
    Subscribe { token: String, outbox: Arc<TeacherOutbox>, reply: oneshot::Sender<Result<(), Rejection>> },
    Close { token: String, reply: oneshot::Sender<Result<(), Rejection>> },
    Notify { student_id: String, message: ServerMessage },
}

#[derive(Debug, Clone)]
struct ClassroomHandle {
    name: String,
    seq: u64,
    commands: mpsc::Sender<Command>,
    open: watch::Receiver<bool>,
}

/// Registry of classrooms, shared by all connections.
#[derive(Clone)]
pub struct Hub {
    inner: Arc<HubInner>,
}

struct HubInner {
    settings: ServerSettings,
    clock: Clock,
    classrooms: Mutex<HashMap<String, ClassroomHandle>>,
    next_seq: AtomicU64,
    shutdown: watch::Receiver<bool>,
}

impl Hub {
    fn new(settings: ServerSettings, shutdown: watch::Receiver<bool>) -> Self {
        Self {
            inner: Arc::new(HubInner {
                settings,
                clock: Clock::new(),
                classrooms: Mutex::new(HashMap::new()),
                next_seq: AtomicU64::new(0),
                shutdown,
            }),
        }
    }

    pub fn classroom_count(&self) -> usize {
        self.inner.classrooms.lock().expect("hub lock").len()
    }

    /// Creates an open classroom and returns `(classroom_id, teacher_token)`.
    pub fn create_classroom(&self, name: &str) -> std::io::Result<(String, String)> {
        let settings = &self.inner.settings;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let token = uuid::Uuid::new_v4().simple().to_string();
        let log = match &settings.log_dir {
            Some(dir) => EventLog::open(&dir.join(format!("{id}.jsonl")))?,
            None => EventLog::disabled(),
        };
        let (room, created) = Classroom::new(
            id.clone(),
            name,
            settings.evaluation,
            settings.headpose.clone(),
            self.inner.clock.now_ms(),
        );
        let (tx, rx) = mpsc::channel(settings.command_queue);
        let (open_tx, open_rx) = watch::channel(true);
        let actor = Actor {
            room,
            log,
            token: token.clone(),
            clock: self.inner.clock.clone(),
            teachers: Vec::new(),
            students: HashMap::new(),
            open: open_tx,
        };
        tokio::spawn(actor.run(created, rx, settings.tick, self.inner.shutdown.clone()));
        let seq = self.inner.next_seq.fetch_add(1, Ordering::Relaxed);
        self.inner
            .classrooms
            .lock()
            .expect("hub lock")
            .insert(id.clone(), ClassroomHandle { name: name.to_string(), seq, commands: tx, open: open_rx });
        tracing::info!(classroom = %id, name, "classroom created");
        Ok((id, token))
    }

    /// Resolves a classroom id, falling back to the newest open classroom
    /// with that name.
    fn resolve(&self, key: &str) -> Option<(String, ClassroomHandle)> {
        let rooms = self.inner.classrooms.lock().expect("hub lock");
        if let Some(h) = rooms.get(key) {
            return Some((key.to_string(), h.clone()));
        }
        rooms
            .iter()
            .filter(|(_, h)| h.name == key && *h.open.borrow())
            .max_by_key(|(_, h)| h.seq)
            .map(|(id, h)| (id.clone(), h.clone()))
    }
}

struct Actor {
    room: Classroom,
    log: EventLog,
    token: String,
    clock: Clock,
    teachers: Vec<Arc<TeacherOutbox>>,
    students: HashMap<String, mpsc::Sender<String>>,
    open: watch::Sender<bool>,
}

impl Actor {
    async fn run(
        mut self,
        created: SessionEvent,
        mut commands: mpsc::Receiver<Command>,
        tick: Duration,
        mut shutdown: watch::Receiver<bool>,
    ) {
        self.record(&created);
        let mut ticker = tokio::time::interval_at(tokio::time::Instant::now() + tick, tick);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                command = commands.recv() => match command {
                    Some(c) => self.handle(c),
                    None => break,
                },
                _ = ticker.tick() => {
                    if let Some(event) = self.room.tick(self.clock.now_ms()) {
                        self.record(&event);
                        if let EventBody::Evaluation(ev) = event.body {
                            self.to_teachers(&ServerMessage::Evaluation(ev));
                        }
                    }
                }
                _ = shutdown.changed() => break,
            }
        }
        tracing::debug!(classroom = self.room.id(), "classroom actor stopped");
    }

    fn record(&mut self, event: &SessionEvent) {
        if let Err(e) = self.log.append(event) {
            tracing::error!(classroom = self.room.id(), error = %e, "event log append failed");
        }
    }

    fn to_teachers(&self, message: &ServerMessage) {
        for t in &self.teachers {
            t.push(message);
        }
    }

    fn to_student(&self, student_id: &str, message: &ServerMessage) {
        if let Some(tx) = self.students.get(student_id) {
            if tx.try_send(message.to_json()).is_err() {
                tracing::warn!(student = student_id, "student queue full; message dropped");
            }
        }
    }

    fn roster(&self) -> ServerMessage {
        ServerMessage::Roster { classroom: self.room.id().to_string(), students: self.room.roster() }
    }

    fn reject(&self, student_id: &str, e: IngestError) {
        self.to_student(student_id, &ServerMessage::error(e.code(), e.to_string()));
    }

    fn handle(&mut self, command: Command) {
        let now = self.clock.now_ms();
        match command {
            Command::Join { name, outbox, reply } => {
                let student_id = uuid::Uuid::new_v4().simple().to_string();
                match self.room.join(student_id.clone(), name, now) {
                    Ok(event) => {
                        self.record(&event);
                        self.students.insert(student_id.clone(), outbox);
                        self.to_student(&student_id, &ServerMessage::Joined { student_id: student_id.clone() });
                        self.to_teachers(&self.roster());
                        let _ = reply.send(Ok(student_id));
                    }
                    Err(e) => {
                        let _ = reply.send(Err((ErrorCode::JoinRejected, e.to_string())));
                    }
                }
            }
            Command::Frame { student_id, frame } => match self.room.ingest_frame(&student_id, &frame, now) {
                Ok(Some(event)) => self.reaction(event),
                Ok(None) => {}
                Err(e) => self.reject(&student_id, e),
            },
            Command::Expression { student_id, label } => {
                match self.room.ingest_expression(&student_id, &label, now) {
                    Ok(Some(event)) => self.reaction(event),
                    Ok(None) => {}
                    Err(e) => self.reject(&student_id, e),
                }
            }
            Command::Leave { student_id } => {
                if let Ok(event) = self.room.leave(&student_id, now) {
                    self.record(&event);
                    self.to_teachers(&self.roster());
                }
                self.students.remove(&student_id);
            }
            Command::Notify { student_id, message } => self.to_student(&student_id, &message),
            Command::Subscribe { token, outbox, reply } => {
                if token != self.token {
                    let _ = reply.send(Err((ErrorCode::Unauthorized, "bad teacher token".into())));
                    return;
                }
                outbox.push(&ServerMessage::Subscribed { classroom: self.room.id().to_string() });
                outbox.push(&self.roster());
                self.teachers.retain(|t| Arc::strong_count(t) > 1);
                self.teachers.push(outbox);
                let _ = reply.send(Ok(()));
            }
            Command::Close { token, reply } => {
                if token != self.token {
                    let _ = reply.send(Err((ErrorCode::Unauthorized, "bad teacher token".into())));
                    return;
                }
                if let Some(event) = self.room.close(now) {
                    self.record(&event);
                    let _ = self.open.send(false);
                    let closed = ServerMessage::Closed { classroom: self.room.id().to_string() };
                    self.to_teachers(&closed);
                    let ids: Vec<String> = self.students.keys().cloned().collect();
                    for id in ids {
                        self.to_student(&id, &ServerMessage::error(ErrorCode::ClassroomClosed, "classroom closed"));
                    }
                    self.students.clear();
                }
                let _ = reply.send(Ok(()));
            }
        }
    }

    fn reaction(&mut self, event: SessionEvent) {
        self.record(&event);
        if let EventBody::Reaction { student_id, reaction, source } = event.body {
            self.to_teachers(&ServerMessage::Reaction { student: student_id, reaction, source, ts_ms: event.ts_ms });
        }
    }
}

/// Builds the HTTP router: `GET /health` and the `GET /ws` upgrade.
pub fn router(hub: Hub) -> Router {
    Router::new().route("/health", get(health)).route("/ws", get(upgrade)).with_state(hub)
}

async fn health(State(hub): State<Hub>) -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok", "classrooms": hub.classroom_count() }))
}

async fn upgrade(ws: WebSocketUpgrade, State(hub): State<Hub>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, hub))
}

fn parse(text: &str) -> Result<ClientMessage, ServerMessage> {
    serde_json::from_str(text).map_err(|e| ServerMessage::error(ErrorCode::BadMessage, e.to_string()))
}

async fn send(socket: &mut WebSocket, message: &ServerMessage) -> bool {
    socket.send(Message::Text(message.to_json().into())).await.is_ok()
}

/// Reads frames until the first well-formed message, which fixes the role of
/// the connection.
async fn connection(mut socket: WebSocket, hub: Hub) {
    let mut shutdown = hub.inner.shutdown.clone();
    loop {
        let text = tokio::select! {
            frame = socket.recv() => match frame {
                Some(Ok(Message::Text(t))) => t,
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => continue,
            },
            _ = shutdown.changed() => return,
        };
        let message = match parse(text.as_str()) {
            Ok(m) => m,
            Err(reply) => {
                if !send(&mut socket, &reply).await {
                    return;
                }
                continue;
            }
        };
        match message {
            ClientMessage::Join { classroom, name } => {
                let Some((_, handle)) = hub.resolve(&classroom) else {
                    let reply = ServerMessage::error(ErrorCode::JoinRejected, format!("no classroom {classroom}"));
                    if !send(&mut socket, &reply).await {
                        return;
                    }
                    continue;
                };
                let (tx, rx) = mpsc::channel(hub.inner.settings.student_queue);
                let (reply_tx, reply_rx) = oneshot::channel();
                let joined = match handle.commands.send(Command::Join { name, outbox: tx, reply: reply_tx }).await {
                    Ok(()) => reply_rx.await.unwrap_or(Err((ErrorCode::JoinRejected, "classroom unavailable".into()))),
                    Err(_) => Err((ErrorCode::JoinRejected, "classroom unavailable".into())),
                };
                match joined {
                    Ok(student_id) => return student_session(socket, handle, student_id, rx, shutdown).await,
                    Err((code, detail)) => {
                        if !send(&mut socket, &ServerMessage::error(code, detail)).await {
                            return;
                        }
                    }
                }
            }
            ClientMessage::Create { name } => match hub.create_classroom(&name) {
                Ok((classroom, token)) => {
                    let handle = hub.resolve(&classroom).expect("just created").1;
                    let outbox = Arc::new(TeacherOutbox::new(hub.inner.settings.teacher_queue));
                    outbox.push(&ServerMessage::Created { classroom: classroom.clone(), name, token: token.clone() });
                    if subscribe(&handle, token, &outbox).await.is_ok() {
                        return teacher_session(socket, hub, outbox, shutdown).await;
                    }
                }
                Err(e) => {
                    tracing::error!(error = %e, "cannot open event log");
                    if !send(&mut socket, &ServerMessage::error(ErrorCode::BadMessage, e.to_string())).await {
                        return;
                    }
                }
            },
            ClientMessage::Subscribe { classroom, token } => {
                let outbox = Arc::new(TeacherOutbox::new(hub.inner.settings.teacher_queue));
                let result = match hub.resolve(&classroom) {
                    Some((_, handle)) => subscribe(&handle, token, &outbox).await,
                    None => Err((ErrorCode::Unauthorized, format!("no classroom {classroom}"))),
                };
                match result {
                    Ok(()) => return teacher_session(socket, hub, outbox, shutdown).await,
                    Err((code, detail)) => {
                        if !send(&mut socket, &ServerMessage::error(code, detail)).await {
                            return;
                        }
                    }
                }
            }
            ClientMessage::Close { classroom, token } => {
                let reply = close(&hub, &classroom, token).await;
                if !send(&mut socket, &reply).await {
                    return;
                }
            }
            ClientMessage::Landmarks { .. } => {
                if !send(&mut socket, &ServerMessage::error(ErrorCode::FrameRejected, "join a classroom first")).await {
                    return;
                }
            }
            ClientMessage::Expression { .. } | ClientMessage::Leave => {
                if !send(&mut socket, &ServerMessage::error(ErrorCode::NotJoined, "join a classroom first")).await {
                    return;
                }
            }
        }
    }
}

async fn subscribe(handle: &ClassroomHandle, token: String, outbox: &Arc<TeacherOutbox>) -> Result<(), Rejection> {
    let (tx, rx) = oneshot::channel();
    handle
        .commands
        .send(Command::Subscribe { token, outbox: outbox.clone(), reply: tx })
        .await
        .map_err(|_| (ErrorCode::ClassroomClosed, "classroom unavailable".to_string()))?;
    rx.await.unwrap_or(Err((ErrorCode::ClassroomClosed, "classroom unavailable".into())))
}

/// Closed messages reach subscribed teachers through their outboxes; the
/// requester gets the same confirmation directly.
async fn close(hub: &Hub, classroom: &str, token: String) -> ServerMessage {
    let Some((id, handle)) = hub.resolve(classroom) else {
        return ServerMessage::error(ErrorCode::Unauthorized, format!("no classroom {classroom}"));
    };
    let (tx, rx) = oneshot::channel();
    if handle.commands.send(Command::Close { token, reply: tx }).await.is_err() {
        return ServerMessage::error(ErrorCode::ClassroomClosed, "classroom unavailable");
    }
    match rx.await {
        Ok(Ok(())) => ServerMessage::Closed { classroom: id },
        Ok(Err((code, detail))) => ServerMessage::error(code, detail),
        Err(_) => ServerMessage::error(ErrorCode::ClassroomClosed, "classroom unavailable"),
    }
}

async fn student_session(
    socket: WebSocket,
    handle: ClassroomHandle,
    student_id: String,
    mut outbox: mpsc::Receiver<String>,
    mut shutdown: watch::Receiver<bool>,
) {
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = outbox.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let mut left = false;
    loop {
        let text = tokio::select! {
            frame = stream.next() => match frame {
                Some(Ok(Message::Text(t))) => t,
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
            _ = shutdown.changed() => break,
        };
        let command = match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Ok(ClientMessage::Landmarks { ts_ms, w, h, points }) => {
                let (Ok(width), Ok(height)) = (u32::try_from(w), u32::try_from(h)) else {
                    direct(&handle, &student_id, ErrorCode::FrameRejected, "frame size must be non-negative").await;
                    continue;
                };
                Command::Frame {
                    student_id: student_id.clone(),
                    frame: LandmarkFrame { student_id: student_id.clone(), ts_ms, width, height, points },
                }
            }
            Ok(ClientMessage::Expression { label, .. }) => Command::Expression { student_id: student_id.clone(), label },
            Ok(ClientMessage::Leave) => {
                left = true;
                Command::Leave { student_id: student_id.clone() }
            }
            Ok(_) => {
                direct(&handle, &student_id, ErrorCode::BadMessage, "unexpected message for a student").await;
                continue;
            }
            Err(e) => {
                direct(&handle, &student_id, ErrorCode::BadMessage, &e.to_string()).await;
                continue;
            }
        };
        if handle.commands.send(command).await.is_err() || left {
            break;
        }
    }
    if !left {
        let _ = handle.commands.send(Command::Leave { student_id }).await;
    }
    // The actor drops the student sender on leave, which ends the writer.
    let _ = tokio::time::timeout(Duration::from_secs(1), writer).await;
}

/// Errors detected on the connection side go through the actor so they stay
/// ordered with the actor's own replies to that student.
async fn direct(handle: &ClassroomHandle, student_id: &str, code: ErrorCode, detail: &str) {
    let message = ServerMessage::error(code, detail);
    let _ = handle.commands.send(Command::Notify { student_id: student_id.to_string(), message }).await;
}

async fn teacher_session(socket: WebSocket, hub: Hub, outbox: Arc<TeacherOutbox>, mut shutdown: watch::Receiver<bool>) {
    let (mut sink, mut stream) = socket.split();
    let writer_box = outbox.clone();
    let writer = tokio::spawn(async move {
        loop {
            let text = writer_box.next().await;
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    loop {
        let text = tokio::select! {
            frame = stream.next() => match frame {
                Some(Ok(Message::Text(t))) => t,
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
            _ = shutdown.changed() => break,
        };
        let reply = match parse(text.as_str()) {
            Ok(ClientMessage::Close { classroom, token }) => close(&hub, &classroom, token).await,
            Ok(ClientMessage::Subscribe { classroom, token }) => match hub.resolve(&classroom) {
                Some((_, handle)) => match subscribe(&handle, token, &outbox).await {
                    Ok(()) => continue,
                    Err((code, detail)) => ServerMessage::error(code, detail),
                },
                None => ServerMessage::error(ErrorCode::Unauthorized, format!("no classroom {classroom}")),
            },
            Ok(ClientMessage::Create { name }) => match hub.create_classroom(&name) {
                Ok((classroom, token)) => {
                    let handle = hub.resolve(&classroom).expect("just created").1;
                    outbox.push(&ServerMessage::Created { classroom, name, token: token.clone() });
                    match subscribe(&handle, token, &outbox).await {
                        Ok(()) => continue,
                        Err((code, detail)) => ServerMessage::error(code, detail),
                    }
                }
                Err(e) => ServerMessage::error(ErrorCode::BadMessage, e.to_string()),
            },
            Ok(_) => ServerMessage::error(ErrorCode::BadMessage, "unexpected message for a teacher"),
            Err(reply) => reply,
        };
        outbox.push(&reply);
    }
    writer.abort();
}

/// Runs the server on `listener` until `shutdown` resolves. Every event is
/// flushed as it is appended, so logs are complete when this returns.
pub async fn serve(
    listener: TcpListener,
    settings: ServerSettings,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let (stop_tx, stop_rx) = watch::channel(false);
    let hub = Hub::new(settings, stop_rx);
    let app = router(hub);
    let signal = async move {
        shutdown.await;
        let _ = stop_tx.send(true);
    };
    axum::serve(listener, app).with_graceful_shutdown(signal).await
}

/// A server running on a background task, for tests and embedding.
pub struct RunningServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub async fn start(addr: &str, settings: ServerSettings) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(serve(listener, settings, async move {
            let _ = rx.await;
        }));
        Ok(Self { addr, stop: Some(tx), task })
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}/ws", self.addr)
    }

    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match tokio::time::timeout(Duration::from_secs(5), &mut self.task).await {
            Ok(joined) => joined.unwrap_or(Ok(())),
            Err(_) => {
                self.task.abort();
                Ok(())
            }
        }
    }
}
