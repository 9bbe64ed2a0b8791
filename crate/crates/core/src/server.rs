//! Network front end: connection handlers, the ingress queue, the tick loop
//! and snapshot fan-out.
//!
//! Connection handlers only ever touch the [`Ingress`] (which stamps `seq`
//! and queues events) and their own outbound channel. One task owns the
//! [`Session`]; each tick it drains the queue, steps, encodes one snapshot
//! and hands the same `Arc<str>` to every client. A client whose backlog
//! fills up is disconnected.
//!
//! A connection speaks either WebSocket (detected by a leading `GET `) or
//! raw length-prefixed frames; the messages are the same.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::pin::Pin;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures::{Sink, SinkExt, Stream, StreamExt};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::Instant;
use tokio_tungstenite::tungstenite::Message;
use tokio_util::bytes::Bytes;
use tokio_util::codec::{FramedRead, FramedWrite};
use tokio_util::sync::CancellationToken;

use crate::chatparse::{ChatEvent, EventKind, ViewerId};
use crate::economy::Ledger;
use crate::protocol::{
    decode_client, encode_server, frame_codec, ClientMessage, Notice, ServerMessage,
    MAX_CLIENT_FRAME, MAX_SERVER_FRAME, PROTOCOL_VERSION,
};
use crate::session::{LogHeader, ReplayWriter, Session, SessionConfig};
use crate::versegame::Finale;

pub const DEFAULT_BACKLOG: usize = 90;
pub const MAX_COMMENT_CHARS: usize = 500;
pub const MAX_NAME_CHARS: usize = 32;

/// Per-viewer token bucket on comments. Gifts are not limited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimit {
    pub per_second: f64,
    pub burst: f64,
}

impl Default for RateLimit {
    fn default() -> Self {
        RateLimit {
            per_second: 2.0,
            burst: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub session_id: String,
    pub seed: u64,
    /// Snapshots a client may fall behind before it is dropped.
    pub backlog: usize,
    pub rate_limit: Option<RateLimit>,
    /// Stop by itself after this many ticks.
    pub max_ticks: Option<u64>,
    /// Keep every per-tick hash in the summary.
    pub record_hashes: bool,
    pub hello_timeout: Duration,
}

impl ServerOptions {
    pub fn new(session_id: impl Into<String>, seed: u64) -> Self {
        ServerOptions {
            session_id: session_id.into(),
            seed,
            backlog: DEFAULT_BACKLOG,
            rate_limit: Some(RateLimit::default()),
            max_ticks: None,
            record_hashes: false,
            hello_timeout: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("writing replay log: {0}")]
    Log(#[from] io::Error),
    #[error("session task failed: {0}")]
    Task(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("comments are limited to {0} characters")]
    TooLong(usize),
    #[error("slow down: at most {0} comments per second")]
    RateLimited(f64),
    #[error("gift amount must be positive")]
    NonPositive,
    #[error("the session has ended")]
    Closed,
}

struct Bucket {
    tokens: f64,
    updated: Instant,
}

struct IngressState {
    next_seq: u64,
    buckets: HashMap<ViewerId, Bucket>,
}

/// Stamps events with `seq` and a timestamp and queues them for the tick
/// loop. The lock spans stamping and queueing, so queue order is seq order.
pub struct Ingress {
    state: Mutex<IngressState>,
    tx: mpsc::UnboundedSender<ChatEvent>,
    started: Instant,
    rate_limit: Option<RateLimit>,
}

impl Ingress {
    fn new(tx: mpsc::UnboundedSender<ChatEvent>, rate_limit: Option<RateLimit>) -> Self {
        Ingress {
            state: Mutex::new(IngressState {
                next_seq: 1,
                buckets: HashMap::new(),
            }),
            tx,
            started: Instant::now(),
            rate_limit,
        }
    }

    /// Queues one event and returns its seq.
    pub fn ingest(
        &self,
        viewer: &ViewerId,
        display_name: &str,
        kind: EventKind,
    ) -> Result<u64, IngestError> {
        match &kind {
            EventKind::Comment { text } => {
                if text.chars().count() > MAX_COMMENT_CHARS {
                    return Err(IngestError::TooLong(MAX_COMMENT_CHARS));
                }
            }
            EventKind::Gift { amount } => {
                if !amount.is_positive() {
                    return Err(IngestError::NonPositive);
                }
            }
        }
        let now = Instant::now();
        let mut state = self.state.lock().expect("ingress lock");
        if let (EventKind::Comment { .. }, Some(limit)) = (&kind, self.rate_limit) {
            let bucket = state.buckets.entry(viewer.clone()).or_insert(Bucket {
                tokens: limit.burst,
                updated: now,
            });
            let elapsed = now.duration_since(bucket.updated).as_secs_f64();
            bucket.tokens = (bucket.tokens + elapsed * limit.per_second).min(limit.burst);
            bucket.updated = now;
            if bucket.tokens < 1.0 {
                return Err(IngestError::RateLimited(limit.per_second));
            }
            bucket.tokens -= 1.0;
        }
        let seq = state.next_seq;
        let event = ChatEvent {
            seq,
            timestamp_ms: now.duration_since(self.started).as_millis() as u64,
            viewer_id: viewer.clone(),
            display_name: display_name.to_string(),
            kind,
        };
        self.tx.send(event).map_err(|_| IngestError::Closed)?;
        state.next_seq += 1;
        Ok(seq)
    }
}

struct ClientSlot {
    viewer: ViewerId,
    tx: mpsc::Sender<Arc<str>>,
    cancel: CancellationToken,
}

/// Connected clients and the latest snapshot.
struct Hub {
    clients: Mutex<BTreeMap<u64, ClientSlot>>,
    latest: Mutex<Option<Arc<str>>>,
    next_conn: AtomicU64,
    next_viewer: AtomicU64,
    tick: AtomicU64,
    slow_disconnects: AtomicU64,
}

impl Hub {
    fn broadcast(&self, frame: Arc<str>) {
        let mut clients = self.clients.lock().expect("hub lock");
        clients.retain(|_, slot| match slot.tx.try_send(Arc::clone(&frame)) {
            Ok(()) => true,
            Err(mpsc::error::TrySendError::Full(_)) => {
                tracing::warn!(viewer = %slot.viewer, "client fell behind; disconnecting");
                self.slow_disconnects.fetch_add(1, Ordering::Relaxed);
                slot.cancel.cancel();
                false
            }
            Err(mpsc::error::TrySendError::Closed(_)) => false,
        });
        *self.latest.lock().expect("hub lock") = Some(frame);
    }

    fn latest(&self) -> Option<Arc<str>> {
        self.latest.lock().expect("hub lock").clone()
    }

    fn remove(&self, conn: u64) {
        self.clients.lock().expect("hub lock").remove(&conn);
    }

    fn client_count(&self) -> usize {
        self.clients.lock().expect("hub lock").len()
    }
}

struct Shared {
    ingress: Ingress,
    hub: Hub,
    shutdown: CancellationToken,
    options: ServerOptions,
    tick_rate: u32,
    background_plate: String,
    image_size: [u32; 2],
}

/// Cheap, cloneable access to a running server.
#[derive(Clone)]
pub struct ServerHandle {
    shared: Arc<Shared>,
}

/// End-of-session results.
#[derive(Debug, Clone)]
pub struct SessionSummary {
    pub session_id: String,
    pub seed: u64,
    pub ticks: u64,
    pub events: u64,
    pub final_hash: String,
    pub chain: String,
    /// Post-tick hashes for ticks 1..=ticks, if requested.
    pub tick_hashes: Vec<[u8; 32]>,
    pub ledger: Ledger,
    pub finales: Vec<(u64, Finale)>,
    pub slow_disconnects: u64,
}

pub struct Server {
    handle: ServerHandle,
    task: JoinHandle<Result<SessionSummary, ServerError>>,
}

type LogSink = Box<dyn Write + Send>;

impl Server {
    /// Starts the tick loop. Must be called inside a Tokio runtime. The
    /// replay log header is written before this returns.
    pub fn start(
        config: SessionConfig,
        options: ServerOptions,
        log: Option<LogSink>,
    ) -> Result<Server, ServerError> {
        let log = match log {
            Some(out) => Some(ReplayWriter::new(
                out,
                LogHeader::new(&options.session_id, options.seed, &config),
            )?),
            None => None,
        };
        let session = Session::new(config, options.seed);
        let scene = session.scene();
        let (tx, rx) = mpsc::unbounded_channel();
        let shared = Arc::new(Shared {
            ingress: Ingress::new(tx, options.rate_limit),
            hub: Hub {
                clients: Mutex::new(BTreeMap::new()),
                latest: Mutex::new(None),
                next_conn: AtomicU64::new(1),
                next_viewer: AtomicU64::new(1),
                tick: AtomicU64::new(0),
                slow_disconnects: AtomicU64::new(0),
            },
            shutdown: CancellationToken::new(),
            tick_rate: session.tick_rate(),
            background_plate: scene.background_plate().to_string(),
            image_size: scene.camera().image_size,
            options,
        });
        let task = tokio::spawn(tick_loop(session, rx, Arc::clone(&shared), log));
        Ok(Server {
            handle: ServerHandle { shared },
            task,
        })
    }

    pub fn handle(&self) -> ServerHandle {
        self.handle.clone()
    }

    /// Asks the tick loop to stop and waits for the summary.
    pub async fn shutdown(self) -> Result<SessionSummary, ServerError> {
        self.handle.shared.shutdown.cancel();
        self.finish().await
    }

    /// Waits for the tick loop to stop by itself (`max_ticks`) or through a
    /// handle's [`ServerHandle::shutdown`].
    pub async fn finish(self) -> Result<SessionSummary, ServerError> {
        match self.task.await {
            Ok(result) => result,
            Err(e) => Err(ServerError::Task(e.to_string())),
        }
    }
}

impl ServerHandle {
    pub fn ingress(&self) -> &Ingress {
        &self.shared.ingress
    }

    pub fn shutdown(&self) {
        self.shared.shutdown.cancel();
    }

    pub fn is_shut_down(&self) -> bool {
        self.shared.shutdown.is_cancelled()
    }

    pub fn current_tick(&self) -> u64 {
        self.shared.hub.tick.load(Ordering::Relaxed)
    }

    pub fn client_count(&self) -> usize {
        self.shared.hub.client_count()
    }

    /// Accepts TCP connections until shutdown.
    pub async fn serve_tcp(&self, listener: TcpListener) -> io::Result<()> {
        loop {
            tokio::select! {
                _ = self.shared.shutdown.cancelled() => return Ok(()),
                accepted = listener.accept() => {
                    let (stream, peer) = accepted?;
                    let _ = stream.set_nodelay(true);
                    tracing::debug!(%peer, "connection");
                    let handle = self.clone();
                    tokio::spawn(async move { handle.serve_connection(stream).await });
                }
            }
        }
    }

    /// An in-memory connection, as if a client had connected over TCP.
    pub fn connect_in_memory(&self) -> tokio::io::DuplexStream {
        let (client, server) = tokio::io::duplex(256 * 1024);
        let handle = self.clone();
        tokio::spawn(async move { handle.serve_connection(server).await });
        client
    }

    /// Runs one connection to completion.
    pub async fn serve_connection<S>(&self, mut stream: S)
    where
        S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
    {
        let mut head = [0u8; 4];
        let sniff = async {
            let mut got = 0;
            while got < head.len() {
                match stream.read(&mut head[got..]).await {
                    Ok(0) | Err(_) => return false,
                    Ok(n) => got += n,
                }
            }
            true
        };
        // a client that sends nothing at all is simply dropped
        let sniffed = tokio::select! {
            _ = self.shared.shutdown.cancelled() => false,
            r = tokio::time::timeout(self.shared.options.hello_timeout, sniff) => r.unwrap_or(false),
        };
        if !sniffed {
            return;
        }
        let (read, write) = tokio::io::split(stream);
        let read = std::io::Cursor::new(head.to_vec()).chain(read);
        if &head == b"GET " {
            match tokio_tungstenite::accept_async(tokio::io::join(read, write)).await {
                Ok(ws) => {
                    let (sink, source) = ws.split();
                    let source = source.filter_map(|m| async move {
                        match m {
                            Ok(Message::Text(t)) => Some(Ok(t.as_str().to_string())),
                            Ok(Message::Binary(b)) => Some(
                                String::from_utf8(b.to_vec())
                                    .map_err(|_| io::Error::other("binary frame is not UTF-8")),
                            ),
                            Ok(Message::Close(_)) => None,
                            Ok(_) => None,
                            Err(e) => Some(Err(io::Error::other(e))),
                        }
                    });
                    let sink = sink
                        .sink_map_err(io::Error::other)
                        .with(|s: Arc<str>| async move { Ok::<_, io::Error>(Message::text(&*s)) });
                    self.run_connection(Box::pin(source), Box::pin(sink)).await;
                }
                Err(e) => tracing::debug!(error = %e, "websocket handshake failed"),
            }
        } else {
            let source = FramedRead::new(read, frame_codec(MAX_CLIENT_FRAME)).map(|frame| {
                let frame = frame?;
                String::from_utf8(frame.to_vec())
                    .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "frame is not UTF-8"))
            });
            let sink = FramedWrite::new(write, frame_codec(MAX_SERVER_FRAME))
                .with(|s: Arc<str>| async move { Ok::<_, io::Error>(Bytes::copy_from_slice(s.as_bytes())) });
            self.run_connection(Box::pin(source), Box::pin(sink)).await;
        }
    }

    async fn run_connection(
        &self,
        mut source: Pin<Box<dyn Stream<Item = io::Result<String>> + Send>>,
        mut sink: Pin<Box<dyn Sink<Arc<str>, Error = io::Error> + Send>>,
    ) {
        let shared = &self.shared;
        let refuse = |code: &str, message: &str| -> Arc<str> {
            encode_server(&ServerMessage::error(code, message)).into()
        };
        let first = tokio::select! {
            _ = shared.shutdown.cancelled() => return,
            r = tokio::time::timeout(shared.options.hello_timeout, source.next()) => r,
        };
        let display_name = match first {
            Ok(Some(Ok(text))) => match decode_client(&text) {
                Ok(ClientMessage::Hello { display_name, .. }) => {
                    let name = display_name.split_whitespace().collect::<Vec<_>>().join(" ");
                    if name.is_empty() || name.chars().count() > MAX_NAME_CHARS {
                        let msg = format!("display name must be 1 to {MAX_NAME_CHARS} characters");
                        let _ = sink.send(refuse("bad_name", &msg)).await;
                        return;
                    }
                    name
                }
                Ok(_) => {
                    let _ = sink.send(refuse("protocol", "first message must be hello")).await;
                    return;
                }
                Err(e) => {
                    let _ = sink.send(refuse("protocol", &e.to_string())).await;
                    return;
                }
            },
            Ok(Some(Err(e))) => {
                tracing::debug!(error = %e, "bad first frame");
                return;
            }
            Ok(None) => return,
            Err(_) => {
                let _ = sink.send(refuse("timeout", "no hello received")).await;
                return;
            }
        };

        let viewer = ViewerId(format!("v{}", shared.hub.next_viewer.fetch_add(1, Ordering::Relaxed)));
        let conn = shared.hub.next_conn.fetch_add(1, Ordering::Relaxed);
        let (tx, mut rx) = mpsc::channel::<Arc<str>>(shared.options.backlog.max(1));
        let cancel = shared.shutdown.child_token();
        let welcome: Arc<str> = encode_server(&ServerMessage::Welcome {
            v: PROTOCOL_VERSION,
            viewer_id: viewer.clone(),
            session_id: shared.options.session_id.clone(),
            tick_rate: shared.tick_rate,
            background_plate: shared.background_plate.clone(),
            image_size: shared.image_size,
        })
        .into();
        let _ = tx.try_send(welcome);
        {
            let mut clients = shared.hub.clients.lock().expect("hub lock");
            // latest snapshot first, then every later one, in order
            if let Some(latest) = shared.hub.latest() {
                let _ = tx.try_send(latest);
            }
            clients.insert(
                conn,
                ClientSlot {
                    viewer: viewer.clone(),
                    tx: tx.clone(),
                    cancel: cancel.clone(),
                },
            );
        }
        tracing::info!(%viewer, name = %display_name, "viewer joined");

        let writer_cancel = cancel.clone();
        let writer = tokio::spawn(async move {
            loop {
                tokio::select! {
                    biased;
                    frame = rx.recv() => match frame {
                        Some(frame) => if sink.send(frame).await.is_err() { break },
                        None => break,
                    },
                    _ = writer_cancel.cancelled() => break,
                }
            }
            let _ = sink.close().await;
        });

        let reply = |msg: ServerMessage| {
            if tx.try_send(encode_server(&msg).into()).is_err() {
                cancel.cancel();
            }
        };
        loop {
            let frame = tokio::select! {
                _ = cancel.cancelled() => break,
                f = source.next() => f,
            };
            let text = match frame {
                Some(Ok(text)) => text,
                Some(Err(e)) => {
                    tracing::debug!(%viewer, error = %e, "read failed");
                    break;
                }
                None => break,
            };
            let msg = match decode_client(&text) {
                Ok(msg) => msg,
                Err(e) => {
                    reply(ServerMessage::error("bad_message", e.to_string()));
                    continue;
                }
            };
            let kind = match msg {
                ClientMessage::Hello { .. } => {
                    reply(ServerMessage::error("protocol", "already greeted"));
                    continue;
                }
                ClientMessage::Ping { nonce, .. } => {
                    reply(ServerMessage::Pong {
                        v: PROTOCOL_VERSION,
                        nonce,
                        tick: shared.hub.tick.load(Ordering::Relaxed),
                    });
                    continue;
                }
                ClientMessage::Resync { .. } => {
                    if let Some(latest) = shared.hub.latest() {
                        if tx.try_send(latest).is_err() {
                            cancel.cancel();
                        }
                    }
                    continue;
                }
                ClientMessage::Comment { text, .. } => EventKind::Comment { text },
                ClientMessage::Gift { amount, .. } => EventKind::Gift { amount },
            };
            if let Err(e) = shared.ingress.ingest(&viewer, &display_name, kind) {
                if e == IngestError::Closed {
                    break;
                }
                reply(ServerMessage::notice(Notice::to(&viewer, e.to_string())));
            }
        }
        shared.hub.remove(conn);
        cancel.cancel();
        let _ = writer.await;
        tracing::info!(%viewer, "viewer left");
    }
}

async fn tick_loop(
    mut session: Session,
    mut rx: mpsc::UnboundedReceiver<ChatEvent>,
    shared: Arc<Shared>,
    mut log: Option<ReplayWriter<LogSink>>,
) -> Result<SessionSummary, ServerError> {
    let options = &shared.options;
    let period = Duration::from_secs_f64(1.0 / session.tick_rate() as f64);
    let mut interval = tokio::time::interval_at(Instant::now() + period, period);
    let mut tick_hashes = Vec::new();
    let mut events = 0u64;
    let mut broadcast_seq = 0u64;
    let mut stopping = false;
    loop {
        tokio::select! {
            biased;
            _ = shared.shutdown.cancelled() => stopping = true,
            _ = interval.tick() => {}
        }
        while let Ok(event) = rx.try_recv() {
            if let Some(log) = log.as_mut() {
                log.event(session.tick(), &event)?;
            }
            session
                .apply(&event)
                .expect("ingress hands out increasing seq numbers");
            events += 1;
        }
        let report = session.step();
        if options.record_hashes {
            tick_hashes.push(report.hash);
        }
        broadcast_seq += 1;
        let frame: Arc<str> =
            encode_server(&ServerMessage::Snapshot(session.snapshot(broadcast_seq, &options.session_id))).into();
        shared.hub.tick.store(session.tick(), Ordering::Relaxed);
        shared.hub.broadcast(frame);
        if let Some(log) = log.as_mut() {
            log.flush()?;
        }
        if options.max_ticks.is_some_and(|max| session.tick() >= max) {
            stopping = true;
        }
        if stopping {
            break;
        }
    }
    // Refuse new events and close every connection. Events that were
    // stamped before the queue closed are still applied and logged.
    shared.shutdown.cancel();
    rx.close();
    let mut drained = 0;
    while let Some(event) = rx.recv().await {
        if let Some(log) = log.as_mut() {
            log.event(session.tick(), &event)?;
        }
        session
            .apply(&event)
            .expect("ingress hands out increasing seq numbers");
        drained += 1;
    }
    if drained > 0 {
        // one closing tick so the final hash covers the late events
        let report = session.step();
        if options.record_hashes {
            tick_hashes.push(report.hash);
        }
        events += drained;
    }
    if let Some(log) = log {
        log.end(&session)?;
    }
    tracing::info!(ticks = session.tick(), events, "session ended");
    Ok(SessionSummary {
        session_id: options.session_id.clone(),
        seed: options.seed,
        ticks: session.tick(),
        events,
        final_hash: hex::encode(session.state_hash()),
        chain: hex::encode(session.chain_hash()),
        tick_hashes,
        ledger: session.economy().ledger().clone(),
        finales: session.finales().to_vec(),
        slow_disconnects: shared.hub.slow_disconnects.load(Ordering::Relaxed),
    })
}
