//! WebSocket session server.
//!
//! Every configured session runs as one actor task that owns the
//! [`Session`] state machine, its event log and its timer queue. Connection
//! tasks only parse frames and enqueue them; all game state changes happen on
//! the actor.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};
use tokio::task::JoinHandle;
use tokio::time::Instant;
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, info, warn};

use pgg_core::game::GameHistory;
use pgg_core::session::config::ServerConfig;
use pgg_core::session::log::EventLog;
use pgg_core::session::wire::{ClientMsg, ErrorCode, ServerMsg};
use pgg_core::session::{ConnId, Input, Output, Session, SessionPhase};

pub struct ServeOptions {
    pub config: ServerConfig,
    pub listen: String,
    pub log_dir: PathBuf,
    pub seed: u64,
}

/// State of a session actor once it has stopped.
#[derive(Debug)]
pub struct SessionSummary {
    pub id: String,
    pub log_path: PathBuf,
    pub phase: SessionPhase,
    pub history: GameHistory,
}

pub struct ServerHandle {
    pub local_addr: SocketAddr,
    sessions: Vec<JoinHandle<SessionSummary>>,
    accept: JoinHandle<()>,
}

impl ServerHandle {
    /// Wait until every session has closed, then stop accepting connections.
    pub async fn wait_sessions(self) -> anyhow::Result<Vec<SessionSummary>> {
        let mut out = Vec::new();
        for handle in self.sessions {
            out.push(handle.await.context("session task panicked")?);
        }
        self.accept.abort();
        Ok(out)
    }
}

enum ActorMsg {
    Attach { conn: ConnId, tx: UnboundedSender<ServerMsg> },
    Input(Input),
}

type Registry = Arc<HashMap<String, UnboundedSender<ActorMsg>>>;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Per-session seed: the server seed mixed with the session's position.
pub fn session_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub async fn serve(opts: ServeOptions) -> anyhow::Result<ServerHandle> {
    std::fs::create_dir_all(&opts.log_dir)
        .with_context(|| format!("creating log dir {}", opts.log_dir.display()))?;
    let mut registry = HashMap::new();
    let mut sessions = Vec::new();
    for (index, id) in opts.config.sessions.iter().enumerate() {
        let log_path = opts.log_dir.join(format!("{id}.ndjson"));
        let log = EventLog::create(&log_path)?;
        let (tx, rx) = unbounded_channel();
        let (session, out) = Session::open(
            id.clone(),
            opts.config.settings.clone(),
            session_seed(opts.seed, index),
            now_ms(),
        )?;
        registry.insert(id.clone(), tx);
        let actor = SessionActor {
            session,
            log,
            log_path,
            conns: HashMap::new(),
            timers: BTreeMap::new(),
            seq: 0,
        };
        sessions.push(tokio::spawn(actor.run(out, rx)));
    }
    let listener = TcpListener::bind(&opts.listen)
        .await
        .with_context(|| format!("binding {}", opts.listen))?;
    let local_addr = listener.local_addr()?;
    info!(%local_addr, sessions = opts.config.sessions.len(), "listening");
    let registry: Registry = Arc::new(registry);
    let accept = tokio::spawn(accept_loop(listener, registry));
    Ok(ServerHandle {
        local_addr,
        sessions,
        accept,
    })
}

async fn accept_loop(listener: TcpListener, registry: Registry) {
    let mut next_conn = 0u64;
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(pair) => pair,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let conn = ConnId(next_conn);
        next_conn += 1;
        let registry = registry.clone();
        tokio::spawn(async move {
            if let Err(e) = handle_connection(stream, conn, registry).await {
                debug!(%peer, "connection ended: {e}");
            }
        });
    }
}

async fn handle_connection(stream: TcpStream, conn: ConnId, registry: Registry) -> anyhow::Result<()> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = unbounded_channel::<ServerMsg>();
    let writer = tokio::spawn(async move {
        while let Some(msg) = rx.recv().await {
            let text = serde_json::to_string(&msg).expect("server messages serialize");
            if sink.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        let _ = sink.close().await;
    });

    // Before joining we hold the only sender; afterwards the session actor owns
    // it, so the socket closes when the session does.
    let mut direct = Some(tx.clone());
    let weak = tx.downgrade();
    drop(tx);
    let mut session: Option<UnboundedSender<ActorMsg>> = None;

    let reply = |direct: &Option<UnboundedSender<ServerMsg>>, msg: ServerMsg| {
        if let Some(tx) = direct.clone().or_else(|| weak.upgrade()) {
            let _ = tx.send(msg);
        }
    };

    while let Some(frame) = source.next().await {
        let text = match frame {
            Ok(Message::Text(t)) => t,
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(Message::Binary(_)) => {
                reply(&direct, ServerMsg::error(ErrorCode::MalformedMessage, "expected a text frame"));
                continue;
            }
            Ok(_) => continue,
        };
        let msg: ClientMsg = match serde_json::from_str(text.as_str()) {
            Ok(m) => m,
            Err(e) => {
                reply(&direct, ServerMsg::error(ErrorCode::MalformedMessage, e.to_string()));
                continue;
            }
        };
        if session.is_none() {
            let ClientMsg::Join { session: id, .. } = &msg else {
                reply(&direct, ServerMsg::error(ErrorCode::NotJoined, "join a session first"));
                continue;
            };
            let Some(actor) = registry.get(id) else {
                reply(&direct, ServerMsg::error(ErrorCode::UnknownSession, format!("no session named {id:?}")));
                continue;
            };
            let tx = direct.take().expect("not yet attached");
            if actor.send(ActorMsg::Attach { conn, tx }).is_err() {
                break;
            }
            session = Some(actor.clone());
        }
        let actor = session.as_ref().expect("attached");
        if actor.send(ActorMsg::Input(Input::Message { conn, msg })).is_err() {
            break;
        }
    }
    if let Some(actor) = session {
        let _ = actor.send(ActorMsg::Input(Input::Disconnected { conn }));
    }
    drop(direct);
    writer.abort();
    Ok(())
}

struct SessionActor {
    session: Session,
    log: EventLog,
    log_path: PathBuf,
    conns: HashMap<ConnId, UnboundedSender<ServerMsg>>,
    timers: BTreeMap<(Instant, u64), Input>,
    seq: u64,
}

impl SessionActor {
    async fn run(mut self, first: Output, mut inbox: UnboundedReceiver<ActorMsg>) -> SessionSummary {
        self.process(first);
        while !self.session.is_closed() {
            let next_timer = self.timers.first_key_value().map(|(&(at, _), _)| at);
            tokio::select! {
                biased;
                msg = inbox.recv() => match msg {
                    Some(ActorMsg::Attach { conn, tx }) => {
                        self.conns.insert(conn, tx);
                    }
                    Some(ActorMsg::Input(input)) => {
                        let out = self.session.handle(now_ms(), input);
                        self.process(out);
                    }
                    None => break,
                },
                _ = sleep_until(next_timer) => {
                    let (_, input) = self.timers.pop_first().expect("timer present");
                    let out = self.session.handle(now_ms(), input);
                    self.process(out);
                }
            }
        }
        info!(session = self.session.id(), phase = %self.session.phase(), "session finished");
        SessionSummary {
            id: self.session.id().to_string(),
            log_path: self.log_path,
            phase: self.session.phase(),
            history: self.session.history().clone(),
        }
    }

    fn process(&mut self, out: Output) {
        for record in &out.records {
            if let Err(e) = self.log.append(record) {
                warn!(session = self.session.id(), "{e}; aborting session");
                let abort = self.session.abort(now_ms(), &e.to_string());
                self.deliver(abort.messages);
                return;
            }
        }
        let now = Instant::now();
        for timer in out.timers {
            let at = now + Duration::from_millis(timer.after_ms);
            self.timers.insert((at, self.seq), timer.input);
            self.seq += 1;
        }
        self.deliver(out.messages);
    }

    fn deliver(&mut self, messages: Vec<pgg_core::session::Outbound>) {
        for m in messages {
            if let Some(tx) = self.conns.get(&m.to) {
                let _ = tx.send(m.msg);
            }
        }
    }
}

async fn sleep_until(at: Option<Instant>) {
    match at {
        Some(at) => tokio::time::sleep_until(at).await,
        None => std::future::pending().await,
    }
}
