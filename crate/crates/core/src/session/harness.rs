//! Deterministic in-process driver for [`Session`] on a virtual clock.
//!
//! Scheduled items run in `(due time, insertion order)` order, so a run is a
//! pure function of the settings, the seed and the scripted clients.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::client::BotBrain;
use super::log::LogRecord;
use super::wire::{ClientMsg, ServerMsg};
use super::{ConnId, Input, Output, Session, SessionError, SessionPhase, SessionSettings};
use crate::strategy::DelayWindow;

/// A scripted participant: reacts to server messages with delayed replies.
pub trait VirtualClient {
    fn on_message(&mut self, now_ms: u64, msg: &ServerMsg) -> Vec<(u64, ClientMsg)>;
}

impl<F> VirtualClient for F
where
    F: FnMut(u64, &ServerMsg) -> Vec<(u64, ClientMsg)>,
{
    fn on_message(&mut self, now_ms: u64, msg: &ServerMsg) -> Vec<(u64, ClientMsg)> {
        self(now_ms, msg)
    }
}

/// Strategy-driven client with seeded think times.
pub struct BrainClient {
    pub brain: BotBrain,
    rng: ChaCha8Rng,
    think: DelayWindow,
}

impl BrainClient {
    pub fn new(brain: BotBrain, seed: u64, think: DelayWindow) -> Self {
        BrainClient {
            brain,
            rng: ChaCha8Rng::seed_from_u64(seed),
            think,
        }
    }
}

impl VirtualClient for BrainClient {
    fn on_message(&mut self, _now_ms: u64, msg: &ServerMsg) -> Vec<(u64, ClientMsg)> {
        let replies = self.brain.on_message(msg).expect("server messages are consistent");
        replies
            .into_iter()
            .map(|reply| (self.think.sample(&mut self.rng), reply))
            .collect()
    }
}

pub struct Harness {
    session: Session,
    now: u64,
    seq: u64,
    queue: BTreeMap<(u64, u64), Input>,
    clients: BTreeMap<ConnId, Box<dyn VirtualClient>>,
    log: Vec<LogRecord>,
    transcripts: BTreeMap<ConnId, Vec<(u64, ServerMsg)>>,
    phases: Vec<SessionPhase>,
}

impl Harness {
    pub fn open(id: &str, settings: SessionSettings, seed: u64) -> Result<Self, SessionError> {
        let (session, out) = Session::open(id, settings, seed, 0)?;
        let mut h = Harness {
            phases: vec![SessionPhase::Lobby],
            session,
            now: 0,
            seq: 0,
            queue: BTreeMap::new(),
            clients: BTreeMap::new(),
            log: Vec::new(),
            transcripts: BTreeMap::new(),
        };
        h.apply(out);
        Ok(h)
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Every distinct phase the session has passed through, in order.
    pub fn phases(&self) -> &[SessionPhase] {
        &self.phases
    }

    pub fn transcript(&self, conn: ConnId) -> &[(u64, ServerMsg)] {
        self.transcripts.get(&conn).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Register a client and schedule its first message.
    pub fn connect(&mut self, conn: ConnId, client: Box<dyn VirtualClient>, at_ms: u64, first: ClientMsg) {
        self.clients.insert(conn, client);
        self.schedule(at_ms, Input::Message { conn, msg: first });
    }

    pub fn schedule(&mut self, at_ms: u64, input: Input) {
        let at = at_ms.max(self.now);
        self.queue.insert((at, self.seq), input);
        self.seq += 1;
    }

    /// Process `input` immediately at the current time.
    pub fn inject(&mut self, input: Input) -> Output {
        let out = self.session.handle(self.now, input);
        self.apply(out.clone());
        out
    }

    /// Run the next scheduled item. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some(((at, _), input)) = self.queue.pop_first() else {
            return false;
        };
        self.now = at;
        let out = self.session.handle(at, input);
        self.apply(out);
        true
    }

    pub fn run_until_idle(&mut self) {
        while self.step() {}
    }

    /// Run every item due at or before `t_ms`, then set the clock to `t_ms`.
    pub fn run_until(&mut self, t_ms: u64) {
        while let Some((&(at, _), _)) = self.queue.first_key_value() {
            if at > t_ms {
                break;
            }
            self.step();
        }
        self.now = self.now.max(t_ms);
    }

    fn apply(&mut self, out: Output) {
        if self.phases.last() != Some(&self.session.phase()) {
            self.phases.push(self.session.phase());
        }
        self.log.extend(out.records);
        for timer in out.timers {
            self.schedule(self.now + timer.after_ms, timer.input);
        }
        for msg in out.messages {
            self.transcripts
                .entry(msg.to)
                .or_default()
                .push((self.now, msg.msg.clone()));
            if let Some(client) = self.clients.get_mut(&msg.to) {
                let replies = client.on_message(self.now, &msg.msg);
                for (delay, reply) in replies {
                    let input = Input::Message { conn: msg.to, msg: reply };
                    self.schedule(self.now + delay, input);
                }
            }
        }
    }
}
