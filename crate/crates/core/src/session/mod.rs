//! Live experiment session: lobby, simultaneous decisions, reveals and the
//! post-game questionnaire.
//!
//! [`Session`] is a deterministic state machine with no I/O. A driver feeds it
//! [`Input`]s with the current time and carries out the returned [`Output`]:
//! write the log records, deliver the messages, and schedule the timers. Timers
//! that come due at the same instant must be fed back in the order they were
//! returned.

pub mod client;
pub mod config;
pub mod harness;
pub mod log;
pub mod wire;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{resolve_round, GameConfig, GameHistory, PlayerId};
use crate::money::Money;
use crate::strategy::{decide, pick_idle_actions, DelayWindow, PersonaAction, StrategyState};

use self::log::{LogRecord, SessionEvent};
use self::wire::{
    check_representable, scores_to_milli, ClientMsg, ErrorCode, QuestionnaireResponse,
    RoundPayload, SeatInfo, ServerMsg, WireConfig, WireError,
};

/// Session RNG: one seeded ChaCha8 stream drives every bot delay and persona draw.
pub type SessionRng = ChaCha8Rng;

/// Transport-level connection handle assigned by the driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConnId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionPhase {
    Lobby,
    Decision(usize),
    Reveal(usize),
    Questionnaire,
    Closed,
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionPhase::Lobby => f.write_str("lobby"),
            SessionPhase::Decision(k) => write!(f, "decision({k})"),
            SessionPhase::Reveal(k) => write!(f, "reveal({k})"),
            SessionPhase::Questionnaire => f.write_str("questionnaire"),
            SessionPhase::Closed => f.write_str("closed"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeatSpec {
    Human,
    Bot { name: String, strategy: StrategyState },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionSettings {
    pub config: GameConfig,
    /// One entry per player, in seat order.
    pub seats: Vec<SeatSpec>,
    /// 0 disables the decision timeout.
    pub decision_timeout_ms: u64,
    /// Time the reveal stays on screen before the next round starts.
    pub reveal_pause_ms: u64,
    pub bot_delay: DelayWindow,
    pub persona_actions: Vec<PersonaAction>,
    pub max_persona_actions: usize,
    pub questionnaire: bool,
}

impl SessionSettings {
    /// Default game with one always-cooperating bot in the last seat.
    pub fn with_config(config: GameConfig) -> Self {
        let n = config.num_players();
        let mut seats = vec![SeatSpec::Human; n];
        seats[n - 1] = SeatSpec::Bot {
            name: "Robot".into(),
            strategy: StrategyState::new(crate::strategy::StrategyKind::AlwaysCooperate, 0),
        };
        SessionSettings {
            config,
            seats,
            decision_timeout_ms: 0,
            reveal_pause_ms: 3_000,
            bot_delay: DelayWindow::default(),
            persona_actions: PersonaAction::default_set(),
            max_persona_actions: 2,
            questionnaire: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("expected {expected} seats, got {got}")]
    SeatCount { expected: usize, got: usize },
    #[error("configuration cannot be served: {0}")]
    NotServable(#[from] WireError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Occupant {
    Human(Option<ConnId>),
    Bot(StrategyState),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Seat {
    pub player_id: PlayerId,
    pub occupant: Occupant,
    pub display_name: String,
    pub connected: bool,
    /// Set once a human drops; their remaining rounds auto-contribute 0.
    pub fallback_active: bool,
}

impl Seat {
    pub fn is_bot(&self) -> bool {
        matches!(self.occupant, Occupant::Bot(_))
    }

    fn conn(&self) -> Option<ConnId> {
        match self.occupant {
            Occupant::Human(conn) if self.connected => conn,
            _ => None,
        }
    }

    fn info(&self, reveal_strategy: bool) -> SeatInfo {
        SeatInfo {
            player_id: self.player_id.0,
            display_name: self.display_name.clone(),
            is_bot: self.is_bot(),
            strategy: match &self.occupant {
                Occupant::Bot(s) if reveal_strategy => Some(s.kind),
                _ => None,
            },
            connected: self.connected,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Input {
    Message { conn: ConnId, msg: ClientMsg },
    Disconnected { conn: ConnId },
    DecisionTimeout { round: usize },
    BotSubmit { player: PlayerId, round: usize },
    Persona { player: PlayerId, round: usize, action: PersonaAction },
    AdvanceRound { round: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outbound {
    pub to: ConnId,
    pub msg: ServerMsg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Timer {
    pub after_ms: u64,
    pub input: Input,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub messages: Vec<Outbound>,
    pub records: Vec<LogRecord>,
    pub timers: Vec<Timer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pending {
    amount: Money,
}

pub struct Session {
    id: String,
    settings: SessionSettings,
    wire_config: WireConfig,
    phase: SessionPhase,
    seats: Vec<Seat>,
    history: GameHistory,
    pending: Vec<Option<Pending>>,
    answered: Vec<bool>,
    rng: SessionRng,
    clock: u64,
    out: Output,
}

impl Session {
    /// Create a session in the lobby. Bot seats are filled immediately; if
    /// there are no human seats the first round starts right away.
    pub fn open(
        id: impl Into<String>,
        settings: SessionSettings,
        seed: u64,
        now_ms: u64,
    ) -> Result<(Session, Output), SessionError> {
        let config = settings.config.clone();
        if settings.seats.len() != config.num_players() {
            return Err(SessionError::SeatCount {
                expected: config.num_players(),
                got: settings.seats.len(),
            });
        }
        check_representable(&config)?;
        let wire_config = WireConfig::from_config(&config)?;
        let seats = settings
            .seats
            .iter()
            .enumerate()
            .map(|(i, spec)| match spec {
                SeatSpec::Human => Seat {
                    player_id: PlayerId(i),
                    occupant: Occupant::Human(None),
                    display_name: format!("Player {}", i + 1),
                    connected: false,
                    fallback_active: false,
                },
                SeatSpec::Bot { name, strategy } => Seat {
                    player_id: PlayerId(i),
                    occupant: Occupant::Bot(strategy.clone()),
                    display_name: name.clone(),
                    connected: true,
                    fallback_active: false,
                },
            })
            .collect::<Vec<_>>();
        let n = config.num_players();
        let mut session = Session {
            id: id.into(),
            wire_config,
            phase: SessionPhase::Lobby,
            pending: vec![None; n],
            answered: vec![false; n],
            history: GameHistory::new(config),
            seats,
            settings,
            rng: SessionRng::seed_from_u64(seed),
            clock: now_ms,
            out: Output::default(),
        };
        session.record(SessionEvent::SessionOpened {
            config: session.wire_config.clone(),
            seats: session.seats.iter().map(|s| s.info(true)).collect(),
        });
        for i in 0..n {
            if session.seats[i].is_bot() {
                session.record(SessionEvent::Joined {
                    player: i,
                    name: session.seats[i].display_name.clone(),
                    is_bot: true,
                });
            }
        }
        if session.free_human_seat().is_none() {
            session.start_round(0);
        }
        let out = std::mem::take(&mut session.out);
        Ok((session, out))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn seats(&self) -> &[Seat] {
        &self.seats
    }

    pub fn history(&self) -> &GameHistory {
        &self.history
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn is_closed(&self) -> bool {
        self.phase == SessionPhase::Closed
    }

    /// Number of contributions recorded for the current decision round.
    pub fn submissions_received(&self) -> usize {
        self.pending.iter().filter(|p| p.is_some()).count()
    }

    pub fn handle(&mut self, now_ms: u64, input: Input) -> Output {
        self.clock = self.clock.max(now_ms);
        match input {
            Input::Message { conn, msg } => self.on_message(conn, msg),
            Input::Disconnected { conn } => self.on_disconnect(conn),
            Input::DecisionTimeout { round } => self.on_timeout(round),
            Input::BotSubmit { player, round } => self.on_bot_submit(player, round),
            Input::Persona { player, round, action } => self.on_persona(player, round, action),
            Input::AdvanceRound { round } => self.on_advance(round),
        }
        std::mem::take(&mut self.out)
    }

    pub fn handle_message(&mut self, now_ms: u64, conn: ConnId, msg: ClientMsg) -> Output {
        self.handle(now_ms, Input::Message { conn, msg })
    }

    /// Fill every missing contribution with a flagged 0 and reveal.
    pub fn on_decision_timeout(&mut self, now_ms: u64, round: usize) -> Output {
        self.handle(now_ms, Input::DecisionTimeout { round })
    }

    /// Close the session after the event log became unwritable.
    pub fn abort(&mut self, now_ms: u64, reason: &str) -> Output {
        self.clock = self.clock.max(now_ms);
        if self.phase != SessionPhase::Closed {
            let msg = ServerMsg::error(ErrorCode::SinkUnavailable, reason);
            self.broadcast(msg);
            self.phase = SessionPhase::Closed;
            self.record(SessionEvent::SessionClosed {
                error: Some(reason.to_string()),
            });
        }
        std::mem::take(&mut self.out)
    }

    fn record(&mut self, event: SessionEvent) {
        self.out
            .records
            .push(LogRecord::new(self.clock, self.id.clone(), event));
    }

    fn send(&mut self, to: ConnId, msg: ServerMsg) {
        self.out.messages.push(Outbound { to, msg });
    }

    fn broadcast(&mut self, msg: ServerMsg) {
        let conns: Vec<ConnId> = self.seats.iter().filter_map(Seat::conn).collect();
        for conn in conns {
            self.send(conn, msg.clone());
        }
    }

    fn timer(&mut self, after_ms: u64, input: Input) {
        self.out.timers.push(Timer { after_ms, input });
    }

    fn reject(&mut self, conn: ConnId, player: Option<PlayerId>, code: ErrorCode, message: String) {
        self.record(SessionEvent::Error {
            code,
            player: player.map(PlayerId::index),
            message: message.clone(),
        });
        self.send(conn, ServerMsg::error(code, message));
    }

    fn seat_of(&self, conn: ConnId) -> Option<PlayerId> {
        self.seats
            .iter()
            .find(|s| s.connected && matches!(s.occupant, Occupant::Human(Some(c)) if c == conn))
            .map(|s| s.player_id)
    }

    fn free_human_seat(&self) -> Option<usize> {
        self.seats
            .iter()
            .position(|s| matches!(s.occupant, Occupant::Human(None)))
    }

    fn on_message(&mut self, conn: ConnId, msg: ClientMsg) {
        if self.phase == SessionPhase::Closed {
            let player = self.seat_of(conn);
            self.reject(conn, player, ErrorCode::OutOfPhaseMessage, "session is closed".into());
            return;
        }
        match msg {
            ClientMsg::Join { session, name } => self.on_join(conn, session, name),
            ClientMsg::Contribute { round, amount_cents } => {
                self.on_contribute(conn, round, amount_cents)
            }
            ClientMsg::Questionnaire { answers } => self.on_questionnaire(conn, answers),
        }
    }

    fn on_join(&mut self, conn: ConnId, session: String, name: String) {
        if session != self.id {
            self.reject(conn, None, ErrorCode::UnknownSession, format!("no session named {session:?}"));
            return;
        }
        if let Some(player) = self.seat_of(conn) {
            self.reject(conn, Some(player), ErrorCode::AlreadyJoined, format!("already seated as {player}"));
            return;
        }
        if self.phase != SessionPhase::Lobby {
            self.reject(conn, None, ErrorCode::OutOfPhaseMessage, format!("cannot join during {}", self.phase));
            return;
        }
        let Some(index) = self.free_human_seat() else {
            self.reject(conn, None, ErrorCode::SessionFull, "all seats are taken".into());
            return;
        };
        let seat = &mut self.seats[index];
        seat.occupant = Occupant::Human(Some(conn));
        seat.connected = true;
        let name = name.trim();
        if !name.is_empty() {
            seat.display_name = name.to_string();
        }
        let name = seat.display_name.clone();
        self.record(SessionEvent::Joined {
            player: index,
            name,
            is_bot: false,
        });
        let welcome = ServerMsg::Welcome {
            session: self.id.clone(),
            player_id: index,
            config: self.wire_config.clone(),
            seats: self.seats.iter().map(|s| s.info(false)).collect(),
            questionnaire: self.settings.questionnaire,
        };
        self.send(conn, welcome);
        if self.free_human_seat().is_none() {
            self.start_round(0);
        }
    }

    fn on_contribute(&mut self, conn: ConnId, round: usize, amount_cents: i64) {
        let Some(player) = self.seat_of(conn) else {
            self.reject(conn, None, ErrorCode::NotJoined, "join a session first".into());
            return;
        };
        if self.phase != SessionPhase::Decision(round) {
            let msg = format!("contribution for round {round} during {}", self.phase);
            self.reject(conn, Some(player), ErrorCode::OutOfPhaseMessage, msg);
            return;
        }
        if self.pending[player.0].is_some() {
            let msg = format!("{player} already contributed in round {round}");
            self.reject(conn, Some(player), ErrorCode::DuplicateContribution, msg);
            return;
        }
        let amount = Money::from_cents(amount_cents);
        if !self.history.config().is_allowed(amount) {
            let msg = format!("{amount_cents} cents is not an allowed amount");
            self.reject(conn, Some(player), ErrorCode::IllegalAmount, msg);
            return;
        }
        self.send(conn, ServerMsg::ContributionAck { round });
        self.submit(player, round, amount, false);
    }

    fn on_questionnaire(&mut self, conn: ConnId, answers: QuestionnaireResponse) {
        let Some(player) = self.seat_of(conn) else {
            self.reject(conn, None, ErrorCode::NotJoined, "join a session first".into());
            return;
        };
        if self.phase != SessionPhase::Questionnaire {
            let msg = format!("questionnaire during {}", self.phase);
            self.reject(conn, Some(player), ErrorCode::OutOfPhaseMessage, msg);
            return;
        }
        if self.answered[player.0] {
            self.reject(conn, Some(player), ErrorCode::DuplicateQuestionnaire, "already answered".into());
            return;
        }
        if !answers.is_valid() {
            let msg = format!("generosity must be in 1..=5, got {}", answers.generosity);
            self.reject(conn, Some(player), ErrorCode::InvalidAnswers, msg);
            return;
        }
        self.answered[player.0] = true;
        self.record(SessionEvent::QuestionnaireSubmitted {
            player: player.0,
            answers,
        });
        self.close_if_questionnaire_done();
    }

    fn on_disconnect(&mut self, conn: ConnId) {
        let Some(player) = self.seat_of(conn) else {
            return;
        };
        let seat = &mut self.seats[player.0];
        seat.connected = false;
        self.record(SessionEvent::Disconnected { player: player.0 });
        match self.phase {
            SessionPhase::Lobby => {
                self.seats[player.0].occupant = Occupant::Human(None);
            }
            SessionPhase::Decision(round) => {
                self.seats[player.0].fallback_active = true;
                if self.pending[player.0].is_none() {
                    self.submit(player, round, Money::ZERO, true);
                }
            }
            SessionPhase::Reveal(_) => self.seats[player.0].fallback_active = true,
            SessionPhase::Questionnaire => self.close_if_questionnaire_done(),
            SessionPhase::Closed => {}
        }
    }

    fn on_timeout(&mut self, round: usize) {
        if self.phase != SessionPhase::Decision(round) {
            return;
        }
        for player in 0..self.seats.len() {
            if self.phase == SessionPhase::Decision(round) && self.pending[player].is_none() {
                self.submit(PlayerId(player), round, Money::ZERO, true);
            }
        }
    }

    fn on_bot_submit(&mut self, player: PlayerId, round: usize) {
        if self.phase != SessionPhase::Decision(round) || self.pending[player.0].is_some() {
            return;
        }
        let Occupant::Bot(strategy) = &self.seats[player.0].occupant else {
            return;
        };
        let amount = decide(strategy, &self.history, player).expect("validated config");
        self.submit(player, round, amount, false);
    }

    fn on_persona(&mut self, player: PlayerId, round: usize, action: PersonaAction) {
        if self.phase != SessionPhase::Decision(round) || self.pending[player.0].is_some() {
            return;
        }
        self.record(SessionEvent::PersonaEvent {
            player: player.0,
            action_id: action.0.clone(),
        });
        self.broadcast(ServerMsg::PersonaEvent {
            player_id: player.0,
            action_id: action.0,
        });
    }

    fn on_advance(&mut self, round: usize) {
        if self.phase != SessionPhase::Reveal(round) {
            return;
        }
        if round + 1 < self.history.config().num_rounds() {
            self.start_round(round + 1);
        } else {
            self.finish_game();
        }
    }

    fn start_round(&mut self, round: usize) {
        self.phase = SessionPhase::Decision(round);
        self.pending.iter_mut().for_each(|p| *p = None);
        self.record(SessionEvent::RoundStarted { round });
        self.broadcast(ServerMsg::RoundStart {
            round,
            round_of: self.history.config().num_rounds(),
        });
        for i in 0..self.seats.len() {
            if self.seats[i].is_bot() {
                self.schedule_bot_turn(round, PlayerId(i));
            }
        }
        if self.settings.decision_timeout_ms > 0 {
            self.timer(self.settings.decision_timeout_ms, Input::DecisionTimeout { round });
        }
        for i in 0..self.seats.len() {
            let seat = &self.seats[i];
            if !seat.is_bot() && seat.fallback_active && self.phase == SessionPhase::Decision(round) {
                self.submit(PlayerId(i), round, Money::ZERO, true);
            }
        }
    }

    /// Draw the bot's persona actions and submission delay from the session RNG.
    fn schedule_bot_turn(&mut self, round: usize, player: PlayerId) {
        let window = self.settings.bot_delay;
        let actions = if self.settings.persona_actions.is_empty() {
            Vec::new()
        } else {
            pick_idle_actions(
                &mut self.rng,
                &self.settings.persona_actions,
                self.settings.max_persona_actions,
                window,
            )
            .expect("action set is non-empty")
        };
        let mut submit_after = window.sample(&mut self.rng);
        for (action, delay) in actions {
            submit_after = submit_after.max(delay);
            self.timer(delay, Input::Persona { player, round, action });
        }
        self.timer(submit_after, Input::BotSubmit { player, round });
    }

    fn submit(&mut self, player: PlayerId, round: usize, amount: Money, timed_out: bool) {
        self.pending[player.0] = Some(Pending { amount });
        self.record(SessionEvent::ContributionSubmitted {
            player: player.0,
            round,
            amount_cents: amount.to_cents().expect("allowed amounts are cent-exact"),
            timed_out,
        });
        if self.pending.iter().all(Option::is_some) {
            self.reveal(round);
        }
    }

    fn reveal(&mut self, round: usize) {
        let contributions = self
            .pending
            .iter()
            .enumerate()
            .map(|(i, p)| (PlayerId(i), p.expect("all submitted").amount))
            .collect();
        let result = resolve_round(&contributions, self.history.config(), round)
            .expect("contributions were validated on submission");
        self.history
            .apply_round(result)
            .expect("rounds are resolved in order");
        let result = self.history.last_round().expect("just applied");
        let payload = RoundPayload::new(result, self.history.cumulative_scores());
        self.phase = SessionPhase::Reveal(round);
        self.record(SessionEvent::RoundRevealed(payload.clone()));
        self.broadcast(ServerMsg::RoundResult(payload));
        if self.settings.reveal_pause_ms == 0 {
            self.on_advance(round);
        } else {
            self.timer(self.settings.reveal_pause_ms, Input::AdvanceRound { round });
        }
    }

    fn finish_game(&mut self) {
        let scores = scores_to_milli(self.history.final_scores().expect("all rounds played"));
        self.record(SessionEvent::GameOver {
            final_scores_milli: scores.clone(),
        });
        self.broadcast(ServerMsg::GameOver {
            final_scores_milli: scores,
        });
        if self.settings.questionnaire {
            self.phase = SessionPhase::Questionnaire;
            self.close_if_questionnaire_done();
        } else {
            self.close();
        }
    }

    fn close_if_questionnaire_done(&mut self) {
        let waiting = self
            .seats
            .iter()
            .any(|s| !s.is_bot() && s.connected && !self.answered[s.player_id.0]);
        if !waiting {
            self.close();
        }
    }

    fn close(&mut self) {
        self.phase = SessionPhase::Closed;
        self.record(SessionEvent::SessionClosed { error: None });
    }
}
