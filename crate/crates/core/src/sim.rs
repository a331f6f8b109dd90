//! Headless tournament simulator for bot-only groups.
//!
//! Games run in-process (no session server) and are independent: game `g`
//! draws its strategy seeds from ChaCha8 stream `g` of the tournament seed, so
//! serial and parallel execution give identical results.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::DistributionReport;
use crate::game::{resolve_slice, GameConfig, GameHistory, PlayerId};
use crate::money::Money;
use crate::session::log::{to_ndjson, LogRecord, SessionEvent};
use crate::session::wire::{check_representable, scores_to_milli, RoundPayload, SeatInfo, WireConfig, WireError};
use crate::strategy::{decide, StrategyError, StrategyKind, StrategyState};

#[derive(Clone, Debug, PartialEq)]
pub struct TournamentSpec {
    pub config: GameConfig,
    /// One strategy token per seat.
    pub seat_strategies: Vec<String>,
    pub games: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("{got} strategies given for {expected} seats")]
    SeatCount { expected: usize, got: usize },
    #[error("at least one game is required")]
    ZeroGames,
    #[error("configuration cannot be logged: {0}")]
    NotServable(#[from] WireError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameLog {
    pub session_id: String,
    pub records: Vec<LogRecord>,
}

impl GameLog {
    pub fn to_ndjson(&self) -> String {
        to_ndjson(&self.records)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StrategyMean {
    pub strategy: StrategyKind,
    pub seats: usize,
    #[serde(serialize_with = "serialize_money")]
    pub mean_final_score: Money,
}

fn serialize_money<S: serde::Serializer>(m: &Money, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&m.render().text)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TournamentOutcome {
    pub logs: Vec<GameLog>,
    /// Final scores per game, in seat order.
    pub final_scores: Vec<Vec<Money>>,
    pub distribution: DistributionReport,
    pub strategy_means: Vec<StrategyMean>,
}

/// Play one full game between the given strategies.
pub fn play_game(config: &GameConfig, strategies: &[StrategyState]) -> Result<GameHistory, SimError> {
    if strategies.len() != config.num_players() {
        return Err(SimError::SeatCount {
            expected: config.num_players(),
            got: strategies.len(),
        });
    }
    let mut history = GameHistory::new(config.clone());
    for round in 0..config.num_rounds() {
        let profile = strategies
            .iter()
            .enumerate()
            .map(|(i, s)| decide(s, &history, PlayerId(i)))
            .collect::<Result<Vec<_>, _>>()?;
        let result = resolve_slice(&profile, config, round).expect("strategies emit allowed amounts");
        history.apply_round(result).expect("rounds applied in order");
    }
    Ok(history)
}

fn game_log(session_id: &str, strategies: &[StrategyState], history: &GameHistory) -> GameLog {
    let config = history.config();
    let mut records = Vec::new();
    let mut push = |event| records.push(LogRecord::new(0, session_id, event));
    push(SessionEvent::SessionOpened {
        config: WireConfig::from_config(config).expect("checked representable"),
        seats: strategies
            .iter()
            .enumerate()
            .map(|(i, s)| SeatInfo {
                player_id: i,
                display_name: format!("{} {}", s.kind, i + 1),
                is_bot: true,
                strategy: Some(s.kind),
                connected: true,
            })
            .collect(),
    });
    for (i, s) in strategies.iter().enumerate() {
        push(SessionEvent::Joined {
            player: i,
            name: format!("{} {}", s.kind, i + 1),
            is_bot: true,
        });
    }
    let mut cumulative = vec![Money::ZERO; config.num_players()];
    for result in history.rounds() {
        push(SessionEvent::RoundStarted { round: result.round_index });
        for (player, amount) in result.contributions.iter().enumerate() {
            push(SessionEvent::ContributionSubmitted {
                player,
                round: result.round_index,
                amount_cents: amount.to_cents().expect("cent-exact"),
                timed_out: false,
            });
        }
        for (total, &p) in cumulative.iter_mut().zip(&result.payoffs) {
            *total += p;
        }
        push(SessionEvent::RoundRevealed(RoundPayload::new(result, &cumulative)));
    }
    push(SessionEvent::GameOver {
        final_scores_milli: scores_to_milli(history.cumulative_scores()),
    });
    push(SessionEvent::SessionClosed { error: None });
    GameLog {
        session_id: session_id.to_string(),
        records,
    }
}

/// Per-seat strategy states for game `game_index`.
pub fn seat_states(kinds: &[StrategyKind], seed: u64, game_index: u64) -> Vec<StrategyState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(game_index);
    kinds.iter().map(|&k| StrategyState::new(k, rng.next_u64())).collect()
}

pub fn simulate(spec: &TournamentSpec) -> Result<TournamentOutcome, SimError> {
    let config = &spec.config;
    if spec.games == 0 {
        return Err(SimError::ZeroGames);
    }
    if spec.seat_strategies.len() != config.num_players() {
        return Err(SimError::SeatCount {
            expected: config.num_players(),
            got: spec.seat_strategies.len(),
        });
    }
    check_representable(config)?;
    let kinds = spec
        .seat_strategies
        .iter()
        .map(|t| t.parse::<StrategyKind>())
        .collect::<Result<Vec<_>, _>>()?;

    let games = (0..spec.games as u64)
        .into_par_iter()
        .map(|g| {
            let states = seat_states(&kinds, spec.seed, g);
            let history = play_game(config, &states)?;
            let id = format!("sim-{}-{:06}", spec.seed, g);
            Ok((game_log(&id, &states, &history), history))
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let allowed = config.allowed_contributions();
    let mut counts = vec![0u64; allowed.len()];
    let mut totals: BTreeMap<StrategyKind, (Money, usize)> = BTreeMap::new();
    let mut logs = Vec::with_capacity(games.len());
    let mut final_scores = Vec::with_capacity(games.len());
    for (log, history) in games {
        for round in history.rounds() {
            for amount in &round.contributions {
                counts[allowed.binary_search(amount).expect("allowed")] += 1;
            }
        }
        let scores = history.final_scores().expect("complete").to_vec();
        for (kind, &score) in kinds.iter().zip(&scores) {
            let slot = totals.entry(*kind).or_insert((Money::ZERO, 0));
            slot.0 += score;
            slot.1 += 1;
        }
        logs.push(log);
        final_scores.push(scores);
    }
    let allowed_cents: Vec<i64> = allowed.iter().map(|m| m.to_cents().expect("cent-exact")).collect();
    let distribution = DistributionReport::from_counts(&allowed_cents, &counts, true)
        .expect("every game plays at least one round");
    let per_game_seats = |kind| kinds.iter().filter(|&&k| k == kind).count();
    let strategy_means = totals
        .into_iter()
        .map(|(strategy, (sum, n))| StrategyMean {
            strategy,
            seats: per_game_seats(strategy),
            mean_final_score: sum.div_int(n as i64),
        })
        .collect();
    Ok(TournamentOutcome {
        logs,
        final_scores,
        distribution,
        strategy_means,
    })
}

/// Write each game log as `<session_id>.ndjson` under `dir`.
pub fn write_logs(outcome: &TournamentOutcome, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for log in &outcome.logs {
        std::fs::write(dir.join(format!("{}.ndjson", log.session_id)), log.to_ndjson())?;
    }
    Ok(())
}
