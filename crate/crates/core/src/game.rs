//! Public goods game rules.
//!
//! Each round every player splits a fixed endowment between a private account
//! and a common pool. The pool is scaled by the multiplier and shared equally,
//! so a player's payoff is `(endowment - contribution) + multiplier * pool / N`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;

use crate::money::{Money, Rational};

/// Seat index in `[0, num_players)`, stable for the whole session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlayerId(pub usize);

impl PlayerId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Unvalidated configuration, e.g. parsed from a config document or CLI flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RawConfig {
    pub num_players: usize,
    pub num_rounds: usize,
    pub endowment: Money,
    pub allowed_contributions: Vec<Money>,
    pub multiplier: Rational,
}

impl Default for RawConfig {
    /// Four players, ten rounds, 1 € endowment, {0, 0.50, 1} €, multiplier 1.6.
    fn default() -> Self {
        RawConfig {
            num_players: 4,
            num_rounds: 10,
            endowment: Money::from_cents(100),
            allowed_contributions: vec![
                Money::ZERO,
                Money::from_cents(50),
                Money::from_cents(100),
            ],
            multiplier: Ratio::new(8, 5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("multiplier {0} must be greater than 1")]
    MultiplierNotAboveOne(Rational),
    #[error("contribution {amount} is outside [0, {endowment}]")]
    ContributionOutOfRange { amount: Money, endowment: Money },
    #[error("allowed contributions must include 0 and the full endowment")]
    MissingZeroOrFullContribution,
    #[error("allowed contribution {0} is listed twice")]
    DuplicateContribution(Money),
    #[error("endowment must be positive")]
    NonPositiveEndowment,
    #[error("at least 3 players are required, got {0}")]
    TooFewPlayers(usize),
    #[error("at least one round is required")]
    ZeroRounds,
}

/// Validated, immutable game parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameConfig {
    num_players: usize,
    num_rounds: usize,
    endowment: Money,
    allowed: Vec<Money>,
    multiplier: Rational,
}

impl Default for GameConfig {
    fn default() -> Self {
        validate_config(RawConfig::default()).expect("default config is valid")
    }
}

impl GameConfig {
    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_rounds(&self) -> usize {
        self.num_rounds
    }

    pub fn endowment(&self) -> Money {
        self.endowment
    }

    /// Allowed amounts, ascending; always starts at 0 and ends at the endowment.
    pub fn allowed_contributions(&self) -> &[Money] {
        &self.allowed
    }

    pub fn multiplier(&self) -> Rational {
        self.multiplier
    }

    /// Marginal per-capita return `r / N` of one contributed unit.
    pub fn marginal_return(&self) -> Rational {
        self.multiplier / self.num_players as i64
    }

    pub fn is_allowed(&self, amount: Money) -> bool {
        self.allowed.binary_search(&amount).is_ok()
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        (0..self.num_players).map(PlayerId)
    }

    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            num_players: self.num_players,
            num_rounds: self.num_rounds,
            endowment: self.endowment,
            allowed_contributions: self.allowed.clone(),
            multiplier: self.multiplier,
        }
    }
}

pub fn validate_config(raw: RawConfig) -> Result<GameConfig, ConfigError> {
    if raw.num_players < 3 {
        return Err(ConfigError::TooFewPlayers(raw.num_players));
    }
    if raw.num_rounds == 0 {
        return Err(ConfigError::ZeroRounds);
    }
    if raw.multiplier <= Ratio::from_integer(1) {
        return Err(ConfigError::MultiplierNotAboveOne(raw.multiplier));
    }
    if raw.endowment <= Money::ZERO {
        return Err(ConfigError::NonPositiveEndowment);
    }
    let mut allowed = raw.allowed_contributions;
    allowed.sort();
    for pair in allowed.windows(2) {
        if pair[0] == pair[1] {
            return Err(ConfigError::DuplicateContribution(pair[0]));
        }
    }
    if let Some(&bad) = allowed.iter().find(|a| a.is_negative() || **a > raw.endowment) {
        return Err(ConfigError::ContributionOutOfRange {
            amount: bad,
            endowment: raw.endowment,
        });
    }
    if allowed.first() != Some(&Money::ZERO) || allowed.last() != Some(&raw.endowment) {
        return Err(ConfigError::MissingZeroOrFullContribution);
    }
    Ok(GameConfig {
        num_players: raw.num_players,
        num_rounds: raw.num_rounds,
        endowment: raw.endowment,
        allowed,
        multiplier: raw.multiplier,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("no contribution recorded for {0}")]
    MissingContribution(PlayerId),
    #[error("{player} contributed {amount}, which is not an allowed amount")]
    IllegalAmount { player: PlayerId, amount: Money },
    #[error("{0} is not seated in this game")]
    UnknownPlayer(PlayerId),
    #[error("expected {expected} co-player contributions, got {got}")]
    WrongPlayerCount { expected: usize, got: usize },
    #[error("round {got} cannot follow {expected} completed rounds")]
    RoundIndexMismatch { expected: usize, got: usize },
    #[error("all rounds have already been played")]
    GameAlreadyComplete,
    #[error("only {played} of {total} rounds have been played")]
    GameNotComplete { played: usize, total: usize },
}

/// Outcome of one resolved round. Vectors are indexed by [`PlayerId`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundResult {
    pub round_index: usize,
    pub contributions: Vec<Money>,
    pub pool: Money,
    pub multiplied_pool: Money,
    pub share: Money,
    pub payoffs: Vec<Money>,
}

impl RoundResult {
    pub fn contribution(&self, player: PlayerId) -> Money {
        self.contributions[player.0]
    }

    pub fn payoff(&self, player: PlayerId) -> Money {
        self.payoffs[player.0]
    }

    pub fn total_payoff(&self) -> Money {
        self.payoffs.iter().sum()
    }
}

/// Resolve one round from a complete, legal contribution profile.
pub fn resolve_round(
    contributions: &BTreeMap<PlayerId, Money>,
    config: &GameConfig,
    round_index: usize,
) -> Result<RoundResult, GameError> {
    if let Some((&player, _)) = contributions.range(PlayerId(config.num_players)..).next() {
        return Err(GameError::UnknownPlayer(player));
    }
    let mut profile = Vec::with_capacity(config.num_players);
    for player in config.players() {
        let amount = *contributions
            .get(&player)
            .ok_or(GameError::MissingContribution(player))?;
        if !config.is_allowed(amount) {
            return Err(GameError::IllegalAmount { player, amount });
        }
        profile.push(amount);
    }
    Ok(resolve_profile(profile, config, round_index))
}

/// Resolve a profile already known to be complete and legal.
pub(crate) fn resolve_profile(
    contributions: Vec<Money>,
    config: &GameConfig,
    round_index: usize,
) -> RoundResult {
    let pool: Money = contributions.iter().sum();
    let multiplied_pool = pool.scale(config.multiplier);
    let share = multiplied_pool.div_int(config.num_players as i64);
    let payoffs = contributions
        .iter()
        .map(|&c| (config.endowment - c) + share)
        .collect();
    RoundResult {
        round_index,
        contributions,
        pool,
        multiplied_pool,
        share,
        payoffs,
    }
}

/// Convenience wrapper over [`resolve_round`] for a profile given in seat order.
pub fn resolve_slice(
    contributions: &[Money],
    config: &GameConfig,
    round_index: usize,
) -> Result<RoundResult, GameError> {
    let map = contributions
        .iter()
        .enumerate()
        .map(|(i, &m)| (PlayerId(i), m))
        .collect();
    resolve_round(&map, config, round_index)
}

/// Rounds played so far plus running totals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameHistory {
    config: GameConfig,
    rounds: Vec<RoundResult>,
    cumulative: Vec<Money>,
}

impl GameHistory {
    pub fn new(config: GameConfig) -> Self {
        let cumulative = vec![Money::ZERO; config.num_players];
        GameHistory {
            config,
            rounds: Vec::new(),
            cumulative,
        }
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn rounds(&self) -> &[RoundResult] {
        &self.rounds
    }

    pub fn last_round(&self) -> Option<&RoundResult> {
        self.rounds.last()
    }

    pub fn cumulative_scores(&self) -> &[Money] {
        &self.cumulative
    }

    pub fn is_complete(&self) -> bool {
        self.rounds.len() == self.config.num_rounds
    }

    /// Append the next round. On error the history is left untouched.
    pub fn apply_round(&mut self, result: RoundResult) -> Result<(), GameError> {
        if self.is_complete() {
            return Err(GameError::GameAlreadyComplete);
        }
        if result.round_index != self.rounds.len() {
            return Err(GameError::RoundIndexMismatch {
                expected: self.rounds.len(),
                got: result.round_index,
            });
        }
        if result.payoffs.len() != self.config.num_players {
            return Err(GameError::WrongPlayerCount {
                expected: self.config.num_players,
                got: result.payoffs.len(),
            });
        }
        for (total, &payoff) in self.cumulative.iter_mut().zip(&result.payoffs) {
            *total += payoff;
        }
        self.rounds.push(result);
        Ok(())
    }

    /// Final per-player scores; only available once every round is played.
    pub fn final_scores(&self) -> Result<&[Money], GameError> {
        if !self.is_complete() {
            return Err(GameError::GameNotComplete {
                played: self.rounds.len(),
                total: self.config.num_rounds,
            });
        }
        Ok(&self.cumulative)
    }
}

/// Payoff of one player given their own contribution and the total of everyone else's.
pub fn single_round_payoff(own: Money, others_total: Money, config: &GameConfig) -> Money {
    let share = (own + others_total)
        .scale(config.multiplier)
        .div_int(config.num_players as i64);
    config.endowment - own + share
}

/// The allowed contribution maximizing the deciding player's round payoff.
/// Ties go to the smaller amount.
pub fn best_response(others: &[Money], config: &GameConfig) -> Result<Money, GameError> {
    if others.len() + 1 != config.num_players {
        return Err(GameError::WrongPlayerCount {
            expected: config.num_players - 1,
            got: others.len(),
        });
    }
    for (i, &amount) in others.iter().enumerate() {
        if !config.is_allowed(amount) {
            return Err(GameError::IllegalAmount {
                player: PlayerId(i),
                amount,
            });
        }
    }
    let others_total: Money = others.iter().sum();
    let mut best = config.allowed[0];
    let mut best_payoff = single_round_payoff(best, others_total, config);
    for &candidate in &config.allowed[1..] {
        let payoff = single_round_payoff(candidate, others_total, config);
        // strict: ascending order keeps the smaller amount on ties
        if payoff > best_payoff {
            best = candidate;
            best_payoff = payoff;
        }
    }
    Ok(best)
}
