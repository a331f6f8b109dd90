//! Bot decision policies and idle persona behavior.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::{GameHistory, PlayerId};
use crate::money::{Money, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "ac")]
    AlwaysCooperate,
    #[serde(rename = "afr")]
    AlwaysFreeRide,
    #[serde(rename = "tft")]
    TitForTat,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::AlwaysCooperate,
        StrategyKind::AlwaysFreeRide,
        StrategyKind::TitForTat,
    ];

    pub fn token(self) -> &'static str {
        match self {
            StrategyKind::AlwaysCooperate => "ac",
            StrategyKind::AlwaysFreeRide => "afr",
            StrategyKind::TitForTat => "tft",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ac" => Ok(StrategyKind::AlwaysCooperate),
            "afr" => Ok(StrategyKind::AlwaysFreeRide),
            "tft" => Ok(StrategyKind::TitForTat),
            _ => Err(StrategyError::UnknownStrategyToken(s.to_string())),
        }
    }
}

/// How tit-for-tat collapses the co-players' last contributions into one target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Arithmetic mean, snapped to the nearest allowed amount (ties upward).
    #[default]
    Mean,
    /// Copy the least generous co-player.
    Min,
    /// Copy the most generous co-player.
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("unknown strategy token {0:?} (expected ac, afr or tft)")]
    UnknownStrategyToken(String),
    #[error("the configuration has no allowed contributions")]
    EmptyAllowedSet,
    #[error("{0} is not seated in this game")]
    UnknownPlayer(PlayerId),
    #[error("persona action set is empty")]
    EmptyActionSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyState {
    pub kind: StrategyKind,
    /// Reserved for stochastic policies; the shipped kinds ignore it.
    pub rng_seed: u64,
    pub aggregation: Aggregation,
}

impl StrategyState {
    pub fn new(kind: StrategyKind, rng_seed: u64) -> Self {
        StrategyState {
            kind,
            rng_seed,
            aggregation: Aggregation::default(),
        }
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }
}

pub fn make_strategy(kind_token: &str, seed: u64) -> Result<StrategyState, StrategyError> {
    Ok(StrategyState::new(kind_token.parse()?, seed))
}

/// Contribution for `self_id` in the next round of `history`.
pub fn decide(
    state: &StrategyState,
    history: &GameHistory,
    self_id: PlayerId,
) -> Result<Money, StrategyError> {
    let config = history.config();
    if self_id.0 >= config.num_players() {
        return Err(StrategyError::UnknownPlayer(self_id));
    }
    let allowed = config.allowed_contributions();
    let (Some(&lowest), Some(&highest)) = (allowed.first(), allowed.last()) else {
        return Err(StrategyError::EmptyAllowedSet);
    };
    match state.kind {
        StrategyKind::AlwaysCooperate => Ok(highest),
        StrategyKind::AlwaysFreeRide => Ok(lowest),
        StrategyKind::TitForTat => {
            let Some(last) = history.last_round() else {
                return Ok(highest);
            };
            let others = last
                .contributions
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != self_id.0)
                .map(|(_, &m)| m);
            let target = match state.aggregation {
                Aggregation::Mean => {
                    let count = config.num_players() as i64 - 1;
                    others.sum::<Money>().div_int(count)
                }
                Aggregation::Min => others.min().unwrap_or(highest),
                Aggregation::Max => others.max().unwrap_or(highest),
            };
            snap_to_allowed(target, allowed).ok_or(StrategyError::EmptyAllowedSet)
        }
    }
}

/// Nearest allowed amount to `target`; exact midpoints resolve to the larger amount.
pub fn snap_to_allowed(target: Money, allowed: &[Money]) -> Option<Money> {
    let distance = |m: Money| -> Rational {
        let d = (m - target).ratio();
        if d < Rational::from_integer(0) {
            -d
        } else {
            d
        }
    };
    allowed
        .iter()
        .copied()
        .min_by(|&a, &b| distance(a).cmp(&distance(b)).then(b.cmp(&a)))
}

/// Symbolic idle behavior token shown while a bot "thinks".
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonaAction(pub String);

impl PersonaAction {
    pub fn new(id: impl Into<String>) -> Self {
        PersonaAction(id.into())
    }

    pub fn id(&self) -> &str {
        &self.0
    }

    pub fn default_set() -> Vec<PersonaAction> {
        ["think_aloud", "focused_face", "clear_throat", "look_at_player", "look_at_screen"]
            .into_iter()
            .map(PersonaAction::new)
            .collect()
    }
}

/// Inclusive millisecond window for randomized delays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayWindow {
    pub min_ms: u64,
    pub max_ms: u64,
}

impl DelayWindow {
    pub fn new(min_ms: u64, max_ms: u64) -> Self {
        assert!(min_ms <= max_ms, "empty delay window");
        DelayWindow { min_ms, max_ms }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random_range(self.min_ms..=self.max_ms)
    }
}

impl Default for DelayWindow {
    fn default() -> Self {
        DelayWindow::new(2_000, 8_000)
    }
}

/// Draw between 0 and `max_actions` persona actions, uniformly with replacement,
/// each paired with a delay from `window`.
pub fn pick_idle_actions<R: Rng + ?Sized>(
    rng: &mut R,
    action_set: &[PersonaAction],
    max_actions: usize,
    window: DelayWindow,
) -> Result<Vec<(PersonaAction, u64)>, StrategyError> {
    if action_set.is_empty() {
        return Err(StrategyError::EmptyActionSet);
    }
    let count = rng.random_range(0..=max_actions);
    let picks = (0..count)
        .map(|_| {
            let action = action_set.choose(rng).expect("non-empty").clone();
            (action, window.sample(rng))
        })
        .collect();
    Ok(picks)
}
