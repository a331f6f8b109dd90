//! JSON message schema shared by the server, clients and the event log.
//!
//! Contributions travel as integer cents, computed quantities as integer
//! milli-euros. Configurations whose shares are not whole milli-euros cannot be
//! served and are rejected by [`check_representable`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::game::{validate_config, ConfigError, GameConfig, RawConfig, RoundResult};
use crate::money::{parse_rational, Money};
use crate::strategy::StrategyKind;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("{what} = {value} is not a whole number of cents")]
    NotCentExact { what: &'static str, value: Money },
    #[error("a share of {share} (pool {pool}) is not a whole number of milli-euros")]
    NotMilliExact { pool: Money, share: Money },
    #[error("invalid multiplier {0:?}")]
    BadMultiplier(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Game configuration as it appears on the wire and in log headers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireConfig {
    pub num_players: usize,
    pub num_rounds: usize,
    pub endowment_cents: i64,
    pub allowed_cents: Vec<i64>,
    /// Exact rational, e.g. `"8/5"`.
    pub multiplier: String,
}

fn cents_of(what: &'static str, value: Money) -> Result<i64, WireError> {
    value.to_cents().ok_or(WireError::NotCentExact { what, value })
}

fn milli_of(value: Money) -> i64 {
    value
        .to_milli()
        .expect("served configs are checked to be milli-exact")
}

impl WireConfig {
    pub fn from_config(config: &GameConfig) -> Result<Self, WireError> {
        Ok(WireConfig {
            num_players: config.num_players(),
            num_rounds: config.num_rounds(),
            endowment_cents: cents_of("endowment", config.endowment())?,
            allowed_cents: config
                .allowed_contributions()
                .iter()
                .map(|&m| cents_of("allowed contribution", m))
                .collect::<Result<_, _>>()?,
            multiplier: config.multiplier().to_string(),
        })
    }

    pub fn to_config(&self) -> Result<GameConfig, WireError> {
        let multiplier = parse_rational(&self.multiplier)
            .map_err(|_| WireError::BadMultiplier(self.multiplier.clone()))?;
        Ok(validate_config(RawConfig {
            num_players: self.num_players,
            num_rounds: self.num_rounds,
            endowment: Money::from_cents(self.endowment_cents),
            allowed_contributions: self.allowed_cents.iter().map(|&c| Money::from_cents(c)).collect(),
            multiplier,
        })?)
    }
}

/// Verify that every reachable round of `config` serializes exactly.
pub fn check_representable(config: &GameConfig) -> Result<(), WireError> {
    let allowed: Vec<i64> = WireConfig::from_config(config)?.allowed_cents;
    let mut pools = BTreeSet::from([0i64]);
    for _ in 0..config.num_players() {
        pools = pools
            .iter()
            .flat_map(|p| allowed.iter().map(move |a| p + a))
            .collect();
    }
    for pool_cents in pools {
        let pool = Money::from_cents(pool_cents);
        let share = pool.scale(config.multiplier()).div_int(config.num_players() as i64);
        if share.to_milli().is_none() {
            return Err(WireError::NotMilliExact { pool, share });
        }
    }
    Ok(())
}

/// Reveal payload: everything displayed after a round closes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPayload {
    pub round: usize,
    pub contributions_cents: Vec<i64>,
    pub pool_milli: i64,
    pub multiplied_milli: i64,
    pub share_milli: i64,
    pub payoffs_milli: Vec<i64>,
    pub cumulative_milli: Vec<i64>,
}

impl RoundPayload {
    /// Build from a resolved round of a representable config.
    pub fn new(result: &RoundResult, cumulative: &[Money]) -> Self {
        RoundPayload {
            round: result.round_index,
            contributions_cents: result
                .contributions
                .iter()
                .map(|m| m.to_cents().expect("allowed amounts are cent-exact"))
                .collect(),
            pool_milli: milli_of(result.pool),
            multiplied_milli: milli_of(result.multiplied_pool),
            share_milli: milli_of(result.share),
            payoffs_milli: result.payoffs.iter().copied().map(milli_of).collect(),
            cumulative_milli: cumulative.iter().copied().map(milli_of).collect(),
        }
    }

    pub fn contributions(&self) -> Vec<Money> {
        self.contributions_cents.iter().map(|&c| Money::from_cents(c)).collect()
    }
}

pub fn scores_to_milli(scores: &[Money]) -> Vec<i64> {
    scores.iter().copied().map(milli_of).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatInfo {
    pub player_id: usize,
    pub display_name: String,
    pub is_bot: bool,
    /// Bot strategy; logged, but withheld from clients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyKind>,
    #[serde(default = "yes")]
    pub connected: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceivedRole {
    Friend,
    Neighbor,
    Classmate,
    Stranger,
    Teacher,
    Relative,
}

impl PerceivedRole {
    pub const ALL: [PerceivedRole; 6] = [
        PerceivedRole::Friend,
        PerceivedRole::Neighbor,
        PerceivedRole::Classmate,
        PerceivedRole::Stranger,
        PerceivedRole::Teacher,
        PerceivedRole::Relative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerceivedRole::Friend => "friend",
            PerceivedRole::Neighbor => "neighbor",
            PerceivedRole::Classmate => "classmate",
            PerceivedRole::Stranger => "stranger",
            PerceivedRole::Teacher => "teacher",
            PerceivedRole::Relative => "relative",
        }
    }
}

impl fmt::Display for PerceivedRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Post-game questionnaire answers from one human player.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    #[serde(default)]
    pub age: Option<u32>,
    #[serde(default)]
    pub gender: Option<String>,
    pub seen_robot_before: bool,
    /// 1 = not generous at all, 5 = very generous.
    pub generosity: u8,
    pub perceived_role: PerceivedRole,
}

impl QuestionnaireResponse {
    pub fn is_valid(&self) -> bool {
        (1..=5).contains(&self.generosity)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Join { session: String, name: String },
    Contribute { round: usize, amount_cents: i64 },
    Questionnaire { answers: QuestionnaireResponse },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    OutOfPhaseMessage,
    DuplicateContribution,
    IllegalAmount,
    UnknownSession,
    NotJoined,
    AlreadyJoined,
    SessionFull,
    DuplicateQuestionnaire,
    InvalidAnswers,
    MalformedMessage,
    SinkUnavailable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Welcome {
        session: String,
        player_id: usize,
        config: WireConfig,
        seats: Vec<SeatInfo>,
        questionnaire: bool,
    },
    RoundStart {
        round: usize,
        round_of: usize,
    },
    ContributionAck {
        round: usize,
    },
    RoundResult(RoundPayload),
    PersonaEvent {
        player_id: usize,
        action_id: String,
    },
    GameOver {
        final_scores_milli: Vec<i64>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMsg {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMsg::Error {
            code,
            message: message.into(),
        }
    }
}
