//! Public goods game experiment platform: exact rules engine, bot strategies,
//! session state machine, event logs, analysis and tournament simulation.

pub mod analysis;
pub mod game;
pub mod money;
pub mod session;
pub mod sim;
pub mod strategy;

pub use game::{
    best_response, resolve_round, resolve_slice, validate_config, ConfigError, GameConfig, GameError,
    GameHistory, PlayerId, RawConfig, RoundResult,
};
pub use money::{parse_rational, Money, Rational};
pub use strategy::{decide, make_strategy, Aggregation, PersonaAction, StrategyKind, StrategyState};
