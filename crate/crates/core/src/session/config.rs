//! Server configuration document (TOML).
//!
//! ```toml
//! sessions = ["pilot-1"]
//! listen = "127.0.0.1:9000"
//! log_dir = "logs"
//! decision_timeout_secs = 0
//! reveal_pause_ms = 3000
//! questionnaire = true
//!
//! [game]
//! num_players = 4
//! num_rounds = 10
//! endowment_cents = 100
//! allowed_cents = [0, 50, 100]
//! multiplier = "1.6"
//!
//! [bot_delay_ms]
//! min = 2000
//! max = 8000
//!
//! [persona]
//! actions = ["think_aloud", "focused_face", "clear_throat"]
//! max_actions = 2
//!
//! [[bots]]
//! seat = 3
//! name = "Robot"
//! strategy = "ac"
//! ```
//!
//! Every key is optional; omitted keys take the defaults shown above.

use std::path::PathBuf;

use serde::Deserialize;

use crate::game::{validate_config, ConfigError, RawConfig};
use crate::money::{parse_rational, Money};
use crate::strategy::{Aggregation, DelayWindow, PersonaAction, StrategyKind, StrategyState};

use super::{SeatSpec, SessionSettings};

#[derive(Debug, thiserror::Error)]
pub enum ConfigDocError {
    #[error("malformed config document: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error(transparent)]
    Game(#[from] ConfigError),
    #[error("multiplier {0:?} is not an exact number")]
    BadMultiplier(String),
    #[error("bot seat {seat} is outside 0..{players}")]
    SeatOutOfRange { seat: usize, players: usize },
    #[error("seat {0} is declared as a bot twice")]
    DuplicateBotSeat(usize),
    #[error("{bots} bot seats exceed max_bot_seats = {max}")]
    TooManyBots { bots: usize, max: usize },
    #[error("unknown strategy token {0:?}")]
    UnknownStrategy(String),
    #[error("bot delay window min {min} > max {max}")]
    EmptyDelayWindow { min: u64, max: u64 },
    #[error("at least one session id is required")]
    NoSessions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default = "default_sessions")]
    sessions: Vec<String>,
    listen: Option<String>,
    log_dir: Option<PathBuf>,
    #[serde(default)]
    decision_timeout_secs: u64,
    #[serde(default = "default_reveal_pause")]
    reveal_pause_ms: u64,
    #[serde(default = "yes")]
    questionnaire: bool,
    #[serde(default = "one")]
    max_bot_seats: usize,
    #[serde(default)]
    game: GameSection,
    #[serde(default)]
    bot_delay_ms: DelaySection,
    #[serde(default)]
    persona: PersonaSection,
    bots: Option<Vec<BotSection>>,
}

fn default_sessions() -> Vec<String> {
    vec!["default".into()]
}

fn default_reveal_pause() -> u64 {
    3_000
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GameSection {
    num_players: usize,
    num_rounds: usize,
    endowment_cents: i64,
    allowed_cents: Vec<i64>,
    multiplier: String,
}

impl Default for GameSection {
    fn default() -> Self {
        GameSection {
            num_players: 4,
            num_rounds: 10,
            endowment_cents: 100,
            allowed_cents: vec![0, 50, 100],
            multiplier: "8/5".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DelaySection {
    min: u64,
    max: u64,
}

impl Default for DelaySection {
    fn default() -> Self {
        let w = DelayWindow::default();
        DelaySection { min: w.min_ms, max: w.max_ms }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PersonaSection {
    actions: Vec<String>,
    max_actions: usize,
}

impl Default for PersonaSection {
    fn default() -> Self {
        PersonaSection {
            actions: PersonaAction::default_set().into_iter().map(|a| a.0).collect(),
            max_actions: 2,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BotSection {
    seat: usize,
    strategy: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    aggregation: Aggregation,
}

/// Parsed server configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerConfig {
    pub sessions: Vec<String>,
    pub listen: Option<String>,
    pub log_dir: Option<PathBuf>,
    pub settings: SessionSettings,
}

impl ServerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigDocError> {
        let doc: Document = toml::from_str(text)?;
        let multiplier = parse_rational(&doc.game.multiplier)
            .map_err(|_| ConfigDocError::BadMultiplier(doc.game.multiplier.clone()))?;
        let config = validate_config(RawConfig {
            num_players: doc.game.num_players,
            num_rounds: doc.game.num_rounds,
            endowment: Money::from_cents(doc.game.endowment_cents),
            allowed_contributions: doc.game.allowed_cents.iter().map(|&c| Money::from_cents(c)).collect(),
            multiplier,
        })?;
        let players = config.num_players();

        let bots = doc.bots.unwrap_or_else(|| {
            vec![BotSection {
                seat: players - 1,
                strategy: "ac".into(),
                name: None,
                aggregation: Aggregation::default(),
            }]
        });
        if bots.len() > doc.max_bot_seats {
            return Err(ConfigDocError::TooManyBots {
                bots: bots.len(),
                max: doc.max_bot_seats,
            });
        }
        let mut seats = vec![SeatSpec::Human; players];
        for bot in bots {
            if bot.seat >= players {
                return Err(ConfigDocError::SeatOutOfRange { seat: bot.seat, players });
            }
            if matches!(seats[bot.seat], SeatSpec::Bot { .. }) {
                return Err(ConfigDocError::DuplicateBotSeat(bot.seat));
            }
            let kind: StrategyKind = bot
                .strategy
                .parse()
                .map_err(|_| ConfigDocError::UnknownStrategy(bot.strategy.clone()))?;
            seats[bot.seat] = SeatSpec::Bot {
                name: bot.name.unwrap_or_else(|| "Robot".into()),
                strategy: StrategyState::new(kind, 0).with_aggregation(bot.aggregation),
            };
        }
        if doc.bot_delay_ms.min > doc.bot_delay_ms.max {
            return Err(ConfigDocError::EmptyDelayWindow {
                min: doc.bot_delay_ms.min,
                max: doc.bot_delay_ms.max,
            });
        }
        if doc.sessions.is_empty() {
            return Err(ConfigDocError::NoSessions);
        }
        Ok(ServerConfig {
            sessions: doc.sessions,
            listen: doc.listen,
            log_dir: doc.log_dir,
            settings: SessionSettings {
                config,
                seats,
                decision_timeout_ms: doc.decision_timeout_secs * 1_000,
                reveal_pause_ms: doc.reveal_pause_ms,
                bot_delay: DelayWindow::new(doc.bot_delay_ms.min, doc.bot_delay_ms.max),
                persona_actions: doc.persona.actions.into_iter().map(PersonaAction).collect(),
                max_persona_actions: doc.persona.max_actions,
                questionnaire: doc.questionnaire,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameConfig;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ServerConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.sessions, vec!["default"]);
        assert_eq!(cfg.settings.config, GameConfig::default());
        assert_eq!(cfg.settings.decision_timeout_ms, 0);
        assert_eq!(cfg.settings.bot_delay, DelayWindow::new(2_000, 8_000));
        assert!(cfg.settings.questionnaire);
        let bots: Vec<_> = cfg
            .settings
            .seats
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, SeatSpec::Bot { .. }))
            .collect();
        assert_eq!(bots.len(), 1);
        assert_eq!(bots[0].0, 3);
    }

    #[test]
    fn full_document() {
        let text = r#"
            sessions = ["a", "b"]
            listen = "127.0.0.1:0"
            decision_timeout_secs = 30
            max_bot_seats = 2
            [game]
            multiplier = "1.6"
            [bot_delay_ms]
            min = 10
            max = 20
            [persona]
            actions = ["think_aloud"]
            max_actions = 1
            [[bots]]
            seat = 0
            strategy = "TFT"
            aggregation = "min"
            [[bots]]
            seat = 1
            strategy = "afr"
            name = "R2"
        "#;
        let cfg = ServerConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.sessions, vec!["a", "b"]);
        assert_eq!(cfg.settings.decision_timeout_ms, 30_000);
        match &cfg.settings.seats[0] {
            SeatSpec::Bot { strategy, .. } => {
                assert_eq!(strategy.kind, StrategyKind::TitForTat);
                assert_eq!(strategy.aggregation, Aggregation::Min);
            }
            other => panic!("expected bot, got {other:?}"),
        }
        assert!(matches!(&cfg.settings.seats[1], SeatSpec::Bot { name, .. } if name == "R2"));
        assert_eq!(cfg.settings.seats[3], SeatSpec::Human);
    }

    #[test]
    fn rejections() {
        let err = |t: &str| ServerConfig::from_toml_str(t).unwrap_err();
        assert!(matches!(err("[game]\nmultiplier = \"1\""), ConfigDocError::Game(_)));
        assert!(matches!(err("[game]\nmultiplier = \"x\""), ConfigDocError::BadMultiplier(_)));
        assert!(matches!(err("[[bots]]\nseat = 9\nstrategy = \"ac\""), ConfigDocError::SeatOutOfRange { .. }));
        assert!(matches!(err("[[bots]]\nseat = 1\nstrategy = \"zz\""), ConfigDocError::UnknownStrategy(_)));
        assert!(matches!(
            err("[[bots]]\nseat = 1\nstrategy = \"ac\"\n[[bots]]\nseat = 2\nstrategy = \"ac\""),
            ConfigDocError::TooManyBots { .. }
        ));
        assert!(matches!(err("[bot_delay_ms]\nmin = 5\nmax = 1"), ConfigDocError::EmptyDelayWindow { .. }));
        assert!(matches!(err("bogus = 1"), ConfigDocError::Syntax(_)));
        assert!(matches!(err("sessions = []"), ConfigDocError::NoSessions));
    }
}
