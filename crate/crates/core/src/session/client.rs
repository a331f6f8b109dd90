//! Client-side game tracking for headless players.
//!
//! [`BotBrain`] follows the server's messages, rebuilds the game history from
//! the reveals (checking each payload against its own resolution), and answers
//! every round start with its strategy's contribution.

use crate::game::{resolve_slice, GameHistory, PlayerId};
use crate::strategy::{decide, StrategyState};

use super::wire::{ClientMsg, ErrorCode, QuestionnaireResponse, RoundPayload, ServerMsg, WireError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BrainError {
    #[error("{0} received before welcome")]
    NotWelcomed(&'static str),
    #[error("server config unusable: {0}")]
    Config(#[from] WireError),
    #[error("round {got} announced but {expected} rounds are known")]
    RoundDesync { expected: usize, got: usize },
    #[error("reveal for round {0} disagrees with local resolution")]
    PayloadMismatch(usize),
    #[error("reveal for round {0} is not a legal round")]
    IllegalReveal(usize),
}

#[derive(Clone, Debug)]
pub struct BotBrain {
    session: String,
    name: String,
    strategy: StrategyState,
    answers: Option<QuestionnaireResponse>,
    player: Option<PlayerId>,
    history: Option<GameHistory>,
    questionnaire: bool,
    final_scores_milli: Option<Vec<i64>>,
    errors: Vec<(ErrorCode, String)>,
}

impl BotBrain {
    pub fn new(session: impl Into<String>, name: impl Into<String>, strategy: StrategyState) -> Self {
        BotBrain {
            session: session.into(),
            name: name.into(),
            strategy,
            answers: None,
            player: None,
            history: None,
            questionnaire: false,
            final_scores_milli: None,
            errors: Vec::new(),
        }
    }

    /// Answers to submit if the session runs a questionnaire.
    pub fn with_answers(mut self, answers: QuestionnaireResponse) -> Self {
        self.answers = Some(answers);
        self
    }

    pub fn join_message(&self) -> ClientMsg {
        ClientMsg::Join {
            session: self.session.clone(),
            name: self.name.clone(),
        }
    }

    pub fn player(&self) -> Option<PlayerId> {
        self.player
    }

    pub fn history(&self) -> Option<&GameHistory> {
        self.history.as_ref()
    }

    pub fn final_scores_milli(&self) -> Option<&[i64]> {
        self.final_scores_milli.as_deref()
    }

    pub fn errors(&self) -> &[(ErrorCode, String)] {
        &self.errors
    }

    /// True once nothing more is expected from the server.
    pub fn is_done(&self) -> bool {
        self.final_scores_milli.is_some()
    }

    /// Track `msg` and return the replies it calls for.
    pub fn on_message(&mut self, msg: &ServerMsg) -> Result<Vec<ClientMsg>, BrainError> {
        match msg {
            ServerMsg::Welcome { player_id, config, questionnaire, .. } => {
                self.player = Some(PlayerId(*player_id));
                self.history = Some(GameHistory::new(config.to_config()?));
                self.questionnaire = *questionnaire;
                Ok(vec![])
            }
            ServerMsg::RoundStart { round, .. } => {
                let (Some(history), Some(player)) = (&self.history, self.player) else {
                    return Err(BrainError::NotWelcomed("round_start"));
                };
                if history.rounds().len() != *round {
                    return Err(BrainError::RoundDesync {
                        expected: history.rounds().len(),
                        got: *round,
                    });
                }
                let amount = decide(&self.strategy, history, player).expect("validated config");
                Ok(vec![ClientMsg::Contribute {
                    round: *round,
                    amount_cents: amount.to_cents().expect("wire configs are cent-exact"),
                }])
            }
            ServerMsg::RoundResult(payload) => {
                self.absorb_reveal(payload)?;
                Ok(vec![])
            }
            ServerMsg::GameOver { final_scores_milli } => {
                self.final_scores_milli = Some(final_scores_milli.clone());
                match (&self.answers, self.questionnaire) {
                    (Some(answers), true) => Ok(vec![ClientMsg::Questionnaire {
                        answers: answers.clone(),
                    }]),
                    _ => Ok(vec![]),
                }
            }
            ServerMsg::Error { code, message } => {
                self.errors.push((*code, message.clone()));
                Ok(vec![])
            }
            ServerMsg::ContributionAck { .. } | ServerMsg::PersonaEvent { .. } => Ok(vec![]),
        }
    }

    fn absorb_reveal(&mut self, payload: &RoundPayload) -> Result<(), BrainError> {
        let history = self
            .history
            .as_mut()
            .ok_or(BrainError::NotWelcomed("round_result"))?;
        let result = resolve_slice(&payload.contributions(), history.config(), payload.round)
            .map_err(|_| BrainError::IllegalReveal(payload.round))?;
        history
            .apply_round(result)
            .map_err(|_| BrainError::IllegalReveal(payload.round))?;
        let local = RoundPayload::new(history.last_round().expect("applied"), history.cumulative_scores());
        if &local != payload {
            return Err(BrainError::PayloadMismatch(payload.round));
        }
        Ok(())
    }
}
