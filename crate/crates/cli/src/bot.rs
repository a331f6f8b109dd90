//! Headless network player.

use std::time::Duration;

use anyhow::{bail, Context};
use futures_util::{SinkExt, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokio_tungstenite::tungstenite::Message;

use pgg_core::game::{GameHistory, PlayerId};
use pgg_core::session::client::BotBrain;
use pgg_core::session::wire::{ClientMsg, ErrorCode, QuestionnaireResponse, ServerMsg};
use pgg_core::strategy::{DelayWindow, StrategyState};

#[derive(Clone, Debug)]
pub struct BotOptions {
    /// `host:port` of the session server.
    pub connect: String,
    pub session: String,
    pub name: String,
    pub strategy: StrategyState,
    pub seed: u64,
    /// Think time before each reply.
    pub think: DelayWindow,
    pub answers: Option<QuestionnaireResponse>,
    /// Also send a duplicate and an out-of-phase contribution in round 0 to
    /// exercise the server's rejections.
    pub probe: bool,
}

#[derive(Debug)]
pub struct BotReport {
    pub player: Option<PlayerId>,
    /// Every server message, in arrival order.
    pub received: Vec<ServerMsg>,
    pub final_scores_milli: Option<Vec<i64>>,
    pub errors: Vec<(ErrorCode, String)>,
    pub history: Option<GameHistory>,
}

fn frame(msg: &ClientMsg) -> Message {
    Message::Text(serde_json::to_string(msg).expect("client messages serialize").into())
}

/// Play one session to completion and return everything observed.
pub async fn run_bot(opts: BotOptions) -> anyhow::Result<BotReport> {
    let url = format!("ws://{}/", opts.connect);
    let (ws, _) = tokio_tungstenite::connect_async(&url)
        .await
        .with_context(|| format!("connecting to {url}"))?;
    let (mut sink, mut source) = ws.split();
    let mut brain = BotBrain::new(&opts.session, &opts.name, opts.strategy.clone());
    if let Some(answers) = opts.answers.clone() {
        brain = brain.with_answers(answers);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut received = Vec::new();
    let mut probed_duplicate = false;
    let mut probed_phase = false;
    let mut answered = false;
    sink.send(frame(&brain.join_message())).await?;

    while let Some(frame_result) = source.next().await {
        let text = match frame_result? {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let msg: ServerMsg = serde_json::from_str(text.as_str()).context("server sent malformed message")?;
        received.push(msg.clone());
        let replies = brain.on_message(&msg)?;
        for reply in replies {
            answered |= matches!(reply, ClientMsg::Questionnaire { .. });
            tokio::time::sleep(Duration::from_millis(opts.think.sample(&mut rng))).await;
            sink.send(frame(&reply)).await?;
            if let (true, false, ClientMsg::Contribute { round, .. }) = (opts.probe, probed_duplicate, &reply) {
                probed_duplicate = true;
                // same round again, right behind the original
                sink.send(frame(&ClientMsg::Contribute { round: *round, amount_cents: 0 })).await?;
            }
        }
        if let (true, false, ServerMsg::RoundResult(p)) = (opts.probe, probed_phase, &msg) {
            probed_phase = true;
            sink.send(frame(&ClientMsg::Contribute { round: p.round, amount_cents: 0 })).await?;
        }
        if brain.is_done() && !answered {
            // nothing left to do; leaving counts as skipping the questionnaire
            let _ = sink.close().await;
            break;
        }
    }
    if brain.player().is_none() {
        bail!("connection closed before the server seated this bot");
    }
    Ok(BotReport {
        player: brain.player(),
        final_scores_milli: brain.final_scores_milli().map(<[i64]>::to_vec),
        errors: brain.errors().to_vec(),
        history: brain.history().cloned(),
        received,
    })
}
