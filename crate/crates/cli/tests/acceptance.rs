//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgg_cli::bot::{run_bot, BotOptions, BotReport};
use pgg_cli::server::{serve, ServeOptions, SessionSummary};
use pgg_core::analysis::{
    contribution_distribution, is_canonical_prefix, load_log_file, load_logs, phase_trace, questionnaire_responses,
    questionnaire_summary, replay_log, trial_records, SdKind,
};
use pgg_core::game::{best_response, resolve_slice, validate_config, GameConfig, RawConfig};
use pgg_core::money::Money;
use pgg_core::session::config::ServerConfig;
use pgg_core::session::harness::Harness;
use pgg_core::session::log::{to_ndjson, LogRecord, SessionEvent};
use pgg_core::session::wire::{
    scores_to_milli, ClientMsg, ErrorCode, PerceivedRole, QuestionnaireResponse, ServerMsg,
};
use pgg_core::session::{ConnId, SeatSpec, SessionPhase, SessionSettings};
use pgg_core::sim::{play_game, simulate, TournamentSpec};
use pgg_core::strategy::{DelayWindow, StrategyKind, StrategyState};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("nash and dominance", nash_and_dominance),
        ("conservation", conservation),
        ("strategy fixtures", strategy_fixtures),
        ("tournament fixtures", tournament_fixtures),
        ("protocol suite", protocol_suite),
        ("analysis fixtures", analysis_fixtures),
        ("replay determinism", replay_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} ({ms} ms)", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {reason} ({ms} ms)", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

fn cents(c: i64) -> Money {
    Money::from_cents(c)
}

/// Every profile over `{0, 50, 100}` cents for four players.
fn profiles_81() -> Vec<[i64; 4]> {
    let amounts = [0i64, 50, 100];
    let mut out = Vec::with_capacity(81);
    for a in amounts {
        for b in amounts {
            for c in amounts {
                for d in amounts {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

fn big(m: Money) -> BigRational {
    BigRational::new(BigInt::from(m.numer()), BigInt::from(m.denom()))
}

fn big_frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let config = GameConfig::default();
    // Work in units of 1 / (100 * 5 * 4) euro: e = 100 cents, r = 8/5, N = 4.
    let unit = BigInt::from(100 * 5 * 4);
    let same = |m: Money, scaled: BigInt| BigInt::from(m.numer()) * &unit == scaled * BigInt::from(m.denom());
    for p in profiles_81() {
        let r = resolve_slice(&p.map(cents), &config, 0).map_err(|e| e.to_string())?;
        let sum: i64 = p.iter().sum();
        ensure!(same(r.pool, BigInt::from(sum * 20)), "pool differs on {p:?}");
        ensure!(same(r.multiplied_pool, BigInt::from(sum * 8 * 4)), "multiplied pool differs on {p:?}");
        ensure!(same(r.share, BigInt::from(sum * 8)), "share differs on {p:?}");
        for (i, &c) in p.iter().enumerate() {
            let scaled = BigInt::from((100 - c) * 20 + 8 * sum);
            ensure!(same(r.payoffs[i], scaled), "payoff of player {i} differs on {p:?}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok("81 profiles match the big-integer evaluator exactly".into())
}

fn nash_and_dominance() -> Outcome {
    let start = Instant::now();
    let config = GameConfig::default();
    for p in profiles_81() {
        let profile = p.map(cents);
        let base = resolve_slice(&profile, &config, 0).map_err(|e| e.to_string())?;
        for i in 0..4 {
            let others: Vec<Money> = (0..4).filter(|&j| j != i).map(|j| profile[j]).collect();
            let br = best_response(&others, &config).map_err(|e| e.to_string())?;
            ensure!(br == Money::ZERO, "best response for player {i} on {p:?} is {}", br.render().text);
            let mut deviated = profile;
            deviated[i] = Money::ZERO;
            let dev = resolve_slice(&deviated, &config, 0).map_err(|e| e.to_string())?;
            ensure!(dev.payoffs[i] >= base.payoffs[i], "dropping to zero hurts player {i} on {p:?}");
        }
    }
    // r / N = 5 / 4 > 1: contributing returns more than it costs.
    let generous = validate_config(RawConfig {
        multiplier: Ratio::from_integer(5),
        ..RawConfig::default()
    })
    .map_err(|e| e.to_string())?;
    for p in profiles_81() {
        let others: Vec<Money> = p[1..].iter().map(|&c| cents(c)).collect();
        let br = best_response(&others, &generous).map_err(|e| e.to_string())?;
        ensure!(br == cents(100), "r/N > 1 best response is {} on {p:?}", br.render().text);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok("free riding dominant in 324 cases; r/N > 1 flips to full contribution".into())
}

fn conservation() -> Outcome {
    const DRAWS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut configs = BTreeSet::new();
    for _ in 0..DRAWS {
        let n = rng.random_range(3..=10usize);
        let e = rng.random_range(1..=1_000i64);
        let den = rng.random_range(1..=12i64);
        let num = rng.random_range(den + 1..=den * 6);
        let mut allowed = vec![0, e];
        for _ in 0..rng.random_range(0..4) {
            allowed.push(rng.random_range(0..=e));
        }
        allowed.sort();
        allowed.dedup();
        let config = validate_config(RawConfig {
            num_players: n,
            num_rounds: 1,
            endowment: cents(e),
            allowed_contributions: allowed.iter().map(|&c| cents(c)).collect(),
            multiplier: Ratio::new(num, den),
        })
        .map_err(|err| format!("random config rejected: {err}"))?;
        let profile: Vec<i64> = (0..n).map(|_| allowed[rng.random_range(0..allowed.len())]).collect();
        let r = resolve_slice(&profile.iter().map(|&c| cents(c)).collect::<Vec<_>>(), &config, 0)
            .map_err(|err| err.to_string())?;
        let total: BigRational = r.payoffs.iter().map(|&m| big(m)).sum();
        let pool = big_frac(profile.iter().sum(), 100);
        let expected = big_frac(n as i64 * e, 100) + (big_frac(num, den) - big_frac(1, 1)) * pool;
        ensure!(total == expected, "conservation broken for n={n} e={e} r={num}/{den} profile {profile:?}");
        configs.insert((n, e, num, den));
    }
    Ok(format!("{DRAWS} draws over {} distinct configs", configs.len()))
}

/// Brute-force reference for the three strategies, in integer cents.
fn reference_game(kinds: &[StrategyKind], rounds: usize, endowment: i64, allowed: &[i64]) -> Vec<Vec<i64>> {
    let n = kinds.len() as i64;
    let mut played: Vec<Vec<i64>> = Vec::new();
    for round in 0..rounds {
        let row = kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| match kind {
                StrategyKind::AlwaysCooperate => endowment,
                StrategyKind::AlwaysFreeRide => 0,
                StrategyKind::TitForTat if round == 0 => endowment,
                StrategyKind::TitForTat => {
                    let prev = &played[round - 1];
                    let others: i64 = prev.iter().sum::<i64>() - prev[i];
                    // minimize |(n-1) a - others|, larger a on ties
                    let mut best = allowed[0];
                    for &a in allowed {
                        if ((n - 1) * a - others).abs() <= ((n - 1) * best - others).abs() {
                            best = a;
                        }
                    }
                    best
                }
            })
            .collect();
        played.push(row);
    }
    played
}

fn played_cents(config: &GameConfig, kinds: &[StrategyKind]) -> Result<Vec<Vec<i64>>, String> {
    let states: Vec<StrategyState> = kinds.iter().map(|&k| StrategyState::new(k, 0)).collect();
    let history = play_game(config, &states).map_err(|e| e.to_string())?;
    Ok(history
        .rounds()
        .iter()
        .map(|r| r.contributions.iter().map(|m| m.to_cents().expect("whole cents")).collect())
        .collect())
}

fn strategy_fixtures() -> Outcome {
    use StrategyKind::*;
    let config = GameConfig::default();
    let kinds = [AlwaysCooperate, AlwaysFreeRide, TitForTat];
    let mut lineups = 0;
    for a in kinds {
        for b in kinds {
            for c in kinds {
                for d in kinds {
                    let lineup = [a, b, c, d];
                    let got = played_cents(&config, &lineup)?;
                    ensure!(got.len() == 10, "{lineup:?} played {} rounds", got.len());
                    for (round, row) in got.iter().enumerate() {
                        for (seat, kind) in lineup.iter().enumerate() {
                            match kind {
                                AlwaysCooperate => ensure!(row[seat] == 100, "AC played {} in round {round}", row[seat]),
                                AlwaysFreeRide => ensure!(row[seat] == 0, "AFR played {} in round {round}", row[seat]),
                                TitForTat => {}
                            }
                        }
                    }
                    let expected = reference_game(&lineup, 10, 100, &[0, 50, 100]);
                    ensure!(got == expected, "{lineup:?} diverges from the reference: {got:?}");
                    lineups += 1;
                }
            }
        }
    }

    let vs_ac = played_cents(&config, &[TitForTat, AlwaysCooperate, AlwaysCooperate, AlwaysCooperate])?;
    ensure!(vs_ac.iter().all(|row| row[0] == 100), "TFT against AC left full contribution");
    let vs_afr = played_cents(&config, &[TitForTat, AlwaysFreeRide, AlwaysFreeRide, AlwaysFreeRide])?;
    ensure!(vs_afr[0][0] == 100, "TFT did not open with the endowment");
    ensure!(vs_afr[1..].iter().all(|row| row[0] == 0), "TFT against AFR did not drop to 0");

    // Round 0: [100, 100, 100, 0]. Round 1: each TFT sees 200 from three
    // others, 2/3 euro, nearest allowed 0.50. From then on each sees
    // 50 + 50 + 0 = 1/3 euro, still nearest 0.50.
    let mixed = played_cents(&config, &[TitForTat, TitForTat, TitForTat, AlwaysFreeRide])?;
    ensure!(mixed[0] == [100, 100, 100, 0], "round 0 was {:?}", mixed[0]);
    for (round, row) in mixed.iter().enumerate().skip(1) {
        ensure!(*row == [50, 50, 50, 0], "round {round} was {row:?}");
    }
    Ok(format!("{lineups} lineups match the reference; 3 TFT + 1 AFR holds [0.50, 0.50, 0.50, 0] from round 1"))
}

fn tournament(players: &[&str], games: usize, seed: u64) -> Result<pgg_core::sim::TournamentOutcome, String> {
    simulate(&TournamentSpec {
        config: GameConfig::default(),
        seat_strategies: players.iter().map(|s| s.to_string()).collect(),
        games,
        seed,
    })
    .map_err(|e| e.to_string())
}

fn tournament_fixtures() -> Outcome {
    // 4 x AC: pool 4.00, share 1.60 per round, 16.00 over 10 rounds.
    let all_ac = tournament(&["ac", "ac", "ac", "ac"], 1, 0)?;
    let milli: Vec<i64> = all_ac.final_scores[0].iter().map(|m| m.to_milli().unwrap()).collect();
    ensure!(milli == [16_000; 4], "4 x AC scored {milli:?}");

    // 3 x AC + AFR: pool 3.00, share 1.20; AC keeps 0, AFR keeps 1.00.
    let one_afr = tournament(&["ac", "ac", "ac", "afr"], 1, 0)?;
    let milli: Vec<i64> = one_afr.final_scores[0].iter().map(|m| m.to_milli().unwrap()).collect();
    ensure!(milli == [12_000, 12_000, 12_000, 22_000], "3 x AC + AFR scored {milli:?}");

    let lineup = ["tft", "afr", "ac", "tft"];
    let start = Instant::now();
    let first = tournament(&lineup, 1_000, 2024)?;
    let elapsed = start.elapsed();
    ensure!(first.logs.len() == 1_000, "{} games", first.logs.len());
    ensure!(elapsed < Duration::from_secs(10), "1000 games took {elapsed:?}");
    let second = tournament(&lineup, 1_000, 2024)?;
    for (a, b) in first.logs.iter().zip(&second.logs) {
        ensure!(a.to_ndjson() == b.to_ndjson(), "game {} differs between runs", a.session_id);
    }
    ensure!(first.final_scores == second.final_scores, "final scores differ between runs");
    Ok(format!("16.000 / 12.000 / 22.000 exact; 1000 games in {elapsed:?}, identical on rerun"))
}

struct LiveRun {
    sessions: Vec<SessionSummary>,
    /// (session id, probe client, report)
    bots: Vec<(String, bool, BotReport)>,
    _dir: tempfile::TempDir,
}

const LIVE_CONFIG: &str = r#"
sessions = ["live-a", "live-b"]
decision_timeout_secs = 30
reveal_pause_ms = 60
questionnaire = true

[bot_delay_ms]
min = 5
max = 20

[[bots]]
seat = 3
strategy = "ac"
"#;

fn live_run() -> Result<&'static LiveRun, String> {
    static LIVE: OnceLock<Result<LiveRun, String>> = OnceLock::new();
    LIVE.get_or_init(|| {
        let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
        rt.block_on(run_live()).map_err(|e| format!("{e:#}"))
    })
    .as_ref()
    .map_err(Clone::clone)
}

async fn run_live() -> anyhow::Result<LiveRun> {
    let dir = tempfile::tempdir()?;
    let config = ServerConfig::from_toml_str(LIVE_CONFIG)?;
    let handle = serve(ServeOptions {
        config,
        listen: "127.0.0.1:0".into(),
        log_dir: dir.path().to_path_buf(),
        seed: 11,
    })
    .await?;
    let addr = handle.local_addr.to_string();
    let lineups = [
        ("live-a", [("ac", true), ("tft", false), ("afr", false)]),
        ("live-b", [("tft", false), ("afr", false), ("tft", false)]),
    ];
    let mut tasks = Vec::new();
    for (s, (session, seats)) in lineups.iter().enumerate() {
        for (i, &(token, probe)) in seats.iter().enumerate() {
            let seed = (s * 10 + i) as u64;
            let opts = BotOptions {
                connect: addr.clone(),
                session: session.to_string(),
                name: format!("client-{i}"),
                strategy: StrategyState::new(token.parse().expect("known token"), seed),
                seed,
                // the probe client always answers first, so its duplicate
                // lands while the round is still open
                think: if probe { DelayWindow::new(0, 0) } else { DelayWindow::new(30, 60) },
                answers: Some(QuestionnaireResponse {
                    age: Some(30),
                    gender: None,
                    seen_robot_before: false,
                    generosity: 4,
                    perceived_role: PerceivedRole::Friend,
                }),
                probe,
            };
            tasks.push((session.to_string(), probe, tokio::spawn(run_bot(opts))));
        }
    }
    let mut bots = Vec::new();
    for (session, probe, task) in tasks {
        bots.push((session, probe, task.await??));
    }
    let sessions = tokio::time::timeout(Duration::from_secs(60), handle.wait_sessions()).await??;
    Ok(LiveRun {
        sessions,
        bots,
        _dir: dir,
    })
}

/// Walk one client's messages: rounds in order, and nothing carrying a
/// round's contributions before that round's reveal.
fn check_transcript(msgs: &[ServerMsg], rounds: usize) -> Result<(), String> {
    ensure!(matches!(msgs.first(), Some(ServerMsg::Welcome { .. })), "first message is not welcome");
    let mut next = 0;
    let mut open: Option<usize> = None;
    let mut game_over = false;
    for msg in &msgs[1..] {
        match msg {
            ServerMsg::RoundStart { round, .. } => {
                ensure!(open.is_none() && *round == next, "round_start {round} out of order");
                open = Some(*round);
            }
            ServerMsg::RoundResult(p) => {
                ensure!(open == Some(p.round), "round_result {} outside its decision phase", p.round);
                open = None;
                next += 1;
            }
            ServerMsg::GameOver { .. } => {
                ensure!(next == rounds && open.is_none(), "game_over after {next} rounds");
                game_over = true;
            }
            other => {
                let text = serde_json::to_string(other).unwrap();
                ensure!(
                    !text.contains("contributions") && !text.contains("amount_cents"),
                    "message leaks contributions: {text}"
                );
            }
        }
    }
    ensure!(game_over, "no game_over");
    Ok(())
}

/// Every reveal follows exactly one contribution per seat for that round,
/// and publishes those same amounts.
fn check_log_order(records: &[LogRecord], players: usize) -> Result<(), String> {
    let mut pending: BTreeMap<usize, i64> = BTreeMap::new();
    for r in records {
        match &r.event {
            SessionEvent::ContributionSubmitted {
                player,
                amount_cents,
                ..
            } => {
                ensure!(pending.insert(*player, *amount_cents).is_none(), "player {player} logged twice in one round");
            }
            SessionEvent::RoundRevealed(p) => {
                ensure!(pending.len() == players, "round {} revealed after {} contributions", p.round, pending.len());
                let submitted: Vec<i64> = pending.values().copied().collect();
                ensure!(p.contributions_cents == submitted, "round {} reveal disagrees with submissions", p.round);
                pending.clear();
            }
            _ => {}
        }
    }
    ensure!(pending.is_empty(), "contributions logged after the last reveal");
    Ok(())
}

fn protocol_suite() -> Outcome {
    let live = live_run()?;
    let rounds = GameConfig::default().num_rounds();
    for (session, probe, bot) in &live.bots {
        check_transcript(&bot.received, rounds).map_err(|e| format!("{session}: {e}"))?;
        ensure!(bot.final_scores_milli.is_some(), "{session}: client saw no final scores");
        let codes: Vec<ErrorCode> = bot.errors.iter().map(|(c, _)| *c).collect();
        if *probe {
            ensure!(codes.contains(&ErrorCode::DuplicateContribution), "{session}: duplicate accepted, got {codes:?}");
            ensure!(codes.contains(&ErrorCode::OutOfPhaseMessage), "{session}: late submission accepted, got {codes:?}");
        } else {
            ensure!(codes.is_empty(), "{session}: unexpected errors {codes:?}");
        }
    }
    for s in &live.sessions {
        ensure!(s.phase == SessionPhase::Closed, "{} ended in {}", s.id, s.phase);
        ensure!(s.history.rounds().len() == rounds, "{} played {} rounds", s.id, s.history.rounds().len());
        let log = load_log_file(&s.log_path).map_err(|e| format!("{}: {e}", s.id))?;
        let contributions = log
            .records
            .iter()
            .filter(|r| matches!(r.event, SessionEvent::ContributionSubmitted { .. }))
            .count();
        let reveals = log
            .records
            .iter()
            .filter(|r| matches!(r.event, SessionEvent::RoundRevealed(_)))
            .count();
        ensure!(contributions == 40 && reveals == 10, "{}: {contributions} contributions, {reveals} reveals", s.id);
        check_log_order(&log.records, 4).map_err(|e| format!("{}: {e}", s.id))?;
        let trace = phase_trace(&log.records);
        ensure!(is_canonical_prefix(&trace, rounds), "{}: phase trace {trace:?}", s.id);
        ensure!(trace.last() == Some(&SessionPhase::Closed), "{}: trace does not end closed", s.id);
        let rejected = log
            .records
            .iter()
            .filter(|r| matches!(r.event, SessionEvent::Error { .. }))
            .count();
        let expected_rejections = if s.id == "live-a" { 2 } else { 0 };
        ensure!(rejected == expected_rejections, "{}: {rejected} logged rejections", s.id);
    }
    Ok(format!(
        "{} sessions over a local socket, 10 rounds each, 40 + 10 events, rejections coded",
        live.sessions.len()
    ))
}

fn scripted_human(amounts: Vec<i64>, answers: QuestionnaireResponse) -> impl FnMut(u64, &ServerMsg) -> Vec<(u64, ClientMsg)> {
    move |_, msg| match msg {
        ServerMsg::RoundStart { round, .. } => vec![(15, ClientMsg::Contribute {
            round: *round,
            amount_cents: amounts[*round],
        })],
        ServerMsg::GameOver { .. } => vec![(15, ClientMsg::Questionnaire { answers: answers.clone() })],
        _ => vec![],
    }
}

/// 19 participants in seven sessions, one or two always-cooperating bots each,
/// driven through the session machine and written out as log files.
fn write_fixture_logs(dir: &Path) -> Result<(), String> {
    let mut deck: Vec<i64> = [vec![0; 84], vec![50; 65], vec![100; 41]].concat();
    deck.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let generosity: Vec<u8> = [vec![5; 7], vec![4; 8], vec![3; 3], vec![2; 1]].concat();
    let roles: Vec<PerceivedRole> = [
        vec![PerceivedRole::Friend; 9],
        vec![PerceivedRole::Neighbor; 4],
        vec![PerceivedRole::Classmate; 4],
        vec![PerceivedRole::Stranger; 2],
    ]
    .concat();
    let humans_per_session = [3, 3, 3, 3, 3, 2, 2];
    let mut participant = 0;
    for (s, &humans) in humans_per_session.iter().enumerate() {
        let mut settings = SessionSettings::with_config(GameConfig::default());
        settings.reveal_pause_ms = 100;
        settings.bot_delay = DelayWindow::new(10, 50);
        for seat in humans..4 {
            settings.seats[seat] = SeatSpec::Bot {
                name: "Robot".into(),
                strategy: StrategyState::new(StrategyKind::AlwaysCooperate, 0),
            };
        }
        let id = format!("fixture-{s}");
        let mut h = Harness::open(&id, settings, s as u64).map_err(|e| e.to_string())?;
        for j in 0..humans {
            let amounts = deck[participant * 10..participant * 10 + 10].to_vec();
            let answers = QuestionnaireResponse {
                age: Some(20 + participant as u32),
                gender: None,
                seen_robot_before: participant.is_multiple_of(2),
                generosity: generosity[participant],
                perceived_role: roles[participant],
            };
            let join = ClientMsg::Join {
                session: id.clone(),
                name: format!("p{participant}"),
            };
            h.connect(ConnId(j as u64), Box::new(scripted_human(amounts, answers)), j as u64, join);
            participant += 1;
        }
        h.run_until_idle();
        ensure!(h.session().is_closed(), "{id} did not close");
        std::fs::write(dir.join(format!("{id}.ndjson")), to_ndjson(h.log())).map_err(|e| e.to_string())?;
    }
    ensure!(participant == 19, "{participant} participants");
    Ok(())
}

fn analysis_fixtures() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_fixture_logs(dir.path())?;
    let logs = load_logs(dir.path()).map_err(|e| e.to_string())?;
    ensure!(logs.len() == 7, "{} logs loaded", logs.len());
    let records: Vec<_> = logs.iter().flat_map(trial_records).collect();

    let humans = contribution_distribution(&records, &[0, 50, 100], false).map_err(|e| e.to_string())?;
    let counts: Vec<u64> = humans.buckets.iter().map(|b| b.count).collect();
    let tenths: Vec<u64> = humans.buckets.iter().map(|b| b.percent.tenths).collect();
    ensure!(counts == [84, 65, 41], "human counts {counts:?}");
    // 84/190 = 44.21, 65/190 = 34.21, 41/190 = 21.58
    ensure!(tenths == [442, 342, 216], "human shares {tenths:?}");

    // Bots add 5 * 10 + 2 * 20 = 90 trials at 1.00:
    // 84/280 = 30.00, 65/280 = 23.21, 131/280 = 46.79
    let all = contribution_distribution(&records, &[0, 50, 100], true).map_err(|e| e.to_string())?;
    let tenths: Vec<u64> = all.buckets.iter().map(|b| b.percent.tenths).collect();
    ensure!(all.total_trials == 280 && tenths == [300, 232, 468], "with bots {tenths:?} of {}", all.total_trials);

    let responses: Vec<_> = logs.iter().flat_map(questionnaire_responses).collect();
    let summary = questionnaire_summary(&responses).map_err(|e| e.to_string())?;
    ensure!(summary.n == 19, "{} responses", summary.n);
    let shares: Vec<(PerceivedRole, u64)> = summary.roles.iter().map(|r| (r.role, r.percent.tenths)).collect();
    // 9/19 = 47.37, 4/19 = 21.05, 2/19 = 10.53
    let expected = [
        (PerceivedRole::Friend, 474),
        (PerceivedRole::Neighbor, 211),
        (PerceivedRole::Classmate, 211),
        (PerceivedRole::Stranger, 105),
        (PerceivedRole::Teacher, 0),
        (PerceivedRole::Relative, 0),
    ];
    ensure!(shares == expected, "role shares {shares:?}");
    // Scores 7 x 5, 8 x 4, 3 x 3, 1 x 2: sum 78, mean 78/19 = 4.105.
    // Sum of squares 334; (334 - 78^2/19) / 18 = 0.76608, sd = 0.875.
    let mean = format!("{:.3}", summary.generosity_mean);
    let sd = format!("{:.3}", summary.generosity_sd);
    ensure!(summary.sd_kind == SdKind::Sample, "sd kind {:?}", summary.sd_kind);
    ensure!(mean == "4.105" && sd == "0.875", "generosity mean {mean}, sd {sd}");
    Ok("44.2 / 34.2 / 21.6; roles 47.4 / 21.1 / 21.1 / 10.5; generosity 4.105 +- 0.875".into())
}

fn replay_determinism() -> Outcome {
    let live = live_run()?;
    for s in &live.sessions {
        let log = load_log_file(&s.log_path).map_err(|e| format!("{}: {e}", s.id))?;
        let replay = replay_log(&log).map_err(|e| format!("{}: {e}", s.id))?;
        let live_scores = s.history.final_scores().map_err(|e| e.to_string())?;
        let replayed = replay.history.final_scores().map_err(|e| e.to_string())?;
        ensure!(replayed == live_scores, "{}: replayed scores differ", s.id);
        ensure!(replay.history.rounds() == s.history.rounds(), "{}: replayed rounds differ", s.id);
        let milli = scores_to_milli(live_scores);
        ensure!(
            replay.logged_final_scores_milli.as_deref() == Some(milli.as_slice()),
            "{}: logged game_over scores differ",
            s.id
        );
        for (session, _, bot) in live.bots.iter().filter(|(id, _, _)| *id == s.id) {
            ensure!(
                bot.final_scores_milli.as_deref() == Some(milli.as_slice()),
                "{session}: a client saw different final scores"
            );
        }
    }
    Ok(format!("{} live sessions replay to the live scores", live.sessions.len()))
}
