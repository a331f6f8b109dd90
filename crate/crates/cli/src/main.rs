use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use pgg_cli::bot::{run_bot, BotOptions};
use pgg_cli::report::{self, SimulationSummary};
use pgg_cli::server::{serve, ServeOptions};
use pgg_core::analysis::{
    contribution_distribution, load_logs, per_round_series, questionnaire_responses, questionnaire_summary,
    trial_records,
};
use pgg_core::session::config::ServerConfig;
use pgg_core::sim::{simulate, write_logs, TournamentSpec};
use pgg_core::strategy::{DelayWindow, StrategyKind, StrategyState};
use pgg_core::{parse_rational, validate_config, RawConfig};

#[derive(Parser)]
#[command(name = "pgg", version, about = "Public goods game sessions, simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the session server until every configured session has closed.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `listen` in the config file.
        #[arg(long)]
        listen: Option<String>,
        /// Overrides `log_dir` in the config file.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Play seeded bot-only games and write their logs.
    Simulate {
        /// One strategy token per seat.
        #[arg(long, value_delimiter = ',', required = true)]
        players: Vec<String>,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[arg(long, default_value = "8/5")]
        multiplier: String,
        #[arg(long, default_value_t = 100)]
        endowment_cents: i64,
        #[arg(long, value_delimiter = ',', default_value = "0,50,100")]
        allowed_cents: Vec<i64>,
        #[arg(long, default_value_t = 1)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the report as JSON (`-` for stdout).
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Summarize one log file or a directory of logs.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        report: ReportKind,
        #[arg(long)]
        include_bots: bool,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Join a running session as a headless player.
    Bot {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        session: String,
        #[arg(long, default_value = "ac")]
        strategy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bot")]
        name: String,
        #[arg(long, default_value_t = 200)]
        think_min_ms: u64,
        #[arg(long, default_value_t = 1000)]
        think_max_ms: u64,
        /// Send a duplicate and a late contribution to check the server rejects them.
        #[arg(long)]
        probe: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Dist,
    Rounds,
    Questionnaire,
}

fn parse_kind(token: &str) -> anyhow::Result<StrategyKind> {
    token
        .parse()
        .map_err(|_| anyhow::anyhow!("unknown strategy {token:?} (expected ac, afr or tft)"))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve {
            config,
            listen,
            log_dir,
            seed,
        } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let config = ServerConfig::from_toml_str(&text).with_context(|| format!("in {}", config.display()))?;
            let listen = listen
                .or_else(|| config.listen.clone())
                .unwrap_or_else(|| "127.0.0.1:9001".into());
            let log_dir = log_dir.or_else(|| config.log_dir.clone()).unwrap_or_else(|| "logs".into());
            let handle = serve(ServeOptions {
                config,
                listen,
                log_dir,
                seed,
            })
            .await?;
            tokio::select! {
                done = handle.wait_sessions() => {
                    for s in done? {
                        tracing::info!(session = %s.id, phase = %s.phase, log = %s.log_path.display(), "session finished");
                    }
                }
                _ = tokio::signal::ctrl_c() => tracing::warn!("interrupted"),
            }
        }
        Command::Simulate {
            players,
            rounds,
            multiplier,
            endowment_cents,
            allowed_cents,
            games,
            seed,
            out,
            json_out,
        } => {
            let multiplier = parse_rational(&multiplier).map_err(|e| anyhow::anyhow!("--multiplier: {e}"))?;
            let config = validate_config(RawConfig {
                num_players: players.len(),
                num_rounds: rounds,
                endowment: pgg_core::Money::from_cents(endowment_cents),
                allowed_contributions: allowed_cents.iter().map(|&c| pgg_core::Money::from_cents(c)).collect(),
                multiplier,
            })?;
            for p in &players {
                parse_kind(p)?;
            }
            let outcome = simulate(&TournamentSpec {
                config,
                seat_strategies: players,
                games,
                seed,
            })?;
            if let Some(dir) = out {
                write_logs(&outcome, &dir).with_context(|| format!("writing logs to {}", dir.display()))?;
            }
            let summary = SimulationSummary::new(&outcome);
            print!("{}", report::simulation_text(&summary));
            if let Some(path) = json_out {
                report::write_json(&summary, &path)?;
            }
        }
        Command::Analyze {
            log,
            report: kind,
            include_bots,
            json_out,
        } => {
            let logs = load_logs(&log)?;
            if logs.is_empty() {
                bail!("no logs found at {}", log.display());
            }
            match kind {
                ReportKind::Dist => {
                    let allowed = allowed_cents(&logs)?;
                    let records: Vec<_> = logs.iter().flat_map(trial_records).collect();
                    let dist = contribution_distribution(&records, &allowed, include_bots)?;
                    print!("{}", report::distribution_text(&dist));
                    if let Some(path) = json_out {
                        report::write_json(&dist, &path)?;
                    }
                }
                ReportKind::Rounds => {
                    let records: Vec<_> = logs.iter().flat_map(trial_records).collect();
                    let series = per_round_series(&records, include_bots)?;
                    print!("{}", report::rounds_text(&series));
                    if let Some(path) = json_out {
                        report::write_json(&series, &path)?;
                    }
                }
                ReportKind::Questionnaire => {
                    let responses: Vec<_> = logs.iter().flat_map(questionnaire_responses).collect();
                    let summary = questionnaire_summary(&responses)?;
                    print!("{}", report::questionnaire_text(&summary));
                    if let Some(path) = json_out {
                        report::write_json(&summary, &path)?;
                    }
                }
            }
        }
        Command::Bot {
            connect,
            session,
            strategy,
            seed,
            name,
            think_min_ms,
            think_max_ms,
            probe,
        } => {
            if think_min_ms > think_max_ms {
                bail!("--think-min-ms exceeds --think-max-ms");
            }
            let bot = run_bot(BotOptions {
                connect,
                session,
                name,
                strategy: StrategyState::new(parse_kind(&strategy)?, seed),
                seed,
                think: DelayWindow::new(think_min_ms, think_max_ms),
                answers: None,
                probe,
            })
            .await?;
            for (code, message) in &bot.errors {
                tracing::warn!(code = ?code, "{message}");
            }
            match bot.final_scores_milli {
                Some(scores) => {
                    let text: Vec<String> = scores
                        .iter()
                        .map(|&m| pgg_core::Money::from_milli(m).render().text)
                        .collect();
                    println!("final scores: {}", text.join(" "));
                }
                None => bail!("session ended before game over"),
            }
        }
    }
    Ok(())
}

fn allowed_cents(logs: &[pgg_core::analysis::LoadedLog]) -> anyhow::Result<Vec<i64>> {
    let mut allowed: Option<Vec<i64>> = None;
    for log in logs {
        let Some(config) = &log.config else {
            bail!("log has no session header");
        };
        let cents: Vec<i64> = config
            .allowed_contributions()
            .iter()
            .map(|m| m.to_cents().context("allowed amount is not whole cents"))
            .collect::<anyhow::Result<_>>()?;
        match &allowed {
            None => allowed = Some(cents),
            Some(a) if *a != cents => bail!("logs use different contribution sets"),
            Some(_) => {}
        }
    }
    allowed.context("no logs")
}
