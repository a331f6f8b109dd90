//! Log ingestion, replay and summary statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use crate::game::{resolve_round, GameConfig, GameHistory, PlayerId};
use crate::money::{render_decimal, Money, Rational};
use crate::session::log::{LogRecord, SessionEvent, SCHEMA_VERSION};
use crate::session::SessionPhase;
use crate::session::wire::{check_representable, PerceivedRole, QuestionnaireResponse, RoundPayload, WireError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: schema version {found}, expected {SCHEMA_VERSION}")]
    SchemaVersionMismatch { line: usize, found: u64 },
    #[error("line {line}: first record must be session_opened")]
    MissingHeader { line: usize },
    #[error("line {line}: logged config is invalid: {source}")]
    BadConfig { line: usize, source: WireError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// A parsed session log.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedLog {
    /// `None` only for an empty log.
    pub config: Option<GameConfig>,
    pub records: Vec<LogRecord>,
}

impl LoadedLog {
    pub fn session_id(&self) -> Option<&str> {
        self.records.first().map(|r| r.session.as_str())
    }

    pub fn events(&self) -> impl Iterator<Item = &SessionEvent> {
        self.records.iter().map(|r| &r.event)
    }
}

/// Strictly parse a session log. Every line must be a complete,
/// newline-terminated record of the current schema version.
pub fn load_log<R: BufRead>(mut source: R) -> Result<LoadedLog, LoadError> {
    let mut records = Vec::new();
    let mut config = None;
    let mut buf = Vec::new();
    let mut line = 0;
    loop {
        buf.clear();
        let n = source.read_until(b'\n', &mut buf).map_err(|e| LoadError::Io {
            path: PathBuf::from("<stream>"),
            source: e,
        })?;
        if n == 0 {
            break;
        }
        line += 1;
        let malformed = |reason: String| LoadError::MalformedLine { line, reason };
        if buf.last() != Some(&b'\n') {
            return Err(malformed("truncated record (no terminating newline)".into()));
        }
        let text = std::str::from_utf8(&buf[..buf.len() - 1]).map_err(|e| malformed(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        match value.get("v").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(found) => return Err(LoadError::SchemaVersionMismatch { line, found }),
            None => return Err(malformed("missing schema version".into())),
        }
        let record: LogRecord = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        match (&record.event, records.is_empty()) {
            (SessionEvent::SessionOpened { config: wire, .. }, true) => {
                let parsed = wire
                    .to_config()
                    .map_err(|source| LoadError::BadConfig { line, source })?;
                config = Some(parsed);
            }
            (_, true) => return Err(LoadError::MissingHeader { line }),
            _ => {}
        }
        records.push(record);
    }
    Ok(LoadedLog { config, records })
}

pub fn load_log_file(path: &Path) -> Result<LoadedLog, LoadError> {
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_log(BufReader::new(file)).map_err(|e| match e {
        LoadError::Io { source, .. } => LoadError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Load one log file, or every `*.ndjson` / `*.jsonl` file in a directory (sorted by name).
pub fn load_logs(path: &Path) -> Result<Vec<LoadedLog>, LoadError> {
    if !path.is_dir() {
        return Ok(vec![load_log_file(path)?]);
    }
    let io_err = |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|x| x.to_str()), Some("ndjson" | "jsonl")))
        .collect();
    files.sort();
    files.iter().map(|p| load_log_file(p)).collect()
}

/// One player's decision in one round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub session_id: String,
    pub player_id: usize,
    pub is_bot: bool,
    pub round: usize,
    pub amount_cents: i64,
    pub timed_out: bool,
}

pub fn trial_records(log: &LoadedLog) -> Vec<TrialRecord> {
    let mut bots = BTreeSet::new();
    let mut out = Vec::new();
    for record in &log.records {
        match &record.event {
            SessionEvent::SessionOpened { seats, .. } => {
                bots.extend(seats.iter().filter(|s| s.is_bot).map(|s| s.player_id));
            }
            SessionEvent::ContributionSubmitted {
                player,
                round,
                amount_cents,
                timed_out,
            } => out.push(TrialRecord {
                session_id: record.session.clone(),
                player_id: *player,
                is_bot: bots.contains(player),
                round: *round,
                amount_cents: *amount_cents,
                timed_out: *timed_out,
            }),
            _ => {}
        }
    }
    out
}

pub fn questionnaire_responses(log: &LoadedLog) -> Vec<QuestionnaireResponse> {
    log.events()
        .filter_map(|e| match e {
            SessionEvent::QuestionnaireSubmitted { answers, .. } => Some(answers.clone()),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no trials to analyze")]
    NoTrials,
    #[error("no questionnaire responses")]
    NoResponses,
    #[error("{0} cents is not one of the allowed amounts")]
    UnknownAmount(i64),
    #[error("rounds are not contiguous: missing round {0}")]
    NonContiguousRounds(usize),
}

/// A percentage kept as integer tenths, rounded half up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Percent {
    pub tenths: u64,
}

impl Percent {
    /// `round(100 * count / total, 1)`, computed exactly.
    pub fn of(count: u64, total: u64) -> Self {
        assert!(total > 0);
        Percent {
            tenths: (2_000 * count + total) / (2 * total),
        }
    }

    pub fn value(self) -> f64 {
        self.tenths as f64 / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.tenths / 10, self.tenths % 10)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bucket {
    pub amount_cents: i64,
    pub count: u64,
    pub percent: Percent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistributionReport {
    pub buckets: Vec<Bucket>,
    pub total_trials: u64,
    pub include_bots: bool,
}

impl DistributionReport {
    /// Build from raw counts per allowed amount (ascending order of `allowed_cents`).
    pub fn from_counts(allowed_cents: &[i64], counts: &[u64], include_bots: bool) -> Result<Self, AnalysisError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(AnalysisError::NoTrials);
        }
        let buckets = allowed_cents
            .iter()
            .zip(counts)
            .map(|(&amount_cents, &count)| Bucket {
                amount_cents,
                count,
                percent: Percent::of(count, total),
            })
            .collect();
        Ok(DistributionReport {
            buckets,
            total_trials: total,
            include_bots,
        })
    }

    pub fn percent_sum(&self) -> Percent {
        Percent {
            tenths: self.buckets.iter().map(|b| b.percent.tenths).sum(),
        }
    }
}

pub fn contribution_distribution(
    records: &[TrialRecord],
    allowed_cents: &[i64],
    include_bots: bool,
) -> Result<DistributionReport, AnalysisError> {
    let mut counts = vec![0u64; allowed_cents.len()];
    for r in records.iter().filter(|r| include_bots || !r.is_bot) {
        let slot = allowed_cents
            .iter()
            .position(|&a| a == r.amount_cents)
            .ok_or(AnalysisError::UnknownAmount(r.amount_cents))?;
        counts[slot] += 1;
    }
    DistributionReport::from_counts(allowed_cents, &counts, include_bots)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundMean {
    pub round: usize,
    #[serde(skip)]
    pub mean_cents: Rational,
    pub mean_cents_text: String,
    pub trials: u64,
}

/// Mean contribution per round, in cents.
pub fn per_round_series(records: &[TrialRecord], include_bots: bool) -> Result<Vec<RoundMean>, AnalysisError> {
    let mut by_round: BTreeMap<usize, (i64, u64)> = BTreeMap::new();
    for r in records.iter().filter(|r| include_bots || !r.is_bot) {
        let slot = by_round.entry(r.round).or_default();
        slot.0 += r.amount_cents;
        slot.1 += 1;
    }
    if by_round.is_empty() {
        return Err(AnalysisError::NoTrials);
    }
    let first = *by_round.keys().next().expect("non-empty");
    for (expected, &round) in (first..).zip(by_round.keys()) {
        if round != expected {
            return Err(AnalysisError::NonContiguousRounds(expected));
        }
    }
    Ok(by_round
        .into_iter()
        .map(|(round, (sum, trials))| {
            let mean = Rational::new(sum, trials as i64);
            RoundMean {
                round,
                mean_cents: mean,
                mean_cents_text: render_decimal(mean, 2),
                trials,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdKind {
    /// n − 1 denominator.
    Sample,
    /// n = 1: no spread can be estimated; reported as 0.
    Undefined,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoleShare {
    pub role: PerceivedRole,
    pub count: u64,
    pub percent: Percent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuestionnaireSummary {
    pub n: u64,
    pub generosity_mean: f64,
    pub generosity_sd: f64,
    pub sd_kind: SdKind,
    pub roles: Vec<RoleShare>,
}

pub fn questionnaire_summary(responses: &[QuestionnaireResponse]) -> Result<QuestionnaireSummary, AnalysisError> {
    if responses.is_empty() {
        return Err(AnalysisError::NoResponses);
    }
    let n = responses.len() as i64;
    let sum: i64 = responses.iter().map(|r| i64::from(r.generosity)).sum();
    let sum_sq: i64 = responses.iter().map(|r| i64::from(r.generosity).pow(2)).sum();
    let mean = Rational::new(sum, n);
    let (sd, sd_kind) = if n > 1 {
        let variance = (Rational::from_integer(sum_sq) - Rational::new(sum * sum, n)) / (n - 1);
        (ratio_to_f64(variance).sqrt(), SdKind::Sample)
    } else {
        (0.0, SdKind::Undefined)
    };
    let roles = PerceivedRole::ALL
        .iter()
        .map(|&role| {
            let count = responses.iter().filter(|r| r.perceived_role == role).count() as u64;
            RoleShare {
                role,
                count,
                percent: Percent::of(count, n as u64),
            }
        })
        .collect();
    Ok(QuestionnaireSummary {
        n: n as u64,
        generosity_mean: ratio_to_f64(mean),
        generosity_sd: sd,
        sd_kind,
        roles,
    })
}

fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("log has no session header")]
    Empty,
    #[error(transparent)]
    NotServable(#[from] WireError),
    #[error("record {index}: {reason}")]
    Inconsistent { index: usize, reason: String },
}

/// Game state rebuilt from the contribution records of a log.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutcome {
    pub history: GameHistory,
    pub contributions: usize,
    pub reveals: usize,
    pub logged_final_scores_milli: Option<Vec<i64>>,
}

/// Re-resolve every round from its contribution records and check that the
/// logged reveals and final scores agree with the recomputation.
pub fn replay_log(log: &LoadedLog) -> Result<ReplayOutcome, ReplayError> {
    let config = log.config.clone().ok_or(ReplayError::Empty)?;
    check_representable(&config)?;
    let mut history = GameHistory::new(config.clone());
    let mut pending: BTreeMap<PlayerId, Money> = BTreeMap::new();
    let mut contributions = 0;
    let mut reveals = 0;
    let mut final_scores = None;
    for (index, record) in log.records.iter().enumerate() {
        let bad = |reason: String| ReplayError::Inconsistent { index, reason };
        match &record.event {
            SessionEvent::ContributionSubmitted {
                player,
                round,
                amount_cents,
                ..
            } => {
                if *round != history.rounds().len() {
                    return Err(bad(format!("contribution for round {round} while round {} is open", history.rounds().len())));
                }
                if pending.insert(PlayerId(*player), Money::from_cents(*amount_cents)).is_some() {
                    return Err(bad(format!("second contribution from player {player}")));
                }
                contributions += 1;
            }
            SessionEvent::RoundRevealed(payload) => {
                let result = resolve_round(&pending, &config, payload.round).map_err(|e| bad(e.to_string()))?;
                history.apply_round(result).map_err(|e| bad(e.to_string()))?;
                let recomputed = RoundPayload::new(history.last_round().expect("applied"), history.cumulative_scores());
                if &recomputed != payload {
                    return Err(bad(format!("reveal of round {} disagrees with its contributions", payload.round)));
                }
                pending.clear();
                reveals += 1;
            }
            SessionEvent::GameOver { final_scores_milli } => {
                let scores = history.final_scores().map_err(|e| bad(e.to_string()))?;
                if crate::session::wire::scores_to_milli(scores) != *final_scores_milli {
                    return Err(bad("final scores disagree with replayed rounds".into()));
                }
                final_scores = Some(final_scores_milli.clone());
            }
            _ => {}
        }
    }
    Ok(ReplayOutcome {
        history,
        contributions,
        reveals,
        logged_final_scores_milli: final_scores,
    })
}

/// Phases a logged session passed through, reconstructed from its records.
pub fn phase_trace(records: &[LogRecord]) -> Vec<SessionPhase> {
    let mut trace = Vec::new();
    let mut push = |phase| {
        if trace.last() != Some(&phase) {
            trace.push(phase);
        }
    };
    for record in records {
        match &record.event {
            SessionEvent::SessionOpened { .. } => push(SessionPhase::Lobby),
            SessionEvent::RoundStarted { round } => push(SessionPhase::Decision(*round)),
            SessionEvent::RoundRevealed(p) => push(SessionPhase::Reveal(p.round)),
            SessionEvent::QuestionnaireSubmitted { .. } => push(SessionPhase::Questionnaire),
            SessionEvent::SessionClosed { .. } => push(SessionPhase::Closed),
            _ => {}
        }
    }
    trace
}

/// True when `trace` is a prefix of `Lobby, Decision(0), Reveal(0), ...,
/// Reveal(K-1), [Questionnaire], Closed`.
pub fn is_canonical_prefix(trace: &[SessionPhase], num_rounds: usize) -> bool {
    let mut canonical = vec![SessionPhase::Lobby];
    for k in 0..num_rounds {
        canonical.push(SessionPhase::Decision(k));
        canonical.push(SessionPhase::Reveal(k));
    }
    let mut with_questionnaire = canonical.clone();
    with_questionnaire.extend([SessionPhase::Questionnaire, SessionPhase::Closed]);
    canonical.push(SessionPhase::Closed);
    with_questionnaire.starts_with(trace) || canonical.starts_with(trace)
}
