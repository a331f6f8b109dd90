//! Plain-text and JSON rendering of analysis and simulation results.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use pgg_core::analysis::{DistributionReport, QuestionnaireSummary, RoundMean, SdKind};
use pgg_core::money::{render_decimal, Money};
use pgg_core::sim::{StrategyMean, TournamentOutcome};
use pgg_core::Rational;

fn cents(c: i64) -> String {
    Money::from_cents(c).render().text
}

/// Right-align every column except the first.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{cell:<w$}");
            } else {
                let _ = write!(s, "  {cell:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    for row in rows {
        line(row);
    }
    out
}

pub fn distribution_text(report: &DistributionReport) -> String {
    let rows: Vec<Vec<String>> = report
        .buckets
        .iter()
        .map(|b| vec![cents(b.amount_cents), b.count.to_string(), format!("{}%", b.percent)])
        .collect();
    let mut out = table(&["contribution", "trials", "share"], &rows);
    let _ = writeln!(
        out,
        "total trials: {} ({})",
        report.total_trials,
        if report.include_bots { "bots included" } else { "humans only" }
    );
    out
}

pub fn rounds_text(series: &[RoundMean]) -> String {
    let rows: Vec<Vec<String>> = series
        .iter()
        .map(|r| {
            let euros = r.mean_cents / Rational::from_integer(100);
            vec![(r.round + 1).to_string(), render_decimal(euros, 3), r.trials.to_string()]
        })
        .collect();
    table(&["round", "mean contribution", "trials"], &rows)
}

pub fn questionnaire_text(summary: &QuestionnaireSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "responses: {}", summary.n);
    let _ = writeln!(out, "generosity mean: {:.3}", summary.generosity_mean);
    match summary.sd_kind {
        SdKind::Sample => {
            let _ = writeln!(out, "generosity sd: {:.3}", summary.generosity_sd);
        }
        SdKind::Undefined => {
            let _ = writeln!(out, "generosity sd: undefined (one response)");
        }
    }
    out.push('\n');
    let rows: Vec<Vec<String>> = summary
        .roles
        .iter()
        .map(|r| vec![r.role.to_string(), r.count.to_string(), format!("{}%", r.percent)])
        .collect();
    out.push_str(&table(&["perceived role", "count", "share"], &rows));
    out
}

fn means_text(means: &[StrategyMean]) -> String {
    let rows: Vec<Vec<String>> = means
        .iter()
        .map(|m| vec![m.strategy.token().to_string(), m.seats.to_string(), m.mean_final_score.render().text])
        .collect();
    table(&["strategy", "seats", "mean final score"], &rows)
}

#[derive(Serialize)]
pub struct SimulationSummary<'a> {
    pub games: usize,
    pub distribution: &'a DistributionReport,
    pub strategy_means: &'a [StrategyMean],
}

impl<'a> SimulationSummary<'a> {
    pub fn new(outcome: &'a TournamentOutcome) -> Self {
        SimulationSummary {
            games: outcome.logs.len(),
            distribution: &outcome.distribution,
            strategy_means: &outcome.strategy_means,
        }
    }
}

pub fn simulation_text(summary: &SimulationSummary<'_>) -> String {
    let mut out = format!("games: {}\n\n", summary.games);
    out.push_str(&distribution_text(summary.distribution));
    out.push('\n');
    out.push_str(&means_text(summary.strategy_means));
    out
}

/// Write `value` as pretty JSON to `path`, or to stdout when `path` is `-`.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if path == Path::new("-") {
        print!("{text}");
        Ok(())
    } else {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
