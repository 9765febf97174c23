//! Three-way transient comparison: conventional scheme with low and high
//! voltage gains against the cascade scheme, on one scenario.

use std::fmt::Write as _;

use serde::Serialize;

use super::commands::sim_error;
use super::{num, CommandOutput, LabError, OutputDir};
use crate::config::{ConventionalVariant, LabConfig, ScenarioEvent};
use crate::exec::Execution;
use crate::sim::{self, Band, SimResult};

pub const CASE_LABELS: [&str; 3] = ["conventional-low", "conventional-high", "proposed"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub case: String,
    pub event: String,
    pub event_time: f64,
    pub itae_v: Option<f64>,
    pub itae_i: Option<f64>,
    /// s after the event; `None` when not settled or the case failed.
    pub settling_v: Option<f64>,
    /// `ok`, `not-settled`, or `failed: <reason>`.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub event: String,
    pub metric: String,
    /// Case labels from best (smallest) to worst.
    pub expected: Vec<String>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// Half-width of the shared settling band for each event, V.
    pub settling_bands: Vec<(String, f64)>,
    pub orderings: Vec<OrderingCheck>,
}

impl ComparisonTable {
    pub fn row(&self, case: &str, event: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.case == case && r.event == event)
    }

    pub fn all_orderings_hold(&self) -> bool {
        self.orderings.iter().all(|o| o.holds)
    }
}

/// Runs the three cases and scores every event. The settling band for an
/// event is a percentage of the largest excursion among the cases, so that
/// all three are judged against the same absolute band.
pub fn compare_cases(
    cfg: &LabConfig,
    exec: Execution,
) -> Result<(ComparisonTable, Vec<Result<SimResult, LabError>>), LabError> {
    let setups = [
        cfg.conventional_scheme(ConventionalVariant::Low)?,
        cfg.conventional_scheme(ConventionalVariant::High)?,
        cfg.cascade_scheme()?,
    ];
    let scenarios = setups
        .into_iter()
        .map(|c| cfg.scenario(c))
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<Result<SimResult, LabError>> = sim::run_many(&scenarios, exec)
        .into_iter()
        .map(|r| r.map_err(sim_error))
        .collect();

    let events = cfg.events();
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    for ev in &events {
        let peak = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .filter_map(|r| sim::peak_deviation(&r.time, &r.v_mean, 0.0, ev.time, ev.settle_until).ok())
            .fold(0.0, f64::max);
        let band = cfg.scenario.settling_band_percent / 100.0 * peak;
        bands.push((ev.label.clone(), band));
        for (label, r) in CASE_LABELS.iter().zip(&results) {
            rows.push(score_row(cfg, label, ev, r, band));
        }
    }
    let orderings = events
        .iter()
        .flat_map(|ev| {
            [
                ("itae_v", ["proposed", "conventional-high", "conventional-low"]),
                ("itae_i", ["proposed", "conventional-low", "conventional-high"]),
                ("settling_v", ["proposed", "conventional-high", "conventional-low"]),
            ]
            .map(|(metric, order)| check_ordering(&rows, &ev.label, metric, &order))
        })
        .collect();
    Ok((
        ComparisonTable {
            rows,
            settling_bands: bands,
            orderings,
        },
        results,
    ))
}

fn score_row(
    cfg: &LabConfig,
    case: &str,
    ev: &ScenarioEvent,
    r: &Result<SimResult, LabError>,
    band: f64,
) -> ComparisonRow {
    let failed = |reason: String| ComparisonRow {
        case: case.into(),
        event: ev.label.clone(),
        event_time: ev.time,
        itae_v: None,
        itae_i: None,
        settling_v: None,
        status: format!("failed: {reason}"),
    };
    let r = match r {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let scored = sim::itae_report(r, ev.time, cfg.scenario.itae_window).and_then(|itae| {
        sim::settling_time(&r.time, &r.v_mean, 0.0, Band::Absolute(band), ev.time, ev.settle_until).map(|s| (itae, s))
    });
    match scored {
        Ok((itae, settling)) => ComparisonRow {
            case: case.into(),
            event: ev.label.clone(),
            event_time: ev.time,
            itae_v: Some(itae.itae_v),
            itae_i: Some(itae.itae_i),
            settling_v: settling.seconds(),
            status: if settling.seconds().is_some() {
                "ok"
            } else {
                "not-settled"
            }
            .into(),
        },
        Err(e) => failed(e.to_string()),
    }
}

fn metric(row: &ComparisonRow, name: &str) -> Option<f64> {
    match name {
        "itae_v" => row.itae_v,
        "itae_i" => row.itae_i,
        "settling_v" => row.settling_v.or(if row.status == "not-settled" {
            Some(f64::INFINITY)
        } else {
            None
        }),
        _ => None,
    }
}

fn check_ordering(rows: &[ComparisonRow], event: &str, name: &str, order: &[&str; 3]) -> OrderingCheck {
    let values: Vec<Option<f64>> = order
        .iter()
        .map(|case| {
            rows.iter()
                .find(|r| r.case == *case && r.event == event)
                .and_then(|r| metric(r, name))
        })
        .collect();
    let holds = values
        .windows(2)
        .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a < b));
    OrderingCheck {
        event: event.into(),
        metric: name.into(),
        expected: order.iter().map(|s| s.to_string()).collect(),
        holds,
    }
}

pub fn cmd_compare(cfg: &LabConfig, mut out: OutputDir, exec: Execution) -> Result<CommandOutput, LabError> {
    let (table, results) = compare_cases(cfg, exec)?;
    let opt = |x: Option<f64>| x.map_or(String::new(), num);
    let rows = table.rows.iter().map(|r| {
        vec![
            r.case.clone(),
            r.event.clone(),
            num(r.event_time),
            opt(r.itae_v),
            opt(r.itae_i),
            opt(r.settling_v),
            r.status.clone(),
        ]
    });
    out.write_csv(
        "comparison.csv",
        &[],
        &[
            "case",
            "event",
            "event_time",
            "itae_v",
            "itae_i",
            "settling_v",
            "status",
        ],
        rows,
    )?;
    out.write_json("comparison.json", &table)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18} {:<16} {:>14} {:>14} {:>12}",
        "case", "event", "ITAE_V", "ITAE_I", "settling_v"
    );
    for r in &table.rows {
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
        let st = r.settling_v.map_or(r.status.clone(), |v| format!("{v:.4} s"));
        let _ = writeln!(
            s,
            "{:<18} {:<16} {:>14} {:>14} {:>12}",
            r.case,
            r.event,
            f(r.itae_v),
            f(r.itae_i),
            st
        );
    }
    for o in &table.orderings {
        let _ = writeln!(
            s,
            "{} {:<10} {}: {}",
            if o.holds { "holds  " } else { "VIOLATED" },
            o.metric,
            o.event,
            o.expected.join(" < ")
        );
    }
    let failure = results.iter().zip(CASE_LABELS).find_map(|(r, label)| {
        r.as_ref()
            .err()
            .map(|e| LabError::Numerical(format!("case {label} failed: {e}")))
    });
    Ok(out.finish(s, failure))
}
