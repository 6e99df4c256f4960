//! ROR and PRR disproportionality statistics over 2x2 contingency tables.
//!
//! Both estimators compare how often an event is seen with the drug of
//! interest against how often it is seen with everything else. Estimates are
//! reported with the standard error of their natural log, the 95% interval
//! `exp(ln est ± 1.96 se)`, and the signal flag: the log-scale lower bound
//! above one, i.e. `ln(est) − 1.96·se > 0`.
//!
//! Tables with an empty cell have no defined estimate. Under
//! [`ZeroPolicy::Strict`] they are reported as errors naming the first empty
//! cell; under [`ZeroPolicy::Haldane`] 0.5 is added to all four cells first
//! and the result is marked as corrected.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{DrugId, EventKey};
use crate::windowing::{AssociationSet, ContingencyTable, WindowError};

/// Two-sided 95% normal quantile used throughout.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ror,
    Prr,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ror => "ror",
            Method::Prr => "prr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ZeroPolicy {
    /// Empty cells make the estimate undefined; report an error.
    #[default]
    Strict,
    /// Add 0.5 to every cell when any cell is empty.
    Haldane,
}

/// Names one cell of the 2x2 table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    A,
    B,
    C,
    D,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Cell::A => "a",
            Cell::B => "b",
            Cell::C => "c",
            Cell::D => "d",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignalError {
    #[error("estimate undefined: cell {cell} of the contingency table is zero")]
    ZeroCell { cell: Cell },
}

/// A disproportionality estimate with its interval and signal decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalStats {
    pub method: Method,
    pub estimate: f64,
    /// Standard error of the natural log of the estimate.
    pub se_ln: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Lower 95% bound above one.
    pub signaled: bool,
    pub correction_applied: bool,
}

fn cells(table: &ContingencyTable, policy: ZeroPolicy) -> Result<([f64; 4], bool), SignalError> {
    let raw = [table.a, table.b, table.c, table.d];
    let zero = raw
        .iter()
        .position(|&v| v == 0)
        .map(|i| [Cell::A, Cell::B, Cell::C, Cell::D][i]);
    match (zero, policy) {
        (None, _) => Ok((raw.map(|v| v as f64), false)),
        (Some(cell), ZeroPolicy::Strict) => Err(SignalError::ZeroCell { cell }),
        (Some(_), ZeroPolicy::Haldane) => Ok((raw.map(|v| v as f64 + 0.5), true)),
    }
}

fn stats(method: Method, estimate: f64, se_ln: f64, corrected: bool) -> SignalStats {
    let ln_est = estimate.ln();
    SignalStats {
        method,
        estimate,
        se_ln,
        ci_low: (ln_est - Z_95 * se_ln).exp(),
        ci_high: (ln_est + Z_95 * se_ln).exp(),
        signaled: ln_est - Z_95 * se_ln > 0.0,
        correction_applied: corrected,
    }
}

/// Reporting odds ratio `(a/b)/(c/d)` with `se(ln) = sqrt(1/a+1/b+1/c+1/d)`.
pub fn ror(table: &ContingencyTable, policy: ZeroPolicy) -> Result<SignalStats, SignalError> {
    let ([a, b, c, d], corrected) = cells(table, policy)?;
    let estimate = (a / b) / (c / d);
    let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    Ok(stats(Method::Ror, estimate, se, corrected))
}

/// Proportional reporting ratio `[a/(a+c)] / [b/(b+d)]`.
///
/// The log standard error is `sqrt(1/a − 1/(a+b) + 1/c + 1/(c+d))`. Note the
/// asymmetry of the two correction terms (`−1/(a+b)` but `+1/(c+d)`); callers
/// expecting the `1/a − 1/(a+c) + 1/b − 1/(b+d)` variant found elsewhere
/// should account for the difference.
pub fn prr(table: &ContingencyTable, policy: ZeroPolicy) -> Result<SignalStats, SignalError> {
    let ([a, b, c, d], corrected) = cells(table, policy)?;
    let estimate = (a / (a + c)) / (b / (b + d));
    let se = (1.0 / a - 1.0 / (a + b) + 1.0 / c + 1.0 / (c + d)).sqrt();
    Ok(stats(Method::Prr, estimate, se, corrected))
}

pub fn compute(
    method: Method,
    table: &ContingencyTable,
    policy: ZeroPolicy,
) -> Result<SignalStats, SignalError> {
    match method {
        Method::Ror => ror(table, policy),
        Method::Prr => prr(table, policy),
    }
}

/// One ranked event with the table it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSignal {
    pub event: EventKey,
    pub table: ContingencyTable,
    pub stats: SignalStats,
}

/// The per-event results for one drug over a whole association universe,
/// ordered by estimate descending with ties broken by event key.
#[derive(Debug, Clone)]
pub struct SignalRanking {
    pub method: Method,
    pub zero_policy: ZeroPolicy,
    pub ranked: Vec<RankedSignal>,
    /// Events whose estimate is undefined under the strict policy, with the
    /// offending cell.
    pub undefined: Vec<(EventKey, SignalError)>,
}

impl SignalRanking {
    /// Defined scores keyed by event, for ROC sweeps.
    pub fn scores(&self) -> BTreeMap<EventKey, f64> {
        self.ranked
            .iter()
            .map(|r| (r.event.clone(), r.stats.estimate))
            .collect()
    }

    /// Events meeting the lower-bound signal criterion.
    pub fn signaled_events(&self) -> impl Iterator<Item = &EventKey> {
        self.ranked
            .iter()
            .filter(|r| r.stats.signaled)
            .map(|r| &r.event)
    }

    /// CSV export:
    /// `event,method,a,b,c,d,estimate,se_ln,ci_low,ci_high,signaled,correction_applied`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "event",
            "method",
            "a",
            "b",
            "c",
            "d",
            "estimate",
            "se_ln",
            "ci_low",
            "ci_high",
            "signaled",
            "correction_applied",
        ])?;
        for r in &self.ranked {
            w.write_record([
                r.event.to_string(),
                r.stats.method.to_string(),
                r.table.a.to_string(),
                r.table.b.to_string(),
                r.table.c.to_string(),
                r.table.d.to_string(),
                r.stats.estimate.to_string(),
                r.stats.se_ln.to_string(),
                r.stats.ci_low.to_string(),
                r.stats.ci_high.to_string(),
                r.stats.signaled.to_string(),
                r.stats.correction_applied.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV export of the undefined events: `event,method,reason`.
    pub fn write_undefined_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["event", "method", "reason"])?;
        for (event, err) in &self.undefined {
            w.write_record([event.to_string(), self.method.to_string(), err.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Computes one estimate per event in the universe for `drug` and ranks the
/// defined ones. Events are scored in parallel; ordering is deterministic.
pub fn rank_signals(
    assoc: &AssociationSet,
    drug: &DrugId,
    method: Method,
    policy: ZeroPolicy,
) -> Result<SignalRanking, WindowError> {
    if !assoc.universe_drugs().contains(drug) {
        return Err(WindowError::UnknownDrug(drug.to_string()));
    }
    type Scored = (EventKey, Result<(ContingencyTable, SignalStats), SignalError>);
    let events: Vec<&EventKey> = assoc.universe_events().iter().collect();
    let results: Vec<Scored> = events
        .par_iter()
        .map(|event| {
            let table = assoc
                .contingency(drug, event)
                .expect("event drawn from universe");
            let outcome = compute(method, &table, policy).map(|s| (table, s));
            ((*event).clone(), outcome)
        })
        .collect();

    let mut ranked = Vec::new();
    let mut undefined = Vec::new();
    for (event, outcome) in results {
        match outcome {
            Ok((table, stats)) => ranked.push(RankedSignal { event, table, stats }),
            Err(err) => undefined.push((event, err)),
        }
    }
    ranked.sort_by(|x, y| {
        y.stats
            .estimate
            .total_cmp(&x.stats.estimate)
            .then_with(|| x.event.cmp(&y.event))
    });
    undefined.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(SignalRanking {
        method,
        zero_policy: policy,
        ranked,
        undefined,
    })
}
