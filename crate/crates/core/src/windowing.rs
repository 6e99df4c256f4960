//! Transformation of longitudinal records into drug-event association
//! triples, and 2x2 contingency-table queries over them.
//!
//! GP data carries no explicit drug-event links; a link is *suspected* when
//! an event falls inside the window after a prescription. The window is
//! half-open `(T0, T0 + t_crit]`: same-day events are excluded, since they
//! are more plausibly the indication for the prescription than a reaction
//! to it. Multiple qualifying prescriptions or event occurrences collapse
//! into a single `(unit, drug, event)` triple, so repeat prescriptions do
//! not inflate counts. For SRS data every accepted report asserts its own
//! link and the report is the counting unit.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{GpDataset, SrsDataset};
use crate::model::{DrugId, EventCode, EventKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WindowError {
    #[error("window length must be positive")]
    EmptyWindow,
    #[error("invalid window {0:?}: expected a positive day count or \"inf\"")]
    UnparsableWindow(String),
    #[error("drug {0} is not in the association universe")]
    UnknownDrug(String),
    #[error("event {0} is not in the association universe")]
    UnknownEvent(String),
    #[error("level {0} out of range 1-5")]
    LevelOutOfRange(u8),
    #[error("operation requires GP associations (hierarchical event codes)")]
    NotGpAssociations,
}

/// Length of the suspicion window after each prescription.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowConfig {
    days: Option<u32>,
}

impl WindowConfig {
    pub fn finite(days: u32) -> Result<Self, WindowError> {
        if days == 0 {
            return Err(WindowError::EmptyWindow);
        }
        Ok(WindowConfig { days: Some(days) })
    }

    /// Unbounded window: everything after the prescription, to end of record.
    pub fn infinite() -> Self {
        WindowConfig { days: None }
    }

    pub fn days(&self) -> Option<u32> {
        self.days
    }

    pub fn is_infinite(&self) -> bool {
        self.days.is_none()
    }

    /// Parses `"inf"`/`"infinite"` or a positive day count.
    pub fn parse(token: &str) -> Result<Self, WindowError> {
        let t = token.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") {
            return Ok(WindowConfig::infinite());
        }
        t.parse::<u32>()
            .map_err(|_| WindowError::UnparsableWindow(token.to_string()))
            .and_then(WindowConfig::finite)
    }

    fn admits(&self, t0: NaiveDate, event: NaiveDate) -> bool {
        if event <= t0 {
            return false;
        }
        match self.days {
            None => true,
            Some(days) => (event - t0).num_days() <= i64::from(days),
        }
    }
}

impl std::fmt::Display for WindowConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.days {
            Some(d) => write!(f, "{d}"),
            None => f.write_str("inf"),
        }
    }
}

/// Which database kind an association set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Gp,
    Srs,
}

/// One suspected drug-event link: the counting unit is the patient for GP
/// data and the report for SRS data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub unit: String,
    pub drug: DrugId,
    pub event: EventKey,
}

/// The 2x2 table for one (drug, event) query:
///
/// |                | drug of interest | other drugs |
/// |----------------|------------------|-------------|
/// | event          | a                | b           |
/// | other events   | c                | d           |
///
/// `a + b + c + d` always equals the number of triples in the set queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

/// An immutable set of distinct association triples plus the drug and event
/// universes they span. Queries are read-only and safe to run concurrently.
#[derive(Debug, Clone)]
pub struct AssociationSet {
    kind: DatasetKind,
    triples: Vec<Triple>,
    drugs: BTreeSet<DrugId>,
    events: BTreeSet<EventKey>,
    drug_counts: HashMap<DrugId, u64>,
    event_counts: HashMap<EventKey, u64>,
    pair_counts: HashMap<(DrugId, EventKey), u64>,
}

impl AssociationSet {
    /// Builds a set from raw triples: sorts, removes duplicates, derives the
    /// universes and the count indexes.
    pub fn from_triples(kind: DatasetKind, mut triples: Vec<Triple>) -> Self {
        triples.sort();
        triples.dedup();
        let mut drugs = BTreeSet::new();
        let mut events = BTreeSet::new();
        let mut drug_counts: HashMap<DrugId, u64> = HashMap::new();
        let mut event_counts: HashMap<EventKey, u64> = HashMap::new();
        let mut pair_counts: HashMap<(DrugId, EventKey), u64> = HashMap::new();
        for t in &triples {
            drugs.insert(t.drug.clone());
            events.insert(t.event.clone());
            *drug_counts.entry(t.drug.clone()).or_default() += 1;
            *event_counts.entry(t.event.clone()).or_default() += 1;
            *pair_counts
                .entry((t.drug.clone(), t.event.clone()))
                .or_default() += 1;
        }
        AssociationSet {
            kind,
            triples,
            drugs,
            events,
            drug_counts,
            event_counts,
            pair_counts,
        }
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn universe_drugs(&self) -> &BTreeSet<DrugId> {
        &self.drugs
    }

    pub fn universe_events(&self) -> &BTreeSet<EventKey> {
        &self.events
    }

    /// The 2x2 table for `(drug, event)`. Both must be in the universe.
    pub fn contingency(
        &self,
        drug: &DrugId,
        event: &EventKey,
    ) -> Result<ContingencyTable, WindowError> {
        if !self.drugs.contains(drug) {
            return Err(WindowError::UnknownDrug(drug.to_string()));
        }
        if !self.events.contains(event) {
            return Err(WindowError::UnknownEvent(event.to_string()));
        }
        let a = self
            .pair_counts
            .get(&(drug.clone(), event.clone()))
            .copied()
            .unwrap_or(0);
        let with_drug = self.drug_counts[drug];
        let with_event = self.event_counts[event];
        let total = self.triples.len() as u64;
        Ok(ContingencyTable {
            a,
            b: with_event - a,
            c: with_drug - a,
            d: total + a - with_drug - with_event,
        })
    }

    /// Re-maps every GP event code to its ancestor at `level` (codes already
    /// at or below that level stay as they are), de-duplicates the triples,
    /// and returns one table per re-mapped code.
    pub fn contingency_at_level(
        &self,
        drug: &DrugId,
        level: u8,
    ) -> Result<BTreeMap<EventCode, ContingencyTable>, WindowError> {
        if !(1..=5).contains(&level) {
            return Err(WindowError::LevelOutOfRange(level));
        }
        if self.kind != DatasetKind::Gp || self.events.iter().any(|e| e.as_code().is_none()) {
            return Err(WindowError::NotGpAssociations);
        }
        if !self.drugs.contains(drug) {
            return Err(WindowError::UnknownDrug(drug.to_string()));
        }
        let remapped: Vec<Triple> = self
            .triples
            .iter()
            .map(|t| {
                let code = t.event.as_code().expect("checked code-keyed above");
                let target = level.min(code.level());
                let mapped = code.ancestor(target).expect("target <= level");
                Triple {
                    unit: t.unit.clone(),
                    drug: t.drug.clone(),
                    event: EventKey::Code(mapped),
                }
            })
            .collect();
        let coarse = AssociationSet::from_triples(DatasetKind::Gp, remapped);
        let mut out = BTreeMap::new();
        for event in coarse.universe_events() {
            let code = *event.as_code().expect("GP set holds code keys only");
            out.insert(code, coarse.contingency(drug, event)?);
        }
        Ok(out)
    }

    /// Audit export, one `unit_id,drug,event` row per triple.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["unit_id", "drug", "event"])?;
        for t in &self.triples {
            w.write_record([t.unit.as_str(), t.drug.as_str(), &t.event.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> csv::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Extracts the suspected associations of a GP dataset under `cfg`.
///
/// A triple `(patient, drug, event)` is present iff the patient has at least
/// one prescription of the drug with the event strictly inside the window
/// after it. Patients are processed in parallel; the result is independent
/// of scheduling.
pub fn associate_gp(data: &GpDataset, cfg: WindowConfig) -> AssociationSet {
    struct PatientSlice<'a> {
        id: &'a str,
        // per drug: sorted prescription dates
        rx: BTreeMap<&'a DrugId, Vec<NaiveDate>>,
        events: Vec<(NaiveDate, &'a EventCode)>,
    }

    let mut by_patient: HashMap<&str, PatientSlice> = HashMap::new();
    for p in &data.prescriptions {
        let slot = by_patient
            .entry(p.patient_id.as_str())
            .or_insert_with(|| PatientSlice {
                id: p.patient_id.as_str(),
                rx: BTreeMap::new(),
                events: Vec::new(),
            });
        slot.rx.entry(&p.drug).or_default().push(p.date);
    }
    for e in &data.events {
        if let Some(slot) = by_patient.get_mut(e.patient_id.as_str()) {
            slot.events.push((e.date, &e.code));
        }
        // Events of patients with no prescriptions can never associate.
    }

    let mut slices: Vec<PatientSlice> = by_patient.into_values().collect();
    slices.sort_by(|a, b| a.id.cmp(b.id));

    let triples: Vec<Triple> = slices
        .into_par_iter()
        .flat_map_iter(|mut slice| {
            for dates in slice.rx.values_mut() {
                dates.sort_unstable();
            }
            slice.events.sort_unstable();
            let mut found: BTreeSet<(&DrugId, &EventCode)> = BTreeSet::new();
            for (drug, rx_dates) in &slice.rx {
                for &(event_date, code) in &slice.events {
                    if found.contains(&(*drug, code)) {
                        continue;
                    }
                    // Latest prescription strictly before the event is the
                    // only candidate that can satisfy a trailing window.
                    let before = rx_dates.partition_point(|&d| d < event_date);
                    if before == 0 {
                        continue;
                    }
                    if cfg.admits(rx_dates[before - 1], event_date) {
                        found.insert((*drug, code));
                    }
                }
            }
            let id = slice.id.to_string();
            found
                .into_iter()
                .map(|(drug, code)| Triple {
                    unit: id.clone(),
                    drug: drug.clone(),
                    event: EventKey::Code(*code),
                })
                .collect::<Vec<_>>()
        })
        .collect();

    AssociationSet::from_triples(DatasetKind::Gp, triples)
}

/// Maps each accepted spontaneous report to its asserted triple.
pub fn associate_srs(data: &SrsDataset) -> AssociationSet {
    let triples = data
        .reports
        .iter()
        .map(|r| Triple {
            unit: r.report_id.clone(),
            drug: r.drug.clone(),
            event: EventKey::Name(r.event_name.clone()),
        })
        .collect();
    AssociationSet::from_triples(DatasetKind::Srs, triples)
}
