//! Seeded synthetic GP and SRS datasets with planted drug-event effects,
//! plus the brute-force oracles used to validate the analysis pipeline.
//!
//! Generation is driven by a single ChaCha8 stream seeded from
//! [`SynthConfig::seed`]; for a fixed configuration the output datasets are
//! identical run to run, down to the exported CSV bytes. Draws happen in a
//! fixed order: drug list, event-code universe, then per patient (in id
//! order) demographics, prescriptions, background events, planted effects in
//! configuration order, and finally report sampling.
//!
//! Prescriptions and background events are homogeneous Poisson processes
//! over each patient's observation span, with drugs and codes drawn
//! uniformly. A planted effect multiplies the target code's event rate by
//! `rate_multiplier` inside the onset window after each prescription of the
//! target drug (multipliers above one add events over the union of the
//! windows, multipliers below one thin background events inside them).

use std::collections::{BTreeSet, HashMap, HashSet};

use chrono::{Days, NaiveDate};
use rand::prelude::*;
use rand::rngs::StdRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GpDataset, SrsDataset};
use crate::model::{
    ClinicalEvent, DrugId, EventCode, EventKey, Gender, PatientRecord, PrescriptionEvent,
    SpontaneousReport,
};
use crate::windowing::{ContingencyTable, WindowConfig};

const DAYS_PER_YEAR: f64 = 365.25;

/// First observed day of every generated patient record.
const EPOCH: &str = "2010-01-01";

/// Pairing window for report sampling when a prescription's drug carries no
/// planted effect.
const DEFAULT_REPORT_WINDOW_DAYS: u32 = 60;

/// Cap on `prescriptions x events` pair checks in the brute-force oracle.
pub const BRUTE_FORCE_GUARD: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("brute-force guard exceeded: {checks} pair checks > {limit}")]
    SizeGuardExceeded { checks: u64, limit: u64 },
}

/// One planted drug-event effect.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlantedEffect {
    pub drug: String,
    pub event_code: String,
    /// Event-rate multiplier inside the onset window (1 = no effect).
    pub rate_multiplier: f64,
    pub onset_window_days: u32,
}

/// Per-field blanking probabilities for generated reports.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
pub struct SrsMissingness {
    #[serde(default)]
    pub age: f64,
    #[serde(default)]
    pub gender: f64,
    #[serde(default)]
    pub event_date: f64,
}

impl SrsMissingness {
    /// Probability that at least one optional field is blanked.
    pub fn any(&self) -> f64 {
        1.0 - (1.0 - self.age) * (1.0 - self.gender) * (1.0 - self.event_date)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_patients: u32,
    pub n_drugs: u32,
    /// Total size of the event-code universe; spread over levels 1-5 with
    /// every code's ancestors also present.
    pub n_event_codes: u32,
    pub observation_days: u32,
    /// Poisson rate per patient-year, shared across the drug list.
    pub background_prescription_rate: f64,
    /// Poisson rate per patient-year, shared across the code universe.
    pub background_event_rate: f64,
    #[serde(default)]
    pub planted_effects: Vec<PlantedEffect>,
    /// Probability that a (prescription, in-window event) pair becomes a
    /// spontaneous report.
    #[serde(default)]
    pub srs_reporting_prob: f64,
    #[serde(default)]
    pub srs_missingness: SrsMissingness,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |msg: String| Err(SynthError::Config(msg));
        if self.n_patients == 0 {
            return err("n_patients must be at least 1".into());
        }
        if self.n_drugs == 0 {
            return err("n_drugs must be at least 1".into());
        }
        if self.n_event_codes == 0 {
            return err("n_event_codes must be at least 1".into());
        }
        if self.observation_days == 0 {
            return err("observation_days must be at least 1".into());
        }
        for (name, rate) in [
            ("background_prescription_rate", self.background_prescription_rate),
            ("background_event_rate", self.background_event_rate),
        ] {
            if !rate.is_finite() || rate < 0.0 {
                return err(format!("{name} must be finite and nonnegative, got {rate}"));
            }
        }
        for (name, p) in [
            ("srs_reporting_prob", self.srs_reporting_prob),
            ("srs_missingness.age", self.srs_missingness.age),
            ("srs_missingness.gender", self.srs_missingness.gender),
            ("srs_missingness.event_date", self.srs_missingness.event_date),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let mut chain_codes = HashSet::new();
        for effect in &self.planted_effects {
            if !effect.rate_multiplier.is_finite() || effect.rate_multiplier <= 0.0 {
                return err(format!(
                    "rate_multiplier must be finite and positive, got {}",
                    effect.rate_multiplier
                ));
            }
            if effect.onset_window_days == 0 {
                return err("onset_window_days must be at least 1".into());
            }
            DrugId::new(&effect.drug).map_err(|e| SynthError::Config(e.to_string()))?;
            let code = EventCode::parse(&effect.event_code)
                .map_err(|e| SynthError::Config(e.to_string()))?;
            for level in 1..=code.level() {
                chain_codes.insert(code.ancestor(level).expect("level within range"));
            }
        }
        if chain_codes.len() > self.n_event_codes as usize {
            return err(format!(
                "n_event_codes = {} cannot hold the {} codes required by the planted effects",
                self.n_event_codes,
                chain_codes.len()
            ));
        }
        Ok(())
    }
}

/// What was planted, with the odds ratio the pipeline should recover.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PlantedTruth {
    pub drug: String,
    pub event_code: String,
    pub rate_multiplier: f64,
    pub onset_window_days: u32,
    /// Expected association odds ratio when triples are extracted with the
    /// window matched to the onset window. Derived from the generator's
    /// rates, including the spill-over of planted events into other drugs'
    /// windows; windows of distinct prescriptions are treated as disjoint,
    /// so the value is accurate for sparse configurations and per-effect
    /// (effects sharing a drug or code interact).
    pub implied_odds_ratio: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GroundTruth {
    pub planted: Vec<PlantedTruth>,
}

fn epoch() -> NaiveDate {
    NaiveDate::parse_from_str(EPOCH, "%Y-%m-%d").expect("valid epoch")
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Expected per-patient probability of at least one qualifying
/// (prescription, event) association for a code with per-day hazard
/// `hazard` inside a trailing window of `window` days, observed for
/// `total_days`.
///
/// `1 − exp(−r ∫ (1 − e^{−hazard·min(window, T−t)}) dt)` where `r` is the
/// per-day prescription rate of one drug; windows of distinct prescriptions
/// are treated as disjoint.
fn association_probability(rx_per_day: f64, hazard: f64, window: f64, total_days: f64) -> f64 {
    let w = window.min(total_days);
    let miss = 1.0 - (-hazard * w).exp();
    // Full-length windows for t <= T - w, truncated tail after that.
    let integral = miss * (total_days - w) + w - miss / hazard;
    1.0 - (-rx_per_day * integral).exp()
}

/// The a-cell sees the planted hazard `m·λ` inside the drug's own windows.
/// The b-cell is not clean background: planted events also land inside
/// *other* drugs' windows whenever those overlap a planted window, which
/// happens for a fraction `q = 1 − exp(−r·w)` of days. The odds ratio of the
/// expected cells reduces to the ratio of those two association
/// probabilities (the c and d cells cancel).
fn implied_odds_ratio(cfg: &SynthConfig, n_drugs: usize, effect: &PlantedEffect) -> f64 {
    let rx_per_day = cfg.background_prescription_rate / n_drugs as f64 / DAYS_PER_YEAR;
    let hazard = cfg.background_event_rate / cfg.n_event_codes as f64 / DAYS_PER_YEAR;
    if rx_per_day == 0.0 || hazard == 0.0 {
        return 1.0;
    }
    let window = f64::from(effect.onset_window_days);
    let total = f64::from(cfg.observation_days);
    let planted =
        association_probability(rx_per_day, hazard * effect.rate_multiplier, window, total);
    let coverage = 1.0 - (-rx_per_day * window.min(total)).exp();
    let spill = hazard * (1.0 + (effect.rate_multiplier - 1.0) * coverage);
    let background = association_probability(rx_per_day, spill, window, total);
    planted / background
}

/// Merged, disjoint, ascending day intervals `[start, end)`.
fn merge_intervals(mut intervals: Vec<(u32, u32)>) -> Vec<(u32, u32)> {
    intervals.sort_unstable();
    let mut merged: Vec<(u32, u32)> = Vec::with_capacity(intervals.len());
    for (start, end) in intervals {
        if start >= end {
            continue;
        }
        match merged.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => merged.push((start, end)),
        }
    }
    merged
}

fn interval_len(intervals: &[(u32, u32)]) -> u64 {
    intervals.iter().map(|&(s, e)| u64::from(e - s)).sum()
}

fn sample_day_in(intervals: &[(u32, u32)], rng: &mut ChaCha8Rng) -> u32 {
    let total = interval_len(intervals);
    let mut offset = rng.random_range(0..total);
    for &(start, end) in intervals {
        let len = u64::from(end - start);
        if offset < len {
            return start + offset as u32;
        }
        offset -= len;
    }
    unreachable!("offset within total length")
}

struct CodeUniverse {
    codes: Vec<EventCode>,
}

impl CodeUniverse {
    /// Builds a universe of exactly `target` codes in which every code's
    /// ancestors are also members. Planted codes (with their ancestor
    /// chains) are inserted first and never trimmed.
    fn generate(
        rng: &mut ChaCha8Rng,
        target: usize,
        protected: &[EventCode],
    ) -> CodeUniverse {
        const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
        let mut ordered: Vec<EventCode> = Vec::new();
        let mut seen: HashSet<EventCode> = HashSet::new();
        let mut keep: HashSet<EventCode> = HashSet::new();
        for code in protected {
            for level in 1..=code.level() {
                let ancestor = code.ancestor(level).expect("level within range");
                keep.insert(ancestor);
                if seen.insert(ancestor) {
                    ordered.push(ancestor);
                }
            }
        }
        while seen.len() < target {
            let leaf: String = (0..5)
                .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
                .collect();
            let leaf = EventCode::parse(&leaf).expect("alphabet symbols are valid");
            for level in 1..=5 {
                let ancestor = leaf.ancestor(level).expect("full-depth code");
                if seen.insert(ancestor) {
                    ordered.push(ancestor);
                }
            }
        }
        // Trim the overshoot from the most recently added leaves, never
        // removing a code that still has descendants (or is protected).
        while ordered.len() > target {
            let removable = ordered
                .iter()
                .rposition(|c| {
                    !keep.contains(c)
                        && !ordered
                            .iter()
                            .any(|other| other != c && c.is_ancestor_of(other))
                })
                .expect("non-protected leaf exists while over target");
            ordered.remove(removable);
        }
        ordered.sort();
        CodeUniverse { codes: ordered }
    }
}

/// Generates the GP dataset, the SRS dataset sampled from it, and the
/// ground truth of the planted effects. Deterministic for a fixed config.
pub fn generate(cfg: &SynthConfig) -> Result<(GpDataset, SrsDataset, GroundTruth), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = epoch();
    let years = f64::from(cfg.observation_days) / DAYS_PER_YEAR;

    // Drug list: background drugs plus any planted drug not already present.
    let mut drugs: Vec<DrugId> = (1..=cfg.n_drugs)
        .map(|i| DrugId::new(&format!("D{i:03}")).expect("generated id"))
        .collect();
    for effect in &cfg.planted_effects {
        let drug = DrugId::new(&effect.drug).expect("validated");
        if !drugs.contains(&drug) {
            drugs.push(drug);
        }
    }
    drugs.sort();

    let protected: Vec<EventCode> = cfg
        .planted_effects
        .iter()
        .map(|e| EventCode::parse(&e.event_code).expect("validated"))
        .collect();
    let universe = CodeUniverse::generate(&mut rng, cfg.n_event_codes as usize, &protected);

    let effects: Vec<(DrugId, EventCode, f64, u32)> = cfg
        .planted_effects
        .iter()
        .map(|e| {
            (
                DrugId::new(&e.drug).expect("validated"),
                EventCode::parse(&e.event_code).expect("validated"),
                e.rate_multiplier,
                e.onset_window_days,
            )
        })
        .collect();

    let per_code_rate = cfg.background_event_rate / cfg.n_event_codes as f64;
    let max_onset = cfg
        .planted_effects
        .iter()
        .map(|e| e.onset_window_days)
        .max()
        .unwrap_or(DEFAULT_REPORT_WINDOW_DAYS);
    // First matching effect wins when several share a drug.
    let mut effect_window_by_drug: HashMap<&DrugId, u32> = HashMap::new();
    for (d, _, _, w) in &effects {
        effect_window_by_drug.entry(d).or_insert(*w);
    }

    let mut patients = Vec::with_capacity(cfg.n_patients as usize);
    let mut prescriptions = Vec::new();
    let mut clinical_events = Vec::new();
    let mut reports = Vec::new();

    for i in 0..cfg.n_patients {
        let patient_id = format!("P{:05}", i + 1);
        let age_days = rng.random_range((18 * 365)..(85 * 365)) as u64;
        let birth = start - Days::new(age_days);
        let gender = if rng.random_bool(0.5) {
            Gender::Male
        } else {
            Gender::Female
        };
        patients.push(
            PatientRecord::new(patient_id.clone(), Some(birth), gender, Some(start), None)
                .expect("birth precedes epoch"),
        );

        // prescriptions
        let n_rx = poisson_count(&mut rng, cfg.background_prescription_rate * years);
        let mut rx: Vec<(u32, usize)> = (0..n_rx)
            .map(|_| {
                (
                    rng.random_range(0..cfg.observation_days),
                    rng.random_range(0..drugs.len()),
                )
            })
            .collect();
        rx.sort_unstable();

        // background events
        let n_ev = poisson_count(&mut rng, cfg.background_event_rate * years);
        let mut events: Vec<(u32, EventCode)> = (0..n_ev)
            .map(|_| {
                (
                    rng.random_range(0..cfg.observation_days),
                    universe.codes[rng.random_range(0..universe.codes.len())],
                )
            })
            .collect();

        // planted effects, in configuration order
        for (drug, code, multiplier, window) in &effects {
            let windows: Vec<(u32, u32)> = rx
                .iter()
                .filter(|&&(_, di)| &drugs[di] == drug)
                .map(|&(day, _)| {
                    let end = day
                        .saturating_add(*window)
                        .saturating_add(1)
                        .min(cfg.observation_days);
                    (day + 1, end)
                })
                .collect();
            let union = merge_intervals(windows);
            if union.is_empty() {
                continue;
            }
            if *multiplier > 1.0 {
                let mean = (multiplier - 1.0)
                    * per_code_rate
                    * (interval_len(&union) as f64 / DAYS_PER_YEAR);
                let extra = poisson_count(&mut rng, mean);
                for _ in 0..extra {
                    events.push((sample_day_in(&union, &mut rng), *code));
                }
            } else if *multiplier < 1.0 {
                let inside =
                    |day: u32| union.iter().any(|&(s, e)| day >= s && day < e);
                let mut kept = Vec::with_capacity(events.len());
                for (day, ec) in events.drain(..) {
                    if ec == *code && inside(day) && !rng.random_bool(*multiplier) {
                        continue;
                    }
                    kept.push((day, ec));
                }
                events = kept;
            }
        }
        events.sort_unstable();

        // spontaneous reports: sample qualifying (prescription, event) pairs
        if cfg.srs_reporting_prob > 0.0 {
            for &(rx_day, di) in &rx {
                let drug = &drugs[di];
                let window = *effect_window_by_drug.get(drug).unwrap_or(&max_onset);
                for &(ev_day, code) in &events {
                    if ev_day <= rx_day || ev_day > rx_day.saturating_add(window) {
                        continue;
                    }
                    if !rng.random_bool(cfg.srs_reporting_prob) {
                        continue;
                    }
                    let event_date = start + Days::new(u64::from(ev_day));
                    let age =
                        ((event_date - birth).num_days() as f64 / DAYS_PER_YEAR).floor() as u32;
                    let age = (!rng.random_bool(cfg.srs_missingness.age)).then_some(age);
                    let gender_field =
                        (!rng.random_bool(cfg.srs_missingness.gender)).then_some(gender);
                    let date_field =
                        (!rng.random_bool(cfg.srs_missingness.event_date)).then_some(event_date);
                    reports.push(
                        SpontaneousReport::new(
                            format!("R{:06}", reports.len() + 1),
                            drug.as_str(),
                            &code.to_string(),
                            age,
                            gender_field,
                            date_field,
                        )
                        .expect("generated fields are valid"),
                    );
                }
            }
        }

        for &(day, di) in &rx {
            prescriptions.push(PrescriptionEvent {
                patient_id: patient_id.clone(),
                drug: drugs[di].clone(),
                date: start + Days::new(u64::from(day)),
            });
        }
        for &(day, code) in &events {
            clinical_events.push(ClinicalEvent {
                patient_id: patient_id.clone(),
                code,
                date: start + Days::new(u64::from(day)),
            });
        }
    }

    let truth = GroundTruth {
        planted: cfg
            .planted_effects
            .iter()
            .map(|e| PlantedTruth {
                drug: DrugId::new(&e.drug).expect("validated").to_string(),
                event_code: EventCode::parse(&e.event_code).expect("validated").to_string(),
                rate_multiplier: e.rate_multiplier,
                onset_window_days: e.onset_window_days,
                implied_odds_ratio: implied_odds_ratio(cfg, drugs.len(), e),
            })
            .collect(),
    };

    let gp = GpDataset {
        patients,
        prescriptions,
        events: clinical_events,
    };
    let srs = SrsDataset::from_reports(reports, 0);
    Ok((gp, srs, truth))
}

/// Contingency table for `(drug, event)` by direct nested-loop enumeration.
///
/// Written independently of the association pipeline on purpose: patients
/// are walked one by one, every (prescription, event) pair of a patient is
/// checked against the window, and the four cells are counted straight off
/// the resulting triple set. Refuses datasets needing more than
/// [`BRUTE_FORCE_GUARD`] pair checks.
pub fn brute_force_contingency(
    data: &GpDataset,
    cfg: WindowConfig,
    drug: &DrugId,
    event: &EventCode,
) -> Result<ContingencyTable, SynthError> {
    let mut rx_by_patient: HashMap<&str, Vec<&PrescriptionEvent>> = HashMap::new();
    for p in &data.prescriptions {
        rx_by_patient.entry(p.patient_id.as_str()).or_default().push(p);
    }
    let mut ev_by_patient: HashMap<&str, Vec<&ClinicalEvent>> = HashMap::new();
    for e in &data.events {
        ev_by_patient.entry(e.patient_id.as_str()).or_default().push(e);
    }

    let mut checks: u64 = 0;
    for patient in &data.patients {
        let n_rx = rx_by_patient
            .get(patient.patient_id.as_str())
            .map_or(0, |v| v.len()) as u64;
        let n_ev = ev_by_patient
            .get(patient.patient_id.as_str())
            .map_or(0, |v| v.len()) as u64;
        checks += n_rx * n_ev;
    }
    if checks > BRUTE_FORCE_GUARD {
        return Err(SynthError::SizeGuardExceeded {
            checks,
            limit: BRUTE_FORCE_GUARD,
        });
    }

    let mut triples: HashSet<(&str, &DrugId, &EventCode)> = HashSet::new();
    for patient in &data.patients {
        let id = patient.patient_id.as_str();
        let (Some(rxs), Some(evs)) = (rx_by_patient.get(id), ev_by_patient.get(id)) else {
            continue;
        };
        for rx in rxs {
            for ev in evs {
                if ev.date <= rx.date {
                    continue;
                }
                if let Some(days) = cfg.days() {
                    if (ev.date - rx.date).num_days() > i64::from(days) {
                        continue;
                    }
                }
                triples.insert((id, &rx.drug, &ev.code));
            }
        }
    }

    let mut table = ContingencyTable { a: 0, b: 0, c: 0, d: 0 };
    for (_, d, e) in &triples {
        match (*d == drug, *e == event) {
            (true, true) => table.a += 1,
            (false, true) => table.b += 1,
            (true, false) => table.c += 1,
            (false, false) => table.d += 1,
        }
    }
    Ok(table)
}

/// ROC points by exhaustive enumeration of the distinct-threshold signal
/// sets, recomputing every count from scratch with plain set operations.
/// Returns `(fpr, tpr)` pairs including the empty and everything-signaled
/// endpoints. Independent of the sweep in the evaluation module.
pub fn brute_force_roc_points(
    scores: &std::collections::BTreeMap<EventKey, f64>,
    known: &[(String, BTreeSet<EventKey>)],
    universe: &BTreeSet<EventKey>,
) -> Vec<(f64, f64)> {
    let union: BTreeSet<&EventKey> = known.iter().flat_map(|(_, k)| k.iter()).collect();
    let n_sets = known.len() as f64;
    let n_other = (universe.len() - union.len()) as f64;

    let mut thresholds: Vec<f64> = scores.values().copied().filter(|s| s.is_finite()).collect();
    thresholds.sort_by(|x, y| y.total_cmp(x));
    thresholds.dedup();

    let mut signal_sets: Vec<BTreeSet<&EventKey>> = vec![BTreeSet::new()];
    for t in &thresholds {
        signal_sets.push(
            scores
                .iter()
                .filter(|(_, s)| s.is_finite() && **s >= *t)
                .map(|(k, _)| k)
                .collect(),
        );
    }
    signal_sets.push(universe.iter().collect());

    let mut points = Vec::new();
    for signaled in &signal_sets {
        let a = known
            .iter()
            .filter(|(_, k)| k.iter().any(|e| signaled.contains(e)))
            .count() as f64;
        let b = signaled.iter().filter(|e| !union.contains(*e)).count() as f64;
        let d = n_other - b;
        let tpr = a / n_sets;
        let fpr = 1.0 - d / n_other;
        if points.last() != Some(&(fpr, tpr)) {
            points.push((fpr, tpr));
        }
    }
    points
}

/// Trapezoidal area under brute-force ROC points, anchored at the corners.
pub fn brute_force_auc(points: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    let mut prev = (0.0, 0.0);
    for &p in points.iter().chain(std::iter::once(&(1.0, 1.0))) {
        area += (p.0 - prev.0) * (p.1 + prev.1) / 2.0;
        prev = p;
    }
    area
}

/// Convenience for statistical tests that need independent draws.
pub fn seeded_rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
