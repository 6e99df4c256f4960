//! CSV readers and writers for the two database kinds.
//!
//! File formats (UTF-8, comma separated, RFC 4180 quoting, ISO-8601 dates):
//!
//! * `patients.csv`      — `patient_id,birth_date,gender,registration_date,death_date`
//! * `prescriptions.csv` — `patient_id,drug,date`
//! * `events.csv`        — `patient_id,code,date`
//! * `srs_reports.csv`   — `report_id,drug,event_name,age,gender,event_date`
//!
//! Empty strings denote absent optional values. GP files are treated as
//! authoritative: any malformed row, orphan patient reference or
//! out-of-bounds date is a hard error naming the file and line. SRS files
//! are known-dirty: rows with missing or unparseable fields are skipped and
//! counted, and per-field missingness of the accepted rows is summarised.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::model::{
    ClinicalEvent, DrugId, EventCode, Gender, PatientRecord, PrescriptionEvent, SpontaneousReport,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header {expected:?}, found {found:?}")]
    Header {
        path: PathBuf,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path}: rows reference unknown patient ids: {}", ids.join(", "))]
    OrphanPatients { path: PathBuf, ids: Vec<String> },
}

/// Accepted date range for GP records; defaults to 1900-01-01 through today.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateBounds {
    pub min: NaiveDate,
    pub max: NaiveDate,
}

impl Default for DateBounds {
    fn default() -> Self {
        DateBounds {
            min: NaiveDate::from_ymd_opt(1900, 1, 1).unwrap(),
            max: chrono::Utc::now().date_naive(),
        }
    }
}

impl DateBounds {
    fn check(
        &self,
        date: NaiveDate,
        path: &Path,
        line: u64,
        field: &str,
    ) -> Result<(), IngestError> {
        if date < self.min || date > self.max {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line,
                reason: format!(
                    "{field} {date} outside accepted range {}..{}",
                    self.min, self.max
                ),
            });
        }
        Ok(())
    }
}

/// A validated longitudinal GP dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GpDataset {
    pub patients: Vec<PatientRecord>,
    pub prescriptions: Vec<PrescriptionEvent>,
    pub events: Vec<ClinicalEvent>,
}

/// Fraction of accepted SRS rows with each optional field absent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Missingness {
    pub age: f64,
    pub gender: f64,
    pub event_date: f64,
    /// Fraction of rows with at least one optional field absent.
    pub any: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SrsDataset {
    pub reports: Vec<SpontaneousReport>,
    pub missingness: Missingness,
    /// Rows dropped for missing or unparseable mandatory content.
    pub rejected_rows: usize,
}

impl SrsDataset {
    pub fn from_reports(reports: Vec<SpontaneousReport>, rejected_rows: usize) -> Self {
        let missingness = summarize_missingness(&reports);
        SrsDataset {
            reports,
            missingness,
            rejected_rows,
        }
    }
}

fn summarize_missingness(reports: &[SpontaneousReport]) -> Missingness {
    if reports.is_empty() {
        return Missingness::default();
    }
    let n = reports.len() as f64;
    let count = |f: &dyn Fn(&SpontaneousReport) -> bool| {
        reports.iter().filter(|r| f(r)).count() as f64 / n
    };
    Missingness {
        age: count(&|r| r.age_years.is_none()),
        gender: count(&|r| r.gender.is_none()),
        event_date: count(&|r| r.event_date.is_none()),
        any: count(&|r| r.has_missing_fields()),
    }
}

/// Loads and cross-validates the three GP files with default date bounds.
///
/// The three files are parsed on independent threads; referential checks run
/// after the join.
pub fn load_gp(
    patients_path: &Path,
    prescriptions_path: &Path,
    events_path: &Path,
) -> Result<GpDataset, IngestError> {
    load_gp_with_bounds(
        patients_path,
        prescriptions_path,
        events_path,
        DateBounds::default(),
    )
}

pub fn load_gp_with_bounds(
    patients_path: &Path,
    prescriptions_path: &Path,
    events_path: &Path,
    bounds: DateBounds,
) -> Result<GpDataset, IngestError> {
    let (patients, prescriptions, events) = std::thread::scope(|scope| {
        let patients = scope.spawn(|| read_patients(patients_path, bounds));
        let prescriptions = scope.spawn(|| read_prescriptions(prescriptions_path, bounds));
        let events = scope.spawn(|| read_events(events_path, bounds));
        (
            patients.join().expect("patient reader panicked"),
            prescriptions.join().expect("prescription reader panicked"),
            events.join().expect("event reader panicked"),
        )
    });
    let dataset = GpDataset {
        patients: patients?,
        prescriptions: prescriptions?,
        events: events?,
    };

    let known: HashSet<&str> = dataset
        .patients
        .iter()
        .map(|p| p.patient_id.as_str())
        .collect();
    check_orphans(
        prescriptions_path,
        dataset.prescriptions.iter().map(|p| p.patient_id.as_str()),
        &known,
    )?;
    check_orphans(
        events_path,
        dataset.events.iter().map(|e| e.patient_id.as_str()),
        &known,
    )?;
    Ok(dataset)
}

fn check_orphans<'a>(
    path: &Path,
    referenced: impl Iterator<Item = &'a str>,
    known: &HashSet<&str>,
) -> Result<(), IngestError> {
    let mut orphans: Vec<String> = referenced
        .filter(|id| !known.contains(id))
        .map(str::to_string)
        .collect();
    if orphans.is_empty() {
        return Ok(());
    }
    orphans.sort();
    orphans.dedup();
    Err(IngestError::OrphanPatients {
        path: path.to_path_buf(),
        ids: orphans,
    })
}

fn open_reader(path: &Path, expected_header: &[&str]) -> Result<csv::Reader<BufReader<File>>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let found = reader
        .headers()
        .map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if found != expected_header {
        return Err(IngestError::Header {
            path: path.to_path_buf(),
            expected: expected_header.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    Ok(reader)
}

fn malformed(path: &Path, line: u64, reason: impl ToString) -> IngestError {
    IngestError::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.to_string(),
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_date(token: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(token.trim(), "%Y-%m-%d")
        .map_err(|_| format!("invalid date {token:?} (expected YYYY-MM-DD)"))
}

fn parse_opt_date(token: &str) -> Result<Option<NaiveDate>, String> {
    if token.trim().is_empty() {
        return Ok(None);
    }
    parse_date(token).map(Some)
}

fn field<'r>(
    record: &'r csv::StringRecord,
    idx: usize,
    path: &Path,
    line: u64,
) -> Result<&'r str, IngestError> {
    record
        .get(idx)
        .ok_or_else(|| malformed(path, line, format!("missing column {}", idx + 1)))
}

fn read_patients(path: &Path, bounds: DateBounds) -> Result<Vec<PatientRecord>, IngestError> {
    let mut reader = open_reader(
        path,
        &["patient_id", "birth_date", "gender", "registration_date", "death_date"],
    )?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record_line(&record);
        let id = field(&record, 0, path, line)?.trim().to_string();
        let birth = parse_opt_date(field(&record, 1, path, line)?)
            .map_err(|e| malformed(path, line, e))?;
        let gender_token = field(&record, 2, path, line)?;
        let gender = Gender::parse_token(gender_token)
            .ok_or_else(|| malformed(path, line, format!("invalid gender {gender_token:?}")))?;
        let registration = parse_opt_date(field(&record, 3, path, line)?)
            .map_err(|e| malformed(path, line, e))?;
        let death = parse_opt_date(field(&record, 4, path, line)?)
            .map_err(|e| malformed(path, line, e))?;
        for (name, date) in [
            ("birth_date", birth),
            ("registration_date", registration),
            ("death_date", death),
        ] {
            if let Some(d) = date {
                bounds.check(d, path, line, name)?;
            }
        }
        if !seen.insert(id.clone()) {
            return Err(malformed(path, line, format!("duplicate patient_id {id:?}")));
        }
        let patient = PatientRecord::new(id, birth, gender, registration, death)
            .map_err(|e| malformed(path, line, e))?;
        out.push(patient);
    }
    Ok(out)
}

fn read_prescriptions(
    path: &Path,
    bounds: DateBounds,
) -> Result<Vec<PrescriptionEvent>, IngestError> {
    let mut reader = open_reader(path, &["patient_id", "drug", "date"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record_line(&record);
        let patient_id = require_id(field(&record, 0, path, line)?, "patient_id", path, line)?;
        let drug = DrugId::new(field(&record, 1, path, line)?)
            .map_err(|e| malformed(path, line, e))?;
        let date =
            parse_date(field(&record, 2, path, line)?).map_err(|e| malformed(path, line, e))?;
        bounds.check(date, path, line, "date")?;
        out.push(PrescriptionEvent {
            patient_id,
            drug,
            date,
        });
    }
    Ok(out)
}

fn read_events(path: &Path, bounds: DateBounds) -> Result<Vec<ClinicalEvent>, IngestError> {
    let mut reader = open_reader(path, &["patient_id", "code", "date"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record_line(&record);
        let patient_id = require_id(field(&record, 0, path, line)?, "patient_id", path, line)?;
        let code = EventCode::parse(field(&record, 1, path, line)?)
            .map_err(|e| malformed(path, line, e))?;
        let date =
            parse_date(field(&record, 2, path, line)?).map_err(|e| malformed(path, line, e))?;
        bounds.check(date, path, line, "date")?;
        out.push(ClinicalEvent {
            patient_id,
            code,
            date,
        });
    }
    Ok(out)
}

fn require_id(
    token: &str,
    name: &'static str,
    path: &Path,
    line: u64,
) -> Result<String, IngestError> {
    let id = token.trim();
    if id.is_empty() {
        return Err(malformed(path, line, format!("empty {name}")));
    }
    Ok(id.to_string())
}

/// Loads an SRS reports file, skipping and counting dirty rows.
pub fn load_srs(path: &Path) -> Result<SrsDataset, IngestError> {
    let mut reader = open_reader(
        path,
        &["report_id", "drug", "event_name", "age", "gender", "event_date"],
    )?;
    let mut reports = Vec::new();
    let mut rejected = 0usize;
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        match parse_srs_row(&record) {
            Some(report) => reports.push(report),
            None => rejected += 1,
        }
    }
    Ok(SrsDataset::from_reports(reports, rejected))
}

/// One SRS row, or `None` when the row is unusable. Mandatory fields
/// (report id, drug, event name) must be present; optional fields may be
/// empty but are rejected when present-yet-unparseable, so that "missing"
/// keeps a single meaning.
fn parse_srs_row(record: &csv::StringRecord) -> Option<SpontaneousReport> {
    let report_id = record.get(0)?.trim();
    let drug = record.get(1)?;
    let event = record.get(2)?;
    let age_token = record.get(3)?.trim();
    let age = if age_token.is_empty() {
        None
    } else {
        Some(age_token.parse::<u32>().ok()?)
    };
    let gender_token = record.get(4)?.trim();
    let gender = if gender_token.is_empty() {
        None
    } else {
        match Gender::parse_token(gender_token)? {
            Gender::Unknown => None,
            g => Some(g),
        }
    };
    let date_token = record.get(5)?.trim();
    let event_date = if date_token.is_empty() {
        None
    } else {
        Some(parse_date(date_token).ok()?)
    };
    SpontaneousReport::new(report_id.to_string(), drug, event, age, gender, event_date).ok()
}

fn opt_date_token(date: &Option<NaiveDate>) -> String {
    date.map(|d| d.format("%Y-%m-%d").to_string())
        .unwrap_or_default()
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IngestError + '_ {
    move |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the three GP CSVs; loading them back yields an equal dataset.
pub fn write_gp(
    dataset: &GpDataset,
    patients_path: &Path,
    prescriptions_path: &Path,
    events_path: &Path,
) -> Result<(), IngestError> {
    let mut w = writer(patients_path)?;
    w.write_record(["patient_id", "birth_date", "gender", "registration_date", "death_date"])
        .map_err(csv_err(patients_path))?;
    for p in &dataset.patients {
        w.write_record([
            p.patient_id.as_str(),
            &opt_date_token(&p.birth_date),
            p.gender.as_csv_token(),
            &opt_date_token(&p.registration_date),
            &opt_date_token(&p.death_date),
        ])
        .map_err(csv_err(patients_path))?;
    }
    finish(w, patients_path)?;

    let mut w = writer(prescriptions_path)?;
    w.write_record(["patient_id", "drug", "date"])
        .map_err(csv_err(prescriptions_path))?;
    for p in &dataset.prescriptions {
        w.write_record([
            p.patient_id.as_str(),
            p.drug.as_str(),
            &p.date.format("%Y-%m-%d").to_string(),
        ])
        .map_err(csv_err(prescriptions_path))?;
    }
    finish(w, prescriptions_path)?;

    let mut w = writer(events_path)?;
    w.write_record(["patient_id", "code", "date"])
        .map_err(csv_err(events_path))?;
    for e in &dataset.events {
        w.write_record([
            e.patient_id.as_str(),
            &e.code.to_string(),
            &e.date.format("%Y-%m-%d").to_string(),
        ])
        .map_err(csv_err(events_path))?;
    }
    finish(w, events_path)
}

pub fn write_srs(dataset: &SrsDataset, path: &Path) -> Result<(), IngestError> {
    let mut w = writer(path)?;
    let io_err = |source: csv::Error| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["report_id", "drug", "event_name", "age", "gender", "event_date"])
        .map_err(io_err)?;
    for r in &dataset.reports {
        w.write_record([
            r.report_id.as_str(),
            r.drug.as_str(),
            r.event_name.as_str(),
            &r.age_years.map(|a| a.to_string()).unwrap_or_default(),
            r.gender.map(|g| g.as_csv_token()).unwrap_or(""),
            &opt_date_token(&r.event_date),
        ])
        .map_err(io_err)?;
    }
    finish(w, path)
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, IngestError> {
    let file = File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), IngestError> {
    let mut inner = w.into_inner().map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    inner.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
