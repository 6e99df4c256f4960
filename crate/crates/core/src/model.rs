//! Shared domain types: hierarchical event codes, normalised drug and event
//! identifiers, and the record types of the two database kinds.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

/// Number of symbols in an event code.
pub const CODE_LEN: usize = 5;

/// Padding symbol marking unused trailing positions of an event code.
pub const PAD_SYMBOL: char = '\u{2022}'; // '•'

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("event code {code:?} is longer than {CODE_LEN} symbols")]
    CodeTooLong { code: String },
    #[error("event code {code:?} contains invalid symbol {symbol:?} at position {position}")]
    CodeInvalidSymbol {
        code: String,
        symbol: char,
        position: usize,
    },
    #[error("event code {code:?} starts with the padding symbol (level would be 0)")]
    CodeLeadingPad { code: String },
    #[error("event code {code:?} has a non-padding symbol after a padding symbol at position {position}")]
    CodeInteriorPad { code: String, position: usize },
    #[error("target level {target} out of range for code {code} (level {level})")]
    LevelOutOfRange {
        code: String,
        level: u8,
        target: u8,
    },
    #[error("drug identifier is empty after normalisation")]
    EmptyDrugId,
    #[error("event name is empty after normalisation")]
    EmptyEventName,
    #[error("identifier field {field:?} is empty")]
    EmptyIdentifier { field: &'static str },
    #[error("patient {patient_id}: death date {death} precedes birth date {birth}")]
    DeathBeforeBirth {
        patient_id: String,
        birth: NaiveDate,
        death: NaiveDate,
    },
}

/// A five-symbol hierarchical event code.
///
/// Symbols are drawn from `{0-9, a-z, A-Z}` with `•` padding the tail.
/// The number of leading non-padding symbols is the code's *level* (1-5);
/// a higher level means a more specific event. Truncating a code to a
/// shorter prefix yields its ancestor at that level.
///
/// Codes are canonical by construction: padding only appears as a suffix
/// and the first symbol is never padding. Inputs violating this (for
/// example `A•B••`) are rejected rather than repaired, since the level of
/// such a code is ambiguous and the corruption should surface. Inputs
/// shorter than five symbols are right-padded.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventCode {
    symbols: [char; CODE_LEN],
}

impl EventCode {
    pub fn parse(input: &str) -> Result<Self, ModelError> {
        let mut symbols = [PAD_SYMBOL; CODE_LEN];
        for (i, ch) in input.chars().enumerate() {
            if i >= CODE_LEN {
                return Err(ModelError::CodeTooLong {
                    code: input.to_string(),
                });
            }
            if !(ch.is_ascii_alphanumeric() || ch == PAD_SYMBOL) {
                return Err(ModelError::CodeInvalidSymbol {
                    code: input.to_string(),
                    symbol: ch,
                    position: i + 1,
                });
            }
            symbols[i] = ch;
        }
        if symbols[0] == PAD_SYMBOL {
            return Err(ModelError::CodeLeadingPad {
                code: input.to_string(),
            });
        }
        let mut seen_pad = false;
        for (i, &ch) in symbols.iter().enumerate() {
            if ch == PAD_SYMBOL {
                seen_pad = true;
            } else if seen_pad {
                return Err(ModelError::CodeInteriorPad {
                    code: input.to_string(),
                    position: i + 1,
                });
            }
        }
        Ok(EventCode { symbols })
    }

    /// Depth of the code: the number of leading non-padding symbols, in 1-5.
    pub fn level(&self) -> u8 {
        self.symbols
            .iter()
            .position(|&c| c == PAD_SYMBOL)
            .unwrap_or(CODE_LEN) as u8
    }

    /// The code truncated to `target_level` symbols, padded back to five.
    ///
    /// `target_level` must lie in `1..=self.level()`.
    pub fn ancestor(&self, target_level: u8) -> Result<EventCode, ModelError> {
        if target_level < 1 || target_level > self.level() {
            return Err(ModelError::LevelOutOfRange {
                code: self.to_string(),
                level: self.level(),
                target: target_level,
            });
        }
        Ok(self.truncated(target_level))
    }

    fn truncated(&self, level: u8) -> EventCode {
        let mut symbols = [PAD_SYMBOL; CODE_LEN];
        symbols[..level as usize].copy_from_slice(&self.symbols[..level as usize]);
        EventCode { symbols }
    }

    /// True when `other` is `self` or a more specific version of it.
    pub fn is_ancestor_of(&self, other: &EventCode) -> bool {
        self.level() <= other.level() && other.truncated(self.level()) == *self
    }
}

impl fmt::Display for EventCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ch in self.symbols {
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for EventCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EventCode({self})")
    }
}

impl FromStr for EventCode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventCode::parse(s)
    }
}

/// Normalised drug identifier: trimmed and case-folded.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct DrugId(String);

impl DrugId {
    pub fn new(raw: &str) -> Result<Self, ModelError> {
        let normalised = raw.trim().to_lowercase();
        if normalised.is_empty() {
            return Err(ModelError::EmptyDrugId);
        }
        Ok(DrugId(normalised))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DrugId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for DrugId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DrugId({})", self.0)
    }
}

/// Case-folds and collapses internal whitespace; SRS entries are free text
/// and exact raw-string matching would be brittle.
pub fn normalize_event_name(raw: &str) -> Result<String, ModelError> {
    let normalised = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    if normalised.is_empty() {
        return Err(ModelError::EmptyEventName);
    }
    Ok(normalised)
}

/// An event identity in either database universe: a hierarchical code for GP
/// data or a flat normalised name for SRS data. The two universes are kept
/// separate; keys of different variants never denote the same event.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum EventKey {
    Code(EventCode),
    Name(String),
}

impl EventKey {
    pub fn code(code: EventCode) -> Self {
        EventKey::Code(code)
    }

    pub fn name(raw: &str) -> Result<Self, ModelError> {
        Ok(EventKey::Name(normalize_event_name(raw)?))
    }

    pub fn as_code(&self) -> Option<&EventCode> {
        match self {
            EventKey::Code(c) => Some(c),
            EventKey::Name(_) => None,
        }
    }
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKey::Code(c) => write!(f, "{c}"),
            EventKey::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    /// Parses the CSV token: `M`/`F` case-insensitively, empty meaning unknown.
    pub fn parse_token(token: &str) -> Option<Gender> {
        match token.trim() {
            "" => Some(Gender::Unknown),
            t if t.eq_ignore_ascii_case("m") => Some(Gender::Male),
            t if t.eq_ignore_ascii_case("f") => Some(Gender::Female),
            _ => None,
        }
    }

    pub fn as_csv_token(&self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
            Gender::Unknown => "",
        }
    }
}

/// One registered patient of the GP database.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub birth_date: Option<NaiveDate>,
    pub gender: Gender,
    pub registration_date: Option<NaiveDate>,
    pub death_date: Option<NaiveDate>,
}

impl PatientRecord {
    pub fn new(
        patient_id: String,
        birth_date: Option<NaiveDate>,
        gender: Gender,
        registration_date: Option<NaiveDate>,
        death_date: Option<NaiveDate>,
    ) -> Result<Self, ModelError> {
        if patient_id.trim().is_empty() {
            return Err(ModelError::EmptyIdentifier {
                field: "patient_id",
            });
        }
        if let (Some(birth), Some(death)) = (birth_date, death_date) {
            if death < birth {
                return Err(ModelError::DeathBeforeBirth {
                    patient_id,
                    birth,
                    death,
                });
            }
        }
        Ok(PatientRecord {
            patient_id,
            birth_date,
            gender,
            registration_date,
            death_date,
        })
    }
}

/// A dated prescription; its date is the window origin for association
/// extraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrescriptionEvent {
    pub patient_id: String,
    pub drug: DrugId,
    pub date: NaiveDate,
}

/// A dated coded clinical event from the GP record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClinicalEvent {
    pub patient_id: String,
    pub code: EventCode,
    pub date: NaiveDate,
}

/// One spontaneous report: a directly asserted drug-event pair with
/// optional demographics. Optional fields are routinely absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpontaneousReport {
    pub report_id: String,
    pub drug: DrugId,
    pub event_name: String,
    pub age_years: Option<u32>,
    pub gender: Option<Gender>,
    pub event_date: Option<NaiveDate>,
}

impl SpontaneousReport {
    pub fn new(
        report_id: String,
        drug_raw: &str,
        event_raw: &str,
        age_years: Option<u32>,
        gender: Option<Gender>,
        event_date: Option<NaiveDate>,
    ) -> Result<Self, ModelError> {
        if report_id.trim().is_empty() {
            return Err(ModelError::EmptyIdentifier { field: "report_id" });
        }
        Ok(SpontaneousReport {
            report_id,
            drug: DrugId::new(drug_raw)?,
            event_name: normalize_event_name(event_raw)?,
            age_years,
            gender,
            event_date,
        })
    }

    /// True when any of the optional demographic fields is absent.
    pub fn has_missing_fields(&self) -> bool {
        self.age_years.is_none() || self.gender.is_none() || self.event_date.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> EventCode {
        EventCode::parse(s).unwrap()
    }

    #[test]
    fn level_of_partially_padded_code() {
        assert_eq!(code("AB1a•").level(), 4);
    }

    #[test]
    fn level_of_full_code() {
        assert_eq!(code("ABCDE").level(), 5);
    }

    #[test]
    fn level_of_root_code() {
        assert_eq!(code("A••••").level(), 1);
    }

    #[test]
    fn ancestor_truncates_and_pads() {
        assert_eq!(code("AB1a•").ancestor(3).unwrap(), code("AB1••"));
        assert_eq!(code("AB1a•").ancestor(1).unwrap(), code("A••••"));
    }

    #[test]
    fn ancestor_at_own_level_is_identity() {
        assert_eq!(code("ABCDE").ancestor(5).unwrap(), code("ABCDE"));
        assert_eq!(code("AB1a•").ancestor(4).unwrap(), code("AB1a•"));
    }

    #[test]
    fn ancestor_rejects_out_of_range_levels() {
        assert!(matches!(
            code("AB1••").ancestor(4),
            Err(ModelError::LevelOutOfRange { .. })
        ));
        assert!(matches!(
            code("AB1••").ancestor(0),
            Err(ModelError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn is_ancestor_examples() {
        assert!(code("AB1••").is_ancestor_of(&code("AB1a•")));
        assert!(code("AB1a•").is_ancestor_of(&code("AB1a•")));
        assert!(!code("AC•••").is_ancestor_of(&code("AB1a•")));
        // More specific codes are not ancestors of less specific ones.
        assert!(!code("AB1a•").is_ancestor_of(&code("AB1••")));
    }

    #[test]
    fn short_codes_are_right_padded() {
        assert_eq!(code("AB1"), code("AB1••"));
        assert_eq!(code("AB1").level(), 3);
    }

    #[test]
    fn overlong_code_rejected() {
        assert!(matches!(
            EventCode::parse("ABCDEF"),
            Err(ModelError::CodeTooLong { .. })
        ));
    }

    #[test]
    fn interior_pad_rejected_not_repaired() {
        assert!(matches!(
            EventCode::parse("A•B••"),
            Err(ModelError::CodeInteriorPad { position: 3, .. })
        ));
    }

    #[test]
    fn all_pad_and_empty_codes_rejected() {
        assert!(matches!(
            EventCode::parse("•••••"),
            Err(ModelError::CodeLeadingPad { .. })
        ));
        assert!(matches!(
            EventCode::parse(""),
            Err(ModelError::CodeLeadingPad { .. })
        ));
    }

    #[test]
    fn invalid_symbol_rejected_with_position() {
        assert!(matches!(
            EventCode::parse("AB_c•"),
            Err(ModelError::CodeInvalidSymbol {
                symbol: '_',
                position: 3,
                ..
            })
        ));
    }

    #[test]
    fn drug_id_normalises() {
        let d = DrugId::new("  Amoxicillin ").unwrap();
        assert_eq!(d.as_str(), "amoxicillin");
        assert_eq!(d, DrugId::new("AMOXICILLIN").unwrap());
        assert!(DrugId::new("   ").is_err());
    }

    #[test]
    fn event_name_normalisation_folds_case_and_whitespace() {
        assert_eq!(
            normalize_event_name("  Deep  Vein\tThrombosis ").unwrap(),
            "deep vein thrombosis"
        );
        assert!(normalize_event_name(" \t ").is_err());
    }

    #[test]
    fn death_before_birth_rejected() {
        let birth = NaiveDate::from_ymd_opt(1980, 5, 1).unwrap();
        let death = NaiveDate::from_ymd_opt(1979, 5, 1).unwrap();
        let r = PatientRecord::new(
            "p1".into(),
            Some(birth),
            Gender::Female,
            None,
            Some(death),
        );
        assert!(matches!(r, Err(ModelError::DeathBeforeBirth { .. })));
    }

    #[test]
    fn gender_token_round_trip() {
        assert_eq!(Gender::parse_token("m"), Some(Gender::Male));
        assert_eq!(Gender::parse_token("F"), Some(Gender::Female));
        assert_eq!(Gender::parse_token(""), Some(Gender::Unknown));
        assert_eq!(Gender::parse_token("x"), None);
        assert_eq!(Gender::parse_token(Gender::Unknown.as_csv_token()), Some(Gender::Unknown));
    }
}
