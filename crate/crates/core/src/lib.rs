//! Detection of suspected adverse drug events in longitudinal general-practice
//! records and spontaneous-report data.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`ingest`] parses the GP and SRS CSV formats into validated datasets.
//! 2. [`windowing`] turns a dataset into drug-event association triples
//!    (events inside a configurable window after a prescription) and answers
//!    2x2 contingency-table queries over them.
//! 3. [`signal`] computes ROR/PRR disproportionality statistics with
//!    confidence intervals and the lower-bound signal criterion.
//! 4. [`eval`] scores a ranking against sets of known adverse events:
//!    set-level confusion counts, ROC curves, full and partial AUC, and
//!    AUC significance comparison.
//! 5. [`synth`] generates seeded synthetic datasets with planted effects and
//!    carries the brute-force oracles used to validate the pipeline.
//!
//! [`model`] holds the domain types shared by all stages, including the
//! five-symbol hierarchical event-code algebra.

pub mod eval;
pub mod ingest;
pub mod model;
pub mod signal;
pub mod synth;
pub mod windowing;

pub use model::{
    ClinicalEvent, DrugId, EventCode, EventKey, Gender, ModelError, PatientRecord,
    PrescriptionEvent, SpontaneousReport,
};
pub use windowing::{AssociationSet, ContingencyTable, WindowConfig};
