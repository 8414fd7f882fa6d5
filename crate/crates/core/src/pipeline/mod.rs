//! Raw captures to a deduplicated store, and the analyses over it.
//!
//! Stages: [`normalize`] the raw file into structured records, [`verify`]
//! them, emit the re-extraction list for junk captures, [`store`] the ok
//! ones, then [`analysis`] for city filtering and behaviour statistics.

use std::path::PathBuf;

use thiserror::Error;

pub mod analysis;
pub mod normalize;
pub mod records;
pub mod store;
pub mod verify;

pub use analysis::{behavior_summary, filter_by_city, filter_records, BehaviorSummary, DisclosureStats, PostTypeStats};
pub use normalize::{normalize_raw, normalize_raw_with, read_structured, write_structured, Normalized, SkippedRow};
pub use records::{CaptureKey, Disclosure, Field, PostRecord, ProfileRecord};
pub use store::{load_records, InsertOutcome, LoadReport, Store, StoreError, StoreRecord};
pub use verify::{emit_reextract_list, verify, verify_with, Verdict, VerificationPolicy, VerificationReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("input {0} does not exist")]
    MissingInput(PathBuf),
    #[error("{0} has an unexpected header")]
    BadHeader(PathBuf),
    #[error("{path}: bad record on line {line}")]
    BadRecord { path: PathBuf, line: u64 },
    #[error("cannot write {0}: {1}")]
    WriteFailure(PathBuf, String),
    #[error("store failure: {0}")]
    StoreFailure(#[from] StoreError),
    #[error("population is empty")]
    EmptyPopulation,
}

/// Verifies the records and inserts those whose capture is ok.
pub fn load(
    store: &Store,
    profiles: &[ProfileRecord],
    posts: &[PostRecord],
    policy: &VerificationPolicy,
) -> (LoadReport, Vec<VerificationReport>) {
    let reports = verify(profiles, posts, policy);
    let report = load_records(store, profiles, posts, &reports);
    (report, reports)
}
