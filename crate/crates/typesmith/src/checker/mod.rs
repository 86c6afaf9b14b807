//! The gradual type-checking oracle behind the feedback function.
//!
//! Two backends share one interface: [`BuiltinChecker`] is a self-contained
//! desk-scale checker for a Python subset, [`ExternalChecker`] adapts any
//! command-line checker that prints line-numbered diagnostics. Both report
//! the number of missing annotations (always computed by our own extraction,
//! never by the backend) and the diagnostic lines.

mod builtin;
mod external;
pub mod types;

pub use builtin::BuiltinChecker;
pub use external::{ExternalChecker, DEFAULT_DIAGNOSTIC_REGEX};
pub use types::{assignable, parse_type, SimpleType};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckerReport {
    /// Unannotated non-trivial slots in the file.
    pub n_missing: u32,
    /// 1-based lines of diagnostics; repeats allowed.
    pub error_lines: Vec<u32>,
    pub checker_id: String,
}

impl CheckerReport {
    pub fn n_errors(&self) -> u32 {
        self.error_lines.len() as u32
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("candidate does not parse (line {line}): {message}")]
    Parse { line: u32, message: String },
    #[error("checker crashed: {0}")]
    Crash(String),
    #[error("checker timed out after {0} seconds")]
    Timeout(u64),
}

/// A gradual type checker usable as the search's feedback oracle.
pub trait Checker: Send + Sync {
    fn check(&self, source: &str) -> Result<CheckerReport, CheckError>;
    fn id(&self) -> &str;
}

/// Count unannotated non-trivial slots by extraction.
pub(crate) fn count_missing(records: &[crate::extract::FunctionRecord]) -> u32 {
    records.iter().map(|r| r.missing_slots().len() as u32).sum()
}
