use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::data::Estimand;

/// Errors produced by design and estimation operations.
///
/// Data-quality problems detected by [`crate::data::validate`] are reported
/// as findings, not errors; the variants here are hard failures of an
/// operation's preconditions or of a solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two aligned sequences had different lengths.
    LengthMismatch { expected: usize, actual: usize },
    /// A treatment group required by the operation is empty.
    EmptyGroup { group: &'static str },
    /// Estimation was requested for a unit without an observed outcome.
    MissingOutcome { unit: usize },
    /// A ratio measure was requested on a non 0/1 outcome.
    NonBinaryOutcome { unit: usize },
    /// A propensity score was outside the open interval (0, 1).
    ScoreOutOfRange { unit: usize, value: f64 },
    /// The design matrix is rank deficient; covariate indices are 0-based
    /// positions in the dataset's covariate list (the intercept is never
    /// reported).
    CollinearColumns { columns: Vec<usize> },
    /// The logistic likelihood is diverging, which indicates (quasi-)
    /// separation of the groups by the covariates.
    PerfectSeparation { coefficient: f64 },
    /// A specification parameter violated its invariant.
    InvalidSpec { reason: String },
    /// No feasible design exists under the requested constraints.
    Infeasible { reason: String },
    /// The method cannot target the requested estimand.
    IncompatibleMethod { estimand: Estimand, method: String },
    /// A group's total weight is zero, so no weighted contrast exists.
    ZeroWeightGroup { group: &'static str },
    /// A denominator required by the estimator is degenerate (zero or a
    /// boundary proportion).
    DegenerateDenominator { reason: String },
    /// A resampling or simulation pipeline failed; the replicate index and
    /// derived seed reproduce the failing dataset.
    PipelineFailure {
        replicate: usize,
        seed: u64,
        source: Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::EmptyGroup { group } => write!(f, "no {group} units"),
            Error::MissingOutcome { unit } => {
                write!(f, "unit {unit} has no observed outcome")
            }
            Error::NonBinaryOutcome { unit } => {
                write!(f, "unit {unit} has a non-binary outcome; ratio measures need 0/1 outcomes")
            }
            Error::ScoreOutOfRange { unit, value } => {
                write!(f, "propensity score {value} of unit {unit} is outside (0, 1)")
            }
            Error::CollinearColumns { columns } => {
                write!(f, "design matrix is rank deficient; collinear covariate columns: {columns:?}")
            }
            Error::PerfectSeparation { coefficient } => {
                write!(
                    f,
                    "perfect separation detected (|coefficient| = {coefficient:.2} > 30); \
                     consider exact stratification on the separating covariate"
                )
            }
            Error::InvalidSpec { reason } => write!(f, "invalid specification: {reason}"),
            Error::Infeasible { reason } => write!(f, "infeasible design: {reason}"),
            Error::IncompatibleMethod { estimand, method } => {
                write!(f, "method `{method}` cannot target the {}", estimand.label())
            }
            Error::ZeroWeightGroup { group } => {
                write!(f, "total weight of the {group} group is zero")
            }
            Error::DegenerateDenominator { reason } => {
                write!(f, "degenerate denominator: {reason}")
            }
            Error::PipelineFailure {
                replicate,
                seed,
                source,
            } => {
                write!(f, "pipeline failed on replicate {replicate} (seed {seed}): {source}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
