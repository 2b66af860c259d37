use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the cascade algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A class distribution has fewer than two classes.
    TooFewClasses(usize),
    /// A probability lies outside `[0, 1]` or is not finite.
    ProbabilityOutOfRange(f64),
    /// Class probabilities do not sum to one.
    NotNormalized(f64),
    /// A token distribution is malformed (too short, unsorted or overweight).
    InvalidTokenDistribution(String),
    /// A sequence output has no tokens.
    EmptySequence,
    DuplicateExampleId(String),
    /// No runs were supplied where at least one is needed.
    NoRuns,
    /// A run has no records.
    EmptyRun(String),
    /// Runs cover different example sets; carries (capped) offending ids.
    Misaligned { ids: Vec<String>, total: usize },
    /// An analysis needs gold labels that are absent.
    MissingGold(String),
    /// The uncertainty kind cannot be computed from the available output.
    KindMismatch { kind: &'static str, reason: &'static str },
    /// A committee is too small for the requested computation.
    CommitteeTooSmall { needed: usize, got: usize },
    /// The reference run also appears in its own committee.
    ReferenceInCommittee(String),
    /// A parameter is outside its valid domain.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TooFewClasses(k) => write!(f, "distribution needs at least 2 classes, got {k}"),
            Error::ProbabilityOutOfRange(p) => write!(f, "probability {p} outside [0, 1]"),
            Error::NotNormalized(s) => write!(f, "distribution not normalized (sum = {s})"),
            Error::InvalidTokenDistribution(why) => write!(f, "invalid token distribution: {why}"),
            Error::EmptySequence => f.write_str("sequence output has no tokens"),
            Error::DuplicateExampleId(id) => write!(f, "duplicate example_id {id:?}"),
            Error::NoRuns => f.write_str("no runs supplied"),
            Error::EmptyRun(id) => write!(f, "run {id:?} has no records"),
            Error::Misaligned { ids, total } => {
                write!(f, "runs cover different example sets ({total} ids differ): ")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(id)?;
                }
                if *total > ids.len() {
                    f.write_str(", ...")?;
                }
                Ok(())
            }
            Error::MissingGold(id) => write!(f, "example {id:?} has no gold label"),
            Error::KindMismatch { kind, reason } => write!(f, "cannot compute {kind}: {reason}"),
            Error::CommitteeTooSmall { needed, got } => {
                write!(f, "need ≥ {needed} runs in committee, got {got}")
            }
            Error::ReferenceInCommittee(id) => {
                write!(f, "reference run {id:?} must not be part of its own committee")
            }
            Error::InvalidParameter(why) => f.write_str(why),
        }
    }
}

impl core::error::Error for Error {}
