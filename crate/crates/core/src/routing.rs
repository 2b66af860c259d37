//! Per-request deferral decision for a live small → large router.

use alloc::vec::Vec;

use crate::calibration::RoutingPolicy;
use crate::model::ModelOutput;
use crate::uncertainty::{churn_rate, output_score, pairwise_disagreement, UncertaintyKind};
use crate::{Error, Result};

/// What one backend returned for a request.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendOutput {
    pub prediction: alloc::string::String,
    pub output: Option<ModelOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub uncertainty: f64,
    pub deferred: bool,
}

/// Scores the small backend's output under `kind`.
///
/// Committee kinds read `committee` (other retrainings of the small
/// model); churn kinds only need their predictions.
pub fn request_uncertainty(
    kind: UncertaintyKind,
    small: &BackendOutput,
    committee: Option<&[BackendOutput]>,
) -> Result<f64> {
    let members = committee.unwrap_or(&[]);
    if members.len() < kind.min_committee() {
        return Err(Error::CommitteeTooSmall {
            needed: kind.min_committee(),
            got: members.len(),
        });
    }
    match kind {
        UncertaintyKind::Margin | UncertaintyKind::Entropy | UncertaintyKind::SeqMargin => {
            let output = small.output.as_ref().ok_or(Error::KindMismatch {
                kind: kind.as_str(),
                reason: "small backend returned no distribution",
            })?;
            output_score(kind, output)
        }
        UncertaintyKind::CommitteeMargin | UncertaintyKind::CommitteeEntropy => {
            let base = kind.base_kind().expect("committee-averaged kind");
            let mut total = 0.0;
            for member in members {
                let output = member.output.as_ref().ok_or(Error::KindMismatch {
                    kind: kind.as_str(),
                    reason: "committee member returned no distribution",
                })?;
                total += output_score(base, output)?;
            }
            Ok(total / members.len() as f64)
        }
        UncertaintyKind::Churn => {
            churn_rate(&small.prediction, members.iter().map(|m| m.prediction.as_str()))
        }
        UncertaintyKind::CommitteeChurn => {
            let preds: Vec<&str> = members.iter().map(|m| m.prediction.as_str()).collect();
            pairwise_disagreement(&preds)
        }
    }
}

/// Uncertainty of the small output and whether the policy defers it.
pub fn decide(
    policy: &RoutingPolicy,
    small: &BackendOutput,
    committee: Option<&[BackendOutput]>,
) -> Result<Decision> {
    let uncertainty = request_uncertainty(policy.kind, small, committee)?;
    Ok(Decision {
        uncertainty,
        deferred: policy.defers(uncertainty),
    })
}
