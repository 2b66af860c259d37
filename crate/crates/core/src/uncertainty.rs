//! Per-example uncertainty scores.
//!
//! Every score is oriented so that a higher value means the model is less
//! sure of its prediction, and a one-hot (or fully agreeing) input scores 0.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::model::{check_pair_aligned, ClassDistribution, ModelOutput, ModelRun, RunSet, TokenDistribution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UncertaintyKind {
    /// Probability of the runner-up class.
    Margin,
    /// Shannon entropy (nats) of the class distribution.
    Entropy,
    /// One minus the mean top-two token gap of a decoded sequence.
    SeqMargin,
    /// [`Margin`](Self::Margin) averaged over a committee.
    CommitteeMargin,
    /// [`Entropy`](Self::Entropy) averaged over a committee.
    CommitteeEntropy,
    /// Fraction of committee runs whose prediction differs from the reference.
    Churn,
    /// Fraction of committee run pairs that disagree with each other.
    CommitteeChurn,
}

impl UncertaintyKind {
    pub const ALL: [UncertaintyKind; 7] = [
        UncertaintyKind::Margin,
        UncertaintyKind::Entropy,
        UncertaintyKind::SeqMargin,
        UncertaintyKind::CommitteeMargin,
        UncertaintyKind::CommitteeEntropy,
        UncertaintyKind::Churn,
        UncertaintyKind::CommitteeChurn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UncertaintyKind::Margin => "margin",
            UncertaintyKind::Entropy => "entropy",
            UncertaintyKind::SeqMargin => "seq-margin",
            UncertaintyKind::CommitteeMargin => "committee-margin",
            UncertaintyKind::CommitteeEntropy => "committee-entropy",
            UncertaintyKind::Churn => "churn",
            UncertaintyKind::CommitteeChurn => "committee-churn",
        }
    }

    /// Whether computing this kind needs runs besides the reference.
    pub fn needs_committee(self) -> bool {
        !matches!(
            self,
            UncertaintyKind::Margin | UncertaintyKind::Entropy | UncertaintyKind::SeqMargin
        )
    }

    /// Minimum committee size for this kind.
    pub fn min_committee(self) -> usize {
        match self {
            UncertaintyKind::Margin | UncertaintyKind::Entropy | UncertaintyKind::SeqMargin => 0,
            UncertaintyKind::CommitteeChurn => 2,
            _ => 1,
        }
    }

    /// Committee-averaged counterpart of a single-run kind.
    pub fn committee_variant(self) -> Option<UncertaintyKind> {
        match self {
            UncertaintyKind::Margin => Some(UncertaintyKind::CommitteeMargin),
            UncertaintyKind::Entropy => Some(UncertaintyKind::CommitteeEntropy),
            // Sequence committees reuse the sequence kind name with a committee average.
            UncertaintyKind::SeqMargin => Some(UncertaintyKind::SeqMargin),
            _ => None,
        }
    }

    /// Single-run kind averaged by a committee kind.
    pub fn base_kind(self) -> Option<UncertaintyKind> {
        match self {
            UncertaintyKind::CommitteeMargin => Some(UncertaintyKind::Margin),
            UncertaintyKind::CommitteeEntropy => Some(UncertaintyKind::Entropy),
            _ => None,
        }
    }
}

impl fmt::Display for UncertaintyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UncertaintyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.to_ascii_lowercase().replace('_', "-");
        UncertaintyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == normalized)
            .or(match normalized.as_str() {
                "cmt-margin" => Some(UncertaintyKind::CommitteeMargin),
                "cmt-entropy" => Some(UncertaintyKind::CommitteeEntropy),
                "cmt-churn" => Some(UncertaintyKind::CommitteeChurn),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown uncertainty kind {s:?}")))
    }
}

/// Probability of the second most likely class.
pub fn margin_uncertainty(dist: &ClassDistribution) -> f64 {
    dist.top_two().1
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy_uncertainty(dist: &ClassDistribution) -> f64 {
    let h: f64 = dist
        .probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * libm::log(p))
        .sum();
    // -0.0 for one-hot inputs
    h.max(0.0)
}

/// `1 - mean_t (p1_t - p2_t)` over the decoded tokens.
pub fn seq_margin_uncertainty(tokens: &[TokenDistribution]) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    let total: f64 = tokens.iter().map(TokenDistribution::margin).sum();
    Ok((1.0 - total / tokens.len() as f64).clamp(0.0, 1.0))
}

/// Fraction of `others` that differ from `reference`.
pub fn churn_rate<'a>(reference: &str, others: impl IntoIterator<Item = &'a str>) -> Result<f64> {
    let mut n = 0usize;
    let mut differ = 0usize;
    for other in others {
        n += 1;
        if other != reference {
            differ += 1;
        }
    }
    if n == 0 {
        return Err(Error::CommitteeTooSmall { needed: 1, got: 0 });
    }
    Ok(differ as f64 / n as f64)
}

/// Fraction of unordered pairs in `predictions` that disagree.
pub fn pairwise_disagreement(predictions: &[&str]) -> Result<f64> {
    let r = predictions.len();
    if r < 2 {
        return Err(Error::CommitteeTooSmall { needed: 2, got: r });
    }
    // Count agreeing pairs per distinct label: sum_c C(n_c, 2).
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in predictions {
        *counts.entry(p).or_default() += 1;
    }
    let pairs = r * (r - 1) / 2;
    let agreeing: usize = counts.values().map(|&c| c * (c - 1) / 2).sum();
    Ok((pairs - agreeing) as f64 / pairs as f64)
}

/// Single-run score of one model output.
pub fn output_score(kind: UncertaintyKind, output: &ModelOutput) -> Result<f64> {
    match (kind, output) {
        (UncertaintyKind::Margin, ModelOutput::Class(d)) => Ok(margin_uncertainty(d)),
        (UncertaintyKind::Entropy, ModelOutput::Class(d)) => Ok(entropy_uncertainty(d)),
        (UncertaintyKind::SeqMargin, ModelOutput::Tokens(t)) => seq_margin_uncertainty(t),
        (UncertaintyKind::Margin | UncertaintyKind::Entropy, ModelOutput::Tokens(_)) => {
            Err(Error::KindMismatch {
                kind: kind.as_str(),
                reason: "needs a class distribution; use seq-margin for sequence outputs",
            })
        }
        (UncertaintyKind::SeqMargin, ModelOutput::Class(_)) => Err(Error::KindMismatch {
            kind: kind.as_str(),
            reason: "needs token distributions",
        }),
        _ => Err(Error::KindMismatch {
            kind: kind.as_str(),
            reason: "not a single-run score",
        }),
    }
}

/// Uncertainty scores of one reference run, keyed by example id.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub kind: UncertaintyKind,
    pub reference_model_id: String,
    scores: BTreeMap<String, f64>,
}

impl ScoreMap {
    pub fn new(
        kind: UncertaintyKind,
        reference_model_id: impl Into<String>,
        scores: BTreeMap<String, f64>,
    ) -> Result<Self> {
        for (id, s) in &scores {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "score for {id:?} must be finite and non-negative, got {s}"
                )));
            }
        }
        Ok(Self {
            kind,
            reference_model_id: reference_model_id.into(),
            scores,
        })
    }

    pub fn get(&self, example_id: &str) -> Option<f64> {
        self.scores.get(example_id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores in ascending example_id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Example ids from most to least uncertain; ties by ascending id.
    pub fn most_uncertain_first(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| cmp_desc(a.1, b.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Example ids from least to most uncertain; ties by ascending id.
    pub fn most_certain_first(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Errors unless the score domain equals `run`'s example set.
    pub fn check_covers(&self, run: &ModelRun) -> Result<()> {
        if self.len() == run.len() && self.scores.keys().map(String::as_str).eq(run.example_ids()) {
            return Ok(());
        }
        let mut diff: Vec<String> = run
            .example_ids()
            .filter(|id| !self.scores.contains_key(*id))
            .map(String::from)
            .chain(
                self.scores
                    .keys()
                    .filter(|id| run.get(id).is_none())
                    .cloned(),
            )
            .collect();
        diff.sort();
        Err(Error::Misaligned {
            total: diff.len(),
            ids: diff.into_iter().take(crate::model::MISALIGNED_REPORT_CAP).collect(),
        })
    }
}

fn cmp_desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

/// Scores a single run with a single-run kind.
pub fn score_run(kind: UncertaintyKind, run: &ModelRun) -> Result<ScoreMap> {
    let mut scores = BTreeMap::new();
    for record in run.records() {
        scores.insert(record.example_id.clone(), output_score(kind, &record.output)?);
    }
    ScoreMap::new(kind, run.model_id.clone(), scores)
}

/// Mean of a single-run score across every committee run.
///
/// `kind` is the single-run kind (`Margin`, `Entropy`, `SeqMargin`) or its
/// committee counterpart; the result is tagged with the committee kind.
pub fn committee_average(kind: UncertaintyKind, committee: &RunSet) -> Result<ScoreMap> {
    let base = kind.base_kind().unwrap_or(kind);
    let tagged = base.committee_variant().ok_or(Error::KindMismatch {
        kind: kind.as_str(),
        reason: "committee averaging applies to margin, entropy or seq-margin",
    })?;
    if committee.is_empty() {
        return Err(Error::CommitteeTooSmall { needed: 1, got: 0 });
    }
    let runs = committee.runs();
    let n = runs.len() as f64;
    let mut scores = BTreeMap::new();
    for id in committee.example_ids() {
        let mut total = 0.0;
        for run in runs {
            let record = run.get(id).ok_or_else(|| Error::Misaligned {
                ids: alloc::vec![id.to_string()],
                total: 1,
            })?;
            total += output_score(base, &record.output)?;
        }
        scores.insert(id.to_string(), total / n);
    }
    ScoreMap::new(tagged, runs[0].model_id.clone(), scores)
}

/// Per example, the fraction of committee runs disagreeing with `reference`.
pub fn churn_uncertainty(reference: &ModelRun, committee: &RunSet) -> Result<ScoreMap> {
    if committee.is_empty() {
        return Err(Error::CommitteeTooSmall { needed: 1, got: 0 });
    }
    for member in committee.runs() {
        if member.same_identity(reference) {
            return Err(Error::ReferenceInCommittee(reference.model_id.clone()));
        }
        check_pair_aligned(reference, member)?;
    }
    let mut scores = BTreeMap::new();
    for record in reference.records() {
        let id = record.example_id.as_str();
        let others = committee
            .runs()
            .iter()
            .map(|r| r.get(id).map(|x| x.prediction.as_str()).unwrap_or_default());
        scores.insert(id.to_string(), churn_rate(&record.prediction, others)?);
    }
    ScoreMap::new(UncertaintyKind::Churn, reference.model_id.clone(), scores)
}

/// Per example, the fraction of unordered committee pairs that disagree.
pub fn committee_churn_uncertainty(committee: &RunSet) -> Result<ScoreMap> {
    if committee.len() < 2 {
        return Err(Error::CommitteeTooSmall { needed: 2, got: committee.len() });
    }
    let runs = committee.runs();
    let mut scores = BTreeMap::new();
    let mut preds: Vec<&str> = Vec::with_capacity(runs.len());
    for id in committee.example_ids() {
        preds.clear();
        for run in runs {
            let rec = run.get(id).ok_or_else(|| Error::Misaligned {
                ids: alloc::vec![id.to_string()],
                total: 1,
            })?;
            preds.push(rec.prediction.as_str());
        }
        scores.insert(id.to_string(), pairwise_disagreement(&preds)?);
    }
    ScoreMap::new(UncertaintyKind::CommitteeChurn, runs[0].model_id.clone(), scores)
}

/// Computes `kind` for `reference`, drawing on `committee` when needed.
///
/// For committee-averaged kinds the committee alone is averaged; the
/// reference only fixes the example set.
pub fn compute_scores(
    kind: UncertaintyKind,
    reference: &ModelRun,
    committee: Option<&RunSet>,
) -> Result<ScoreMap> {
    let need = kind.min_committee();
    let got = committee.map_or(0, RunSet::len);
    if got < need {
        return Err(Error::CommitteeTooSmall { needed: need, got });
    }
    let mut scores = match kind {
        UncertaintyKind::Margin | UncertaintyKind::Entropy | UncertaintyKind::SeqMargin => {
            return score_run(kind, reference)
        }
        UncertaintyKind::Churn => return churn_uncertainty(reference, committee.unwrap()),
        UncertaintyKind::CommitteeMargin | UncertaintyKind::CommitteeEntropy => {
            committee_average(kind, committee.unwrap())?
        }
        UncertaintyKind::CommitteeChurn => committee_churn_uncertainty(committee.unwrap())?,
    };
    scores.check_covers(reference)?;
    scores.reference_model_id = reference.model_id.clone();
    Ok(scores)
}
