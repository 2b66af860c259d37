//! Prediction records, model runs and cross-run alignment.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Tolerance on the total mass of a class distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Number of ids reported in a misalignment error.
pub const MISALIGNED_REPORT_CAP: usize = 20;

fn check_probability(p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(p))
    }
}

/// Softmax scores over `K ≥ 2` classes, optionally with class names.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    probs: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::TooFewClasses(probs.len()));
        }
        for &p in &probs {
            check_probability(p)?;
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self { probs, labels: None })
    }

    pub fn with_labels(probs: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} labels for {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        let mut dist = Self::new(probs)?;
        dist.labels = Some(labels);
        Ok(dist)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// The two largest probabilities, largest first.
    pub fn top_two(&self) -> (f64, f64) {
        let mut first = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for &p in &self.probs {
            if p > first {
                second = first;
                first = p;
            } else if p > second {
                second = p;
            }
        }
        (first, second)
    }
}

/// Top-k truncated distribution for one decoded token, sorted by descending
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    top: Vec<(String, f64)>,
}

impl TokenDistribution {
    pub fn new(top: Vec<(String, f64)>) -> Result<Self> {
        if top.len() < 2 {
            return Err(Error::InvalidTokenDistribution(alloc::format!(
                "need at least 2 entries, got {}",
                top.len()
            )));
        }
        for (_, p) in &top {
            check_probability(*p)?;
        }
        if top.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(Error::InvalidTokenDistribution(
                "probabilities must be non-increasing".to_string(),
            ));
        }
        let sum: f64 = top.iter().map(|(_, p)| p).sum();
        if sum > 1.0 + NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidTokenDistribution(alloc::format!(
                "probabilities sum to {sum} > 1"
            )));
        }
        Ok(Self { top })
    }

    pub fn top(&self) -> &[(String, f64)] {
        &self.top
    }

    /// Gap between the two most likely tokens.
    pub fn margin(&self) -> f64 {
        self.top[0].1 - self.top[1].1
    }
}

/// What a model emitted for one example.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    Class(ClassDistribution),
    Tokens(Vec<TokenDistribution>),
}

/// How predictions are compared against gold answers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AnswerMatch {
    /// Byte-for-byte equality.
    #[default]
    Exact,
    /// Equality after lowercasing, dropping punctuation and the articles
    /// "a", "an", "the", and collapsing whitespace.
    Normalized,
}

impl AnswerMatch {
    pub fn matches(self, prediction: &str, gold: &str) -> bool {
        match self {
            AnswerMatch::Exact => prediction == gold,
            AnswerMatch::Normalized => normalize_answer(prediction) == normalize_answer(gold),
        }
    }
}

/// SQuAD-style answer normalization.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    let mut out = String::with_capacity(stripped.len());
    for word in stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// One model's output on one example.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub example_id: String,
    pub prediction: String,
    pub gold: Option<String>,
    pub output: ModelOutput,
    /// Derived from `prediction` and `gold`; `None` when gold is absent.
    pub correct: Option<bool>,
}

impl PredictionRecord {
    pub fn new(
        example_id: impl Into<String>,
        prediction: impl Into<String>,
        gold: Option<String>,
        output: ModelOutput,
    ) -> Self {
        Self::with_match(example_id, prediction, gold, output, AnswerMatch::Exact)
    }

    pub fn with_match(
        example_id: impl Into<String>,
        prediction: impl Into<String>,
        gold: Option<String>,
        output: ModelOutput,
        rule: AnswerMatch,
    ) -> Self {
        let prediction = prediction.into();
        let correct = gold.as_deref().map(|g| rule.matches(&prediction, g));
        Self {
            example_id: example_id.into(),
            prediction,
            gold,
            output,
            correct,
        }
    }

    pub fn is_correct(&self) -> Result<bool> {
        self.correct
            .ok_or_else(|| Error::MissingGold(self.example_id.clone()))
    }
}

/// Model size bucket of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum SizeTag {
    Small,
    Base,
    Large,
    Xl3b,
    #[default]
    Other,
}

impl SizeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SizeTag::Small => "SMALL",
            SizeTag::Base => "BASE",
            SizeTag::Large => "LARGE",
            SizeTag::Xl3b => "XL3B",
            SizeTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for SizeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SizeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SMALL" => Ok(SizeTag::Small),
            "BASE" => Ok(SizeTag::Base),
            "LARGE" => Ok(SizeTag::Large),
            "XL3B" | "3B" => Ok(SizeTag::Xl3b),
            "OTHER" => Ok(SizeTag::Other),
            _ => Err(Error::InvalidParameter(alloc::format!("unknown size tag {s:?}"))),
        }
    }
}

/// All records of one (model size, retraining index) over a dataset split.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model_id: String,
    pub size_tag: SizeTag,
    pub run_index: u32,
    records: BTreeMap<String, PredictionRecord>,
}

impl ModelRun {
    pub fn new(
        model_id: impl Into<String>,
        size_tag: SizeTag,
        run_index: u32,
        records: impl IntoIterator<Item = PredictionRecord>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for record in records {
            if map.contains_key(&record.example_id) {
                return Err(Error::DuplicateExampleId(record.example_id));
            }
            map.insert(record.example_id.clone(), record);
        }
        Ok(Self {
            model_id: model_id.into(),
            size_tag,
            run_index,
            records: map,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, example_id: &str) -> Option<&PredictionRecord> {
        self.records.get(example_id)
    }

    /// Records in ascending example_id order.
    pub fn records(&self) -> impl ExactSizeIterator<Item = &PredictionRecord> {
        self.records.values()
    }

    pub fn example_ids(&self) -> impl ExactSizeIterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    /// Whether the two runs describe the same trained model.
    pub fn same_identity(&self, other: &ModelRun) -> bool {
        self.model_id == other.model_id && self.run_index == other.run_index
    }

    pub fn accuracy(&self) -> Result<f64> {
        Ok(self.correct_count()? as f64 / self.len() as f64)
    }

    pub fn correct_count(&self) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::EmptyRun(self.model_id.clone()));
        }
        let mut hits = 0;
        for record in self.records() {
            if record.is_correct()? {
                hits += 1;
            }
        }
        Ok(hits)
    }
}

/// Runs over the same example set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    runs: Vec<ModelRun>,
}

impl RunSet {
    pub fn runs(&self) -> &[ModelRun] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of examples every run covers.
    pub fn num_examples(&self) -> usize {
        self.runs[0].len()
    }

    pub fn example_ids(&self) -> impl Iterator<Item = &str> {
        self.runs[0].example_ids()
    }

    pub fn into_runs(self) -> Vec<ModelRun> {
        self.runs
    }
}

/// Checks that `runs` cover identical example sets.
///
/// On mismatch the error lists ids in the symmetric difference (ids present
/// in some runs but not all), sorted and capped at
/// [`MISALIGNED_REPORT_CAP`].
pub fn validate_alignment(runs: Vec<ModelRun>) -> Result<RunSet> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    if let Some(empty) = runs.iter().find(|r| r.is_empty()) {
        return Err(Error::EmptyRun(empty.model_id.clone()));
    }
    let first = &runs[0];
    let aligned = runs[1..].iter().all(|r| {
        r.len() == first.len() && r.example_ids().zip(first.example_ids()).all(|(a, b)| a == b)
    });
    if aligned {
        return Ok(RunSet { runs });
    }
    let mut union: BTreeSet<&str> = BTreeSet::new();
    for run in &runs {
        union.extend(run.example_ids());
    }
    let partial: Vec<&str> = union
        .into_iter()
        .filter(|id| runs.iter().any(|r| r.get(id).is_none()))
        .collect();
    Err(Error::Misaligned {
        total: partial.len(),
        ids: partial
            .into_iter()
            .take(MISALIGNED_REPORT_CAP)
            .map(String::from)
            .collect(),
    })
}

/// Checks that two runs cover the same examples without taking ownership.
pub fn check_pair_aligned(a: &ModelRun, b: &ModelRun) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptyRun(a.model_id.clone()));
    }
    if b.is_empty() {
        return Err(Error::EmptyRun(b.model_id.clone()));
    }
    if a.len() == b.len() && a.example_ids().zip(b.example_ids()).all(|(x, y)| x == y) {
        return Ok(());
    }
    let left: BTreeSet<&str> = a.example_ids().collect();
    let right: BTreeSet<&str> = b.example_ids().collect();
    let diff: Vec<&str> = left.symmetric_difference(&right).copied().collect();
    Err(Error::Misaligned {
        total: diff.len(),
        ids: diff
            .into_iter()
            .take(MISALIGNED_REPORT_CAP)
            .map(String::from)
            .collect(),
    })
}
