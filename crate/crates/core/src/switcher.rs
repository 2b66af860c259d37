//! Switcher-model analyses: the small model keeps its prediction on the
//! least uncertain examples and hands the rest to the large model.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::model::{check_pair_aligned, ModelRun, RunSet};
use crate::uncertainty::{ScoreMap, UncertaintyKind};
use crate::{Error, Result};

/// Default grid step for switcher curves (101 points).
pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Default accuracy-gap window used when relating disagreement to humps.
pub const DEFAULT_GAP_FILTER: (f64, f64) = (0.005, 0.01);

/// Upper quantile of each churn bucket Q1..Q4; Q5 runs to 1.
pub const CHURN_QUANTILES: [f64; 4] = [0.50, 0.75, 0.90, 0.99];

const ROUNDING_SLACK: f64 = 1e-9;

/// `⌈f·n⌉` with the product snapped to the nearest integer when it lies
/// within floating-point noise of one.
pub fn deferral_count(fraction: f64, n: usize) -> usize {
    let x = fraction.clamp(0.0, 1.0) * n as f64;
    let nearest = libm::round(x);
    let k = if (x - nearest).abs() < ROUNDING_SLACK {
        nearest
    } else {
        libm::ceil(x)
    };
    (k as usize).min(n)
}

/// Fractions `0, step, 2·step, …, 1`, always ending exactly at 1.
pub fn fraction_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let inverse = 1.0 / step;
    let whole = libm::round(inverse);
    if (inverse - whole).abs() < 1e-9 * whole.max(1.0) {
        let n = whole as usize;
        return Ok((0..=n).map(|i| i as f64 / n as f64).collect());
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let f = i as f64 * step;
        if f >= 1.0 - ROUNDING_SLACK {
            break;
        }
        grid.push(f);
        i += 1;
    }
    grid.push(1.0);
    Ok(grid)
}

/// Accuracy of the switcher as a function of the deferred fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitcherCurve {
    pub fractions: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub small_accuracy: f64,
    pub large_accuracy: f64,
    pub ranking_kind: UncertaintyKind,
}

impl SwitcherCurve {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.fractions.iter().copied().zip(self.accuracy.iter().copied())
    }
}

/// Per-example correctness of both runs, in ascending example_id order.
struct PairedCorrectness<'a> {
    ids: Vec<&'a str>,
    small: Vec<bool>,
    large: Vec<bool>,
}

fn paired_correctness<'a>(
    small: &'a ModelRun,
    large: &ModelRun,
    scores: &ScoreMap,
) -> Result<PairedCorrectness<'a>> {
    check_pair_aligned(small, large)?;
    scores.check_covers(small)?;
    let mut out = PairedCorrectness {
        ids: Vec::with_capacity(small.len()),
        small: Vec::with_capacity(small.len()),
        large: Vec::with_capacity(small.len()),
    };
    for (s, l) in small.records().zip(large.records()) {
        out.ids.push(s.example_id.as_str());
        out.small.push(s.is_correct()?);
        out.large.push(l.is_correct()?);
    }
    Ok(out)
}

/// Builds the switcher curve of `small` → `large` ranked by `scores`.
///
/// At fraction `f` the `⌈f·N⌉` most uncertain examples (ties by ascending
/// id) take the large run's correctness and the rest keep the small run's.
pub fn switcher_curve(
    small: &ModelRun,
    large: &ModelRun,
    scores: &ScoreMap,
    grid_step: f64,
) -> Result<SwitcherCurve> {
    let fractions = fraction_grid(grid_step)?;
    switcher_curve_on(small, large, scores, fractions)
}

/// [`switcher_curve`] on an explicit ascending grid containing 0 and 1.
pub fn switcher_curve_on(
    small: &ModelRun,
    large: &ModelRun,
    scores: &ScoreMap,
    fractions: Vec<f64>,
) -> Result<SwitcherCurve> {
    let valid = fractions.first() == Some(&0.0)
        && fractions.last() == Some(&1.0)
        && fractions.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(Error::InvalidParameter(
            "fraction grid must ascend strictly from 0 to 1".to_string(),
        ));
    }
    let paired = paired_correctness(small, large, scores)?;
    let n = paired.ids.len();
    let index_of = |id: &str| paired.ids.binary_search(&id).expect("scores cover the run");

    // gain[k] = (#large correct - #small correct) among the k most uncertain.
    let mut gain = vec![0i64; n + 1];
    for (k, (id, _)) in scores.most_uncertain_first().into_iter().enumerate() {
        let i = index_of(id);
        gain[k + 1] = gain[k] + i64::from(paired.large[i]) - i64::from(paired.small[i]);
    }
    let small_hits = paired.small.iter().filter(|&&c| c).count() as i64;
    let large_hits = paired.large.iter().filter(|&&c| c).count() as i64;
    let accuracy = fractions
        .iter()
        .map(|&f| (small_hits + gain[deferral_count(f, n)]) as f64 / n as f64)
        .collect();
    Ok(SwitcherCurve {
        fractions,
        accuracy,
        small_accuracy: small_hits as f64 / n as f64,
        large_accuracy: large_hits as f64 / n as f64,
        ranking_kind: scores.kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumpReport {
    /// Peak accuracy minus the better endpoint; `≤ 0` means no hump.
    pub hump_size: f64,
    pub peak_fraction: f64,
    pub peak_accuracy: f64,
}

pub fn hump(curve: &SwitcherCurve) -> HumpReport {
    let mut peak_fraction = 0.0;
    let mut peak_accuracy = f64::NEG_INFINITY;
    for (f, acc) in curve.points() {
        if acc > peak_accuracy {
            peak_accuracy = acc;
            peak_fraction = f;
        }
    }
    HumpReport {
        hump_size: peak_accuracy - curve.small_accuracy.max(curve.large_accuracy),
        peak_fraction,
        peak_accuracy,
    }
}

/// Expected accuracy when a uniformly random `f` share of examples is
/// deferred.
pub fn random_routing_accuracy(small_accuracy: f64, large_accuracy: f64, fraction: f64) -> f64 {
    small_accuracy + fraction * (large_accuracy - small_accuracy)
}

/// Mean gain of the curve over random routing across interior grid points.
pub fn average_concavity(curve: &SwitcherCurve) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (f, acc) in curve.points() {
        if f > 0.0 && f < 1.0 {
            total += acc - random_routing_accuracy(curve.small_accuracy, curve.large_accuracy, f);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Which side of a threshold a bucket profile keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Direction {
    /// Examples with score ≤ threshold.
    #[default]
    AtMost,
    /// Examples with score ≥ threshold.
    AtLeast,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::AtMost => "at-most",
            Direction::AtLeast => "at-least",
        }
    }

    fn keeps(self, score: f64, threshold: f64) -> bool {
        match self {
            Direction::AtMost => score <= threshold,
            Direction::AtLeast => score >= threshold,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "at-most" => Ok(Direction::AtMost),
            "at-least" => Ok(Direction::AtLeast),
            _ => Err(Error::InvalidParameter(alloc::format!(
                "direction must be at-most or at-least, got {s:?}"
            ))),
        }
    }
}

/// Shares of the four joint-correctness buckets within a subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketFractions {
    pub both_correct: f64,
    pub both_wrong: f64,
    pub only_large_correct: f64,
    pub only_small_correct: f64,
}

impl BucketFractions {
    fn from_counts(counts: [usize; 4]) -> Option<Self> {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return None;
        }
        let n = n as f64;
        Some(Self {
            both_correct: counts[0] as f64 / n,
            both_wrong: counts[1] as f64 / n,
            only_large_correct: counts[2] as f64 / n,
            only_small_correct: counts[3] as f64 / n,
        })
    }

    pub fn total(&self) -> f64 {
        self.both_correct + self.both_wrong + self.only_large_correct + self.only_small_correct
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketRow {
    pub threshold: f64,
    /// Size of the subset kept by the threshold.
    pub count: usize,
    /// `None` flags an empty subset.
    pub fractions: Option<BucketFractions>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketProfile {
    pub direction: Direction,
    pub rows: Vec<BucketRow>,
}

fn bucket_index(small: bool, large: bool) -> usize {
    match (small, large) {
        (true, true) => 0,
        (false, false) => 1,
        (false, true) => 2,
        (true, false) => 3,
    }
}

/// Joint-correctness bucket shares among examples on one side of each
/// threshold.
pub fn bucket_profile(
    small: &ModelRun,
    large: &ModelRun,
    scores: &ScoreMap,
    thresholds: &[f64],
    direction: Direction,
) -> Result<BucketProfile> {
    let paired = paired_correctness(small, large, scores)?;
    let per_example: Vec<(f64, usize)> = paired
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let score = scores.get(id).expect("scores cover the run");
            (score, bucket_index(paired.small[i], paired.large[i]))
        })
        .collect();
    let rows = thresholds
        .iter()
        .map(|&t| {
            let mut counts = [0usize; 4];
            for &(score, bucket) in &per_example {
                if direction.keeps(score, t) {
                    counts[bucket] += 1;
                }
            }
            BucketRow {
                threshold: t,
                count: counts.iter().sum(),
                fractions: BucketFractions::from_counts(counts),
            }
        })
        .collect();
    Ok(BucketProfile { direction, rows })
}

/// Sizes of `buckets` near-equal groups over `n` items; the first
/// `n % buckets` groups get one extra item.
pub fn equal_count_sizes(n: usize, buckets: usize) -> Vec<usize> {
    let base = n / buckets;
    let extra = n % buckets;
    (0..buckets).map(|b| base + usize::from(b < extra)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileRow {
    pub bucket: usize,
    pub count: usize,
    pub score_lo: f64,
    pub score_hi: f64,
    /// Mean correctness per run, in the order the runs were given.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileTable {
    pub model_ids: Vec<String>,
    pub rows: Vec<PercentileRow>,
}

/// Per-run accuracy within equal-count buckets of ascending uncertainty.
pub fn percentile_accuracy(
    runs: &[ModelRun],
    ranking: &ScoreMap,
    buckets: usize,
) -> Result<PercentileTable> {
    let first = runs.first().ok_or(Error::NoRuns)?;
    for run in runs {
        check_pair_aligned(first, run)?;
    }
    ranking.check_covers(first)?;
    let n = first.len();
    if buckets == 0 || buckets > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "bucket count must lie in 1..={n}, got {buckets}"
        )));
    }
    let order = ranking.most_certain_first();
    let mut rows = Vec::with_capacity(buckets);
    let mut start = 0;
    for (b, size) in equal_count_sizes(n, buckets).into_iter().enumerate() {
        let slice = &order[start..start + size];
        let mut accuracy = Vec::with_capacity(runs.len());
        for run in runs {
            let mut hits = 0usize;
            for (id, _) in slice {
                let record = run.get(id).expect("aligned runs");
                hits += usize::from(record.is_correct()?);
            }
            accuracy.push(hits as f64 / size as f64);
        }
        rows.push(PercentileRow {
            bucket: b + 1,
            count: size,
            score_lo: slice[0].1,
            score_hi: slice[size - 1].1,
            accuracy,
        });
        start += size;
    }
    Ok(PercentileTable {
        model_ids: runs.iter().map(|r| r.model_id.clone()).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileChurnRow {
    /// 1-based bucket number (Q1 = most certain half).
    pub bucket: usize,
    pub lo_quantile: f64,
    pub hi_quantile: f64,
    pub count: usize,
    /// Churn mean and standard error; `None` flags an empty bucket.
    pub churn: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileChurnTable {
    pub num_pairs: usize,
    pub rows: Vec<QuantileChurnRow>,
}

/// Positions in ascending-uncertainty order where each churn bucket ends.
pub fn quantile_cuts(n: usize) -> [usize; 4] {
    CHURN_QUANTILES.map(|q| {
        let x = q * n as f64;
        let nearest = libm::round(x);
        if (x - nearest).abs() < ROUNDING_SLACK {
            nearest as usize
        } else {
            libm::floor(x) as usize
        }
    })
}

/// Retraining churn of `target` within uncertainty-quantile buckets of
/// `ranking`.
///
/// The churn mean pools every (run pair, example) observation in a bucket;
/// the standard error is taken across the per-pair means (zero with a
/// single pair).
pub fn churn_by_quantile(target: &RunSet, ranking: &ScoreMap) -> Result<QuantileChurnTable> {
    let r = target.len();
    if r < 2 {
        return Err(Error::CommitteeTooSmall { needed: 2, got: r });
    }
    let runs = target.runs();
    ranking.check_covers(&runs[0])?;
    let n = runs[0].len();
    let order = ranking.most_certain_first();
    let cuts = quantile_cuts(n);
    let bounds = [0, cuts[0], cuts[1], cuts[2], cuts[3], n];
    let edges = [0.0, CHURN_QUANTILES[0], CHURN_QUANTILES[1], CHURN_QUANTILES[2], CHURN_QUANTILES[3], 1.0];
    let num_pairs = r * (r - 1) / 2;
    let mut rows = Vec::with_capacity(5);
    for b in 0..5 {
        let slice = &order[bounds[b]..bounds[b + 1]];
        let count = slice.len();
        let churn = if count == 0 {
            None
        } else {
            let mut pair_means = Vec::with_capacity(num_pairs);
            for i in 0..r {
                for j in (i + 1)..r {
                    let differ = slice
                        .iter()
                        .filter(|(id, _)| {
                            let a = runs[i].get(id).expect("aligned runs");
                            let b = runs[j].get(id).expect("aligned runs");
                            a.prediction != b.prediction
                        })
                        .count();
                    pair_means.push(differ as f64 / count as f64);
                }
            }
            Some(mean_and_standard_error(&pair_means))
        };
        rows.push(QuantileChurnRow {
            bucket: b + 1,
            lo_quantile: edges[b],
            hi_quantile: edges[b + 1],
            count,
            churn,
        });
    }
    Ok(QuantileChurnTable { num_pairs, rows })
}

/// Sample mean and standard error of the mean; the error is 0 for fewer
/// than two values.
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub small_id: String,
    pub large_id: String,
    pub small_accuracy: f64,
    pub large_accuracy: f64,
    pub accuracy_gap: f64,
    pub disagreement_fraction: f64,
    pub hump_size: f64,
    pub average_concavity: f64,
}

/// Share of examples on which two aligned runs predict differently.
pub fn disagreement_fraction(a: &ModelRun, b: &ModelRun) -> Result<f64> {
    check_pair_aligned(a, b)?;
    let differ = a
        .records()
        .zip(b.records())
        .filter(|(x, y)| x.prediction != y.prediction)
        .count();
    Ok(differ as f64 / a.len() as f64)
}

/// Accuracy gap, disagreement and hump of a (small, large) pair; `None`
/// when `gap_filter` is given and the gap falls outside it (inclusive).
pub fn pair_stats(
    small: &ModelRun,
    large: &ModelRun,
    curve: &SwitcherCurve,
    gap_filter: Option<(f64, f64)>,
) -> Result<Option<PairStats>> {
    let small_accuracy = small.accuracy()?;
    let large_accuracy = large.accuracy()?;
    let accuracy_gap = (large_accuracy - small_accuracy).abs();
    if let Some((lo, hi)) = gap_filter {
        if accuracy_gap < lo || accuracy_gap > hi {
            return Ok(None);
        }
    }
    Ok(Some(PairStats {
        small_id: small.model_id.clone(),
        large_id: large.model_id.clone(),
        small_accuracy,
        large_accuracy,
        accuracy_gap,
        disagreement_fraction: disagreement_fraction(small, large)?,
        hump_size: hump(curve).hump_size,
        average_concavity: average_concavity(curve),
    }))
}

/// Joint-correctness subset used by the uncertainty histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectnessBucket {
    SmallCorrect,
    SmallWrong,
    OnlyPartnerCorrect,
    BothWrong,
}

impl CorrectnessBucket {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrectnessBucket::SmallCorrect => "small-correct",
            CorrectnessBucket::SmallWrong => "small-wrong",
            CorrectnessBucket::OnlyPartnerCorrect => "only-partner-correct",
            CorrectnessBucket::BothWrong => "both-wrong",
        }
    }

    fn contains(self, run_correct: bool, partner_correct: bool) -> bool {
        match self {
            CorrectnessBucket::SmallCorrect => run_correct,
            CorrectnessBucket::SmallWrong => !run_correct,
            CorrectnessBucket::OnlyPartnerCorrect => !run_correct && partner_correct,
            CorrectnessBucket::BothWrong => !run_correct && !partner_correct,
        }
    }
}

impl FromStr for CorrectnessBucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "small-correct" => Ok(CorrectnessBucket::SmallCorrect),
            "small-wrong" => Ok(CorrectnessBucket::SmallWrong),
            "only-partner-correct" | "only-large-correct" => Ok(CorrectnessBucket::OnlyPartnerCorrect),
            "both-wrong" => Ok(CorrectnessBucket::BothWrong),
            _ => Err(Error::InvalidParameter(alloc::format!("unknown correctness bucket {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Selected examples scoring below the first edge.
    pub below: usize,
    /// Selected examples scoring above the last edge.
    pub above: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.edges
            .windows(2)
            .zip(self.counts.iter())
            .map(|(w, &c)| (w[0], w[1], c))
    }
}

/// `bins + 1` edges spaced evenly in log10 between `lo` and `hi`.
pub fn log_spaced_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && bins >= 1 && hi.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "log-spaced edges need 0 < lo < hi and at least one bin (lo={lo}, hi={hi}, bins={bins})"
        )));
    }
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| libm::pow(10.0, a + (b - a) * i as f64 / bins as f64))
        .collect();
    edges[0] = lo;
    edges[bins] = hi;
    Ok(edges)
}

/// Score histogram of the examples in one joint-correctness bucket.
///
/// Bins are `[lo, hi)` except the last, which is closed.
pub fn uncertainty_histogram(
    run: &ModelRun,
    partner: &ModelRun,
    scores: &ScoreMap,
    bucket: CorrectnessBucket,
    edges: &[f64],
) -> Result<Histogram> {
    if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "histogram edges must be finite, strictly increasing, and at least 2".to_string(),
        ));
    }
    let paired = paired_correctness(run, partner, scores)?;
    let bins = edges.len() - 1;
    let mut hist = Histogram {
        edges: edges.to_vec(),
        counts: vec![0; bins],
        below: 0,
        above: 0,
    };
    for (i, id) in paired.ids.iter().enumerate() {
        if !bucket.contains(paired.small[i], paired.large[i]) {
            continue;
        }
        let s = scores.get(id).expect("scores cover the run");
        if s < edges[0] {
            hist.below += 1;
        } else if s > edges[bins] {
            hist.above += 1;
        } else {
            // First edge strictly greater than s, minus one; the top edge
            // belongs to the last bin.
            let idx = edges.partition_point(|&e| e <= s).saturating_sub(1).min(bins - 1);
            hist.counts[idx] += 1;
        }
    }
    Ok(hist)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::fixtures::run;
    use crate::model::validate_alignment;
    use alloc::collections::BTreeMap;

    /// N=4: small right on a,b,c; large right on b,c,d; scores d > c > b > a.
    pub fn four_example_instance() -> (ModelRun, ModelRun, ScoreMap) {
        let small = run(
            "small",
            0,
            &[("a", "1", Some("1")), ("b", "1", Some("1")), ("c", "1", Some("1")), ("d", "0", Some("1"))],
        );
        let large = run(
            "large",
            0,
            &[("a", "0", Some("1")), ("b", "1", Some("1")), ("c", "1", Some("1")), ("d", "1", Some("1"))],
        );
        let scores: BTreeMap<String, f64> =
            [("a", 0.1), ("b", 0.2), ("c", 0.3), ("d", 0.4)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        (small, large, ScoreMap::new(UncertaintyKind::Margin, "small", scores).unwrap())
    }

    #[test]
    fn deferral_count_snaps_float_noise() {
        assert_eq!(deferral_count(0.07, 100), 7);
        assert_eq!(deferral_count(0.29, 100), 29);
        assert_eq!(deferral_count(0.0, 10), 0);
        assert_eq!(deferral_count(1.0, 10), 10);
        assert_eq!(deferral_count(0.01, 3), 1);
        assert_eq!(deferral_count(0.5, 3), 2);
        for n in 1..200usize {
            for i in 0..=100usize {
                assert_eq!(deferral_count(i as f64 / 100.0, n), (i * n).div_ceil(100), "i={i} n={n}");
            }
        }
    }

    #[test]
    fn grid_shapes() {
        let g = fraction_grid(0.01).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!((g[0], g[100]), (0.0, 1.0));
        assert_eq!(fraction_grid(0.25).unwrap(), [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(fraction_grid(1.0).unwrap(), [0.0, 1.0]);
        let odd = fraction_grid(0.3).unwrap();
        assert_eq!(odd.len(), 5);
        assert_eq!(*odd.last().unwrap(), 1.0);
        assert!(fraction_grid(0.0).is_err());
        assert!(fraction_grid(1.5).is_err());
    }

    #[test]
    fn four_example_curve() {
        let (small, large, scores) = four_example_instance();
        let curve = switcher_curve(&small, &large, &scores, 0.25).unwrap();
        assert_eq!(curve.accuracy, [0.75, 1.0, 1.0, 1.0, 0.75]);
        assert_eq!(curve.small_accuracy, 0.75);
        assert_eq!(curve.large_accuracy, 0.75);

        let h = hump(&curve);
        assert_eq!(h.hump_size, 0.25);
        assert_eq!(h.peak_fraction, 0.25);
        assert_eq!(average_concavity(&curve), 0.25);
    }

    #[test]
    fn identical_runs_give_flat_curve() {
        let (small, _, scores) = four_example_instance();
        let curve = switcher_curve(&small, &small, &scores, 0.01).unwrap();
        assert!(curve.accuracy.iter().all(|&a| a == 0.75));
        let h = hump(&curve);
        assert_eq!((h.hump_size, h.peak_fraction), (0.0, 0.0));
        assert_eq!(average_concavity(&curve), 0.0);
    }

    #[test]
    fn monotone_curve_peaks_at_end() {
        let curve = SwitcherCurve {
            fractions: vec![0.0, 0.5, 1.0],
            accuracy: vec![0.6, 0.7, 0.8],
            small_accuracy: 0.6,
            large_accuracy: 0.8,
            ranking_kind: UncertaintyKind::Margin,
        };
        let h = hump(&curve);
        assert_eq!((h.hump_size, h.peak_fraction), (0.0, 1.0));
        // Exactly the chord.
        assert!(average_concavity(&curve).abs() < 1e-15);
    }

    #[test]
    fn curve_requires_gold() {
        let small = run("s", 0, &[("a", "1", None)]);
        let scores = crate::uncertainty::score_run(UncertaintyKind::Margin, &small).unwrap();
        assert!(matches!(
            switcher_curve(&small, &small, &scores, 0.5),
            Err(Error::MissingGold(_))
        ));
    }

    #[test]
    fn curve_rejects_misaligned() {
        let (small, _, scores) = four_example_instance();
        let other = run("l", 0, &[("a", "1", Some("1"))]);
        assert!(matches!(
            switcher_curve(&small, &other, &scores, 0.5),
            Err(Error::Misaligned { .. })
        ));
    }

    #[test]
    fn bucket_profile_examples() {
        let (small, large, scores) = four_example_instance();
        let p = bucket_profile(&small, &large, &scores, &[1.0, 0.05], Direction::AtMost).unwrap();
        let all = p.rows[0].fractions.unwrap();
        assert_eq!(p.rows[0].count, 4);
        assert_eq!(
            (all.both_correct, all.both_wrong, all.only_large_correct, all.only_small_correct),
            (0.5, 0.0, 0.25, 0.25)
        );
        assert_eq!(p.rows[1].count, 0);
        assert!(p.rows[1].fractions.is_none());

        let p = bucket_profile(&small, &large, &scores, &[0.3], Direction::AtLeast).unwrap();
        let f = p.rows[0].fractions.unwrap();
        assert_eq!(p.rows[0].count, 2);
        assert_eq!((f.both_correct, f.only_large_correct), (0.5, 0.5));
    }

    #[test]
    fn equal_count_remainder() {
        assert_eq!(equal_count_sizes(10, 3), [4, 3, 3]);
        assert_eq!(equal_count_sizes(100, 100), [1; 100]);
    }

    #[test]
    fn percentile_constant_ranking_uses_ids() {
        let (small, large, _) = four_example_instance();
        let flat: BTreeMap<String, f64> = ["a", "b", "c", "d"].iter().map(|k| (k.to_string(), 0.5)).collect();
        let ranking = ScoreMap::new(UncertaintyKind::Margin, "small", flat).unwrap();
        let t = percentile_accuracy(&[small, large], &ranking, 4).unwrap();
        // Buckets follow a, b, c, d.
        let small_acc: Vec<f64> = t.rows.iter().map(|r| r.accuracy[0]).collect();
        let large_acc: Vec<f64> = t.rows.iter().map(|r| r.accuracy[1]).collect();
        assert_eq!(small_acc, [1.0, 1.0, 1.0, 0.0]);
        assert_eq!(large_acc, [0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn percentile_rejects_too_many_buckets() {
        let (small, _, scores) = four_example_instance();
        assert!(percentile_accuracy(&[small.clone()], &scores, 5).is_err());
        assert!(percentile_accuracy(&[small], &scores, 0).is_err());
    }

    #[test]
    fn quantile_cut_positions() {
        assert_eq!(quantile_cuts(1000), [500, 750, 900, 990]);
        assert_eq!(quantile_cuts(100), [50, 75, 90, 99]);
        assert_eq!(quantile_cuts(10), [5, 7, 9, 9]);
    }

    #[test]
    fn churn_table_three_runs() {
        let ids: Vec<String> = (0..100).map(|i| alloc::format!("e{i:03}")).collect();
        let mk = |idx: u32, pred: &str| {
            let rows: Vec<(&str, &str, Option<&str>)> = ids.iter().map(|id| (id.as_str(), pred, None)).collect();
            run("big", idx, &rows)
        };
        let set = validate_alignment(vec![mk(0, "A"), mk(1, "A"), mk(2, "B")]).unwrap();
        let ranking = crate::uncertainty::score_run(UncertaintyKind::Margin, &set.runs()[0]).unwrap();
        let t = churn_by_quantile(&set, &ranking).unwrap();
        assert_eq!(t.num_pairs, 3);
        for row in &t.rows {
            let (mean, _) = row.churn.unwrap();
            assert!((mean - 2.0 / 3.0).abs() < 1e-15);
        }
        let single = validate_alignment(vec![mk(0, "A")]).unwrap();
        assert!(churn_by_quantile(&single, &ranking).is_err());
    }

    #[test]
    fn churn_table_flags_empty_bucket() {
        let ids: Vec<String> = (0..10).map(|i| alloc::format!("e{i}")).collect();
        let rows: Vec<(&str, &str, Option<&str>)> = ids.iter().map(|id| (id.as_str(), "A", None)).collect();
        let set = validate_alignment(vec![run("x", 0, &rows), run("x", 1, &rows)]).unwrap();
        let ranking = crate::uncertainty::score_run(UncertaintyKind::Margin, &set.runs()[0]).unwrap();
        let t = churn_by_quantile(&set, &ranking).unwrap();
        // 10 examples: Q4 spans positions 9..9.
        assert_eq!(t.rows[3].count, 0);
        assert!(t.rows[3].churn.is_none());
        assert_eq!(t.rows[4].count, 1);
    }

    #[test]
    fn pair_stats_examples() {
        let (small, large, scores) = four_example_instance();
        let curve = switcher_curve(&small, &large, &scores, 0.25).unwrap();
        let s = pair_stats(&small, &large, &curve, None).unwrap().unwrap();
        assert_eq!(s.accuracy_gap, 0.0);
        assert_eq!(s.disagreement_fraction, 0.5);
        assert_eq!(s.hump_size, 0.25);
        assert!(pair_stats(&small, &large, &curve, Some(DEFAULT_GAP_FILTER)).unwrap().is_none());

        let flat = switcher_curve(&small, &small, &scores, 0.25).unwrap();
        let same = pair_stats(&small, &small, &flat, None).unwrap().unwrap();
        assert_eq!((same.accuracy_gap, same.disagreement_fraction, same.hump_size), (0.0, 0.0, 0.0));
    }

    #[test]
    fn histogram_examples() {
        let (small, large, scores) = four_example_instance();
        let edges = [0.0, 0.2, 0.4];
        let h = uncertainty_histogram(&small, &large, &scores, CorrectnessBucket::OnlyPartnerCorrect, &edges).unwrap();
        assert_eq!(h.total(), 1);
        // d scores 0.4 and lands in the closed last bin.
        assert_eq!(h.counts, [0, 1]);

        let h = uncertainty_histogram(&small, &large, &scores, CorrectnessBucket::SmallCorrect, &edges).unwrap();
        assert_eq!(h.counts, [1, 2]);

        let h = uncertainty_histogram(&small, &small, &scores, CorrectnessBucket::OnlyPartnerCorrect, &edges).unwrap();
        assert_eq!(h.total(), 0);

        assert!(uncertainty_histogram(&small, &large, &scores, CorrectnessBucket::SmallCorrect, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn log_edges() {
        let e = log_spaced_edges(1e-4, 1.0, 4).unwrap();
        assert_eq!(e.len(), 5);
        assert!((e[1] - 1e-3).abs() < 1e-15);
        assert!(log_spaced_edges(0.0, 1.0, 4).is_err());
    }
}
