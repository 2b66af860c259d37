//! Table layouts for every analysis output.

use cascade_core::switcher::{
    BucketProfile, Histogram, HumpReport, PairStats, PercentileTable, QuantileChurnTable, SwitcherCurve,
};
use cascade_core::uncertainty::ScoreMap;

use crate::table::{Cell, Table};

/// `example_id, kind, score` in ascending example_id order.
pub fn scores_table(scores: &ScoreMap) -> Table {
    let mut t = Table::new(["example_id", "kind", "score"]);
    for (id, s) in scores.iter() {
        t.push(vec![id.into(), scores.kind.as_str().into(), s.into()]);
    }
    t
}

pub fn curve_table(curve: &SwitcherCurve) -> Table {
    let mut t = Table::new(["fraction", "accuracy", "small_accuracy", "large_accuracy", "ranking_kind"]);
    for (f, acc) in curve.points() {
        t.push(vec![
            f.into(),
            acc.into(),
            curve.small_accuracy.into(),
            curve.large_accuracy.into(),
            curve.ranking_kind.as_str().into(),
        ]);
    }
    t
}

pub fn hump_table(curve: &SwitcherCurve, hump: &HumpReport) -> Table {
    let mut t = Table::new([
        "ranking_kind",
        "small_accuracy",
        "large_accuracy",
        "peak_fraction",
        "peak_accuracy",
        "hump_size",
    ]);
    t.push(vec![
        curve.ranking_kind.as_str().into(),
        curve.small_accuracy.into(),
        curve.large_accuracy.into(),
        hump.peak_fraction.into(),
        hump.peak_accuracy.into(),
        hump.hump_size.into(),
    ]);
    t
}

pub fn concavity_table(curve: &SwitcherCurve, concavity: f64) -> Table {
    let interior = curve.fractions.iter().filter(|&&f| f > 0.0 && f < 1.0).count();
    let mut t = Table::new([
        "ranking_kind",
        "small_accuracy",
        "large_accuracy",
        "interior_points",
        "average_concavity",
    ]);
    t.push(vec![
        curve.ranking_kind.as_str().into(),
        curve.small_accuracy.into(),
        curve.large_accuracy.into(),
        interior.into(),
        concavity.into(),
    ]);
    t
}

/// Empty subsets leave the fraction columns blank and set `empty` to 1.
pub fn bucket_table(profile: &BucketProfile) -> Table {
    let mut t = Table::new([
        "threshold",
        "direction",
        "n",
        "both_correct",
        "both_wrong",
        "only_large_correct",
        "only_small_correct",
        "empty",
    ]);
    for row in &profile.rows {
        let f = row.fractions;
        t.push(vec![
            row.threshold.into(),
            profile.direction.as_str().into(),
            row.count.into(),
            f.map(|f| f.both_correct).into(),
            f.map(|f| f.both_wrong).into(),
            f.map(|f| f.only_large_correct).into(),
            f.map(|f| f.only_small_correct).into(),
            Cell::Int(i64::from(f.is_none())),
        ]);
    }
    t
}

/// One `accuracy_<model_id>` column per run.
pub fn percentile_table(table: &PercentileTable) -> Table {
    let mut header: Vec<String> = ["bucket", "n", "score_lo", "score_hi"].iter().map(|s| s.to_string()).collect();
    header.extend(table.model_ids.iter().map(|id| format!("accuracy_{id}")));
    let mut t = Table::new(header);
    for row in &table.rows {
        let mut cells: Vec<Cell> = vec![row.bucket.into(), row.count.into(), row.score_lo.into(), row.score_hi.into()];
        cells.extend(row.accuracy.iter().map(|&a| Cell::Real(a)));
        t.push(cells);
    }
    t
}

/// Empty buckets leave churn_mean and churn_se blank.
pub fn churn_table(table: &QuantileChurnTable) -> Table {
    let mut t = Table::new(["bucket", "lo_quantile", "hi_quantile", "n", "churn_mean", "churn_se"]);
    for row in &table.rows {
        t.push(vec![
            format!("Q{}", row.bucket).into(),
            row.lo_quantile.into(),
            row.hi_quantile.into(),
            row.count.into(),
            row.churn.map(|c| c.0).into(),
            row.churn.map(|c| c.1).into(),
        ]);
    }
    t
}

pub fn pairs_table(stats: &[PairStats]) -> Table {
    let mut t = Table::new([
        "small_id",
        "large_id",
        "small_accuracy",
        "large_accuracy",
        "accuracy_gap",
        "disagreement_fraction",
        "hump_size",
        "average_concavity",
    ]);
    for s in stats {
        t.push(vec![
            s.small_id.clone().into(),
            s.large_id.clone().into(),
            s.small_accuracy.into(),
            s.large_accuracy.into(),
            s.accuracy_gap.into(),
            s.disagreement_fraction.into(),
            s.hump_size.into(),
            s.average_concavity.into(),
        ]);
    }
    t
}

pub fn histogram_table(hist: &Histogram) -> Table {
    let mut t = Table::new(["bin_lo", "bin_hi", "count"]);
    for (lo, hi, c) in hist.bins() {
        t.push(vec![lo.into(), hi.into(), c.into()]);
    }
    t
}
