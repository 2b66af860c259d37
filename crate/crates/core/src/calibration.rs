//! Offline calibration of a deferral threshold.

use alloc::string::String;
use alloc::vec::Vec;

use crate::switcher::{deferral_count, SwitcherCurve};
use crate::uncertainty::{ScoreMap, UncertaintyKind};
use crate::{Error, Result};

/// Deferral rule for live traffic: defer whenever `score ≥ threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingPolicy {
    pub kind: UncertaintyKind,
    pub threshold: f64,
    /// Share of the calibration examples the threshold defers.
    pub expected_deferral_fraction: f64,
    /// Identifies the data the threshold was fitted on.
    pub provenance: String,
}

impl RoutingPolicy {
    pub fn new(
        kind: UncertaintyKind,
        threshold: f64,
        expected_deferral_fraction: f64,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::InvalidParameter("policy threshold must be finite".into()));
        }
        if !(0.0..=1.0).contains(&expected_deferral_fraction) {
            return Err(Error::InvalidParameter(alloc::format!(
                "expected deferral fraction {expected_deferral_fraction} outside [0, 1]"
            )));
        }
        Ok(Self {
            kind,
            threshold,
            expected_deferral_fraction,
            provenance: provenance.into(),
        })
    }

    pub fn defers(&self, uncertainty: f64) -> bool {
        uncertainty >= self.threshold
    }
}

/// Next representable f64 above a finite `x`.
fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Smallest score-valued threshold deferring at most `⌈f·N⌉` examples.
///
/// When ties straddle the budget the threshold moves up past the tied
/// block, so the realized fraction is the largest achievable one not above
/// `⌈f·N⌉ / N`. A zero budget yields a threshold just above the maximum.
pub fn threshold_for_fraction(scores: &ScoreMap, fraction: f64) -> Result<RoutingPolicy> {
    if scores.is_empty() {
        return Err(Error::InvalidParameter("cannot calibrate on an empty score map".into()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(alloc::format!(
            "target fraction {fraction} outside [0, 1]"
        )));
    }
    let mut desc: Vec<f64> = scores.iter().map(|(_, s)| s).collect();
    desc.sort_by(|a, b| b.total_cmp(a));
    let n = desc.len();
    let budget = deferral_count(fraction, n);

    // Walk distinct values from the top; after each block `j` = |{s ≥ value}|.
    let mut threshold = next_up(desc[0]);
    let mut deferred = 0;
    let mut i = 0;
    while i < n {
        let value = desc[i];
        let mut j = i;
        while j < n && desc[j] == value {
            j += 1;
        }
        if j > budget {
            break;
        }
        threshold = value;
        deferred = j;
        i = j;
    }
    RoutingPolicy::new(
        scores.kind,
        threshold,
        deferred as f64 / n as f64,
        scores.reference_model_id.clone(),
    )
}

/// Number of calibration examples a policy defers.
pub fn deferred_count(policy: &RoutingPolicy, scores: &ScoreMap) -> usize {
    scores.iter().filter(|(_, s)| policy.defers(*s)).count()
}

/// Smallest grid fraction whose accuracy reaches `target`.
pub fn fraction_for_target_accuracy(curve: &SwitcherCurve, target: f64) -> Option<f64> {
    curve
        .points()
        .find(|&(_, acc)| acc >= target)
        .map(|(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switcher::switcher_curve;
    use crate::switcher::tests::four_example_instance;
    use alloc::collections::BTreeMap;

    fn scores(values: &[f64]) -> ScoreMap {
        let map: BTreeMap<String, f64> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (alloc::format!("x{i}"), *v))
            .collect();
        ScoreMap::new(UncertaintyKind::Margin, "cal", map).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let s = scores(&[0.1, 0.2, 0.3, 0.4]);
        let zero = threshold_for_fraction(&s, 0.0).unwrap();
        assert!(zero.threshold > 0.4);
        assert_eq!(zero.expected_deferral_fraction, 0.0);
        assert_eq!(deferred_count(&zero, &s), 0);

        let all = threshold_for_fraction(&s, 1.0).unwrap();
        assert_eq!(all.threshold, 0.1);
        assert_eq!(all.expected_deferral_fraction, 1.0);

        let half = threshold_for_fraction(&s, 0.5).unwrap();
        assert_eq!(half.threshold, 0.3);
        assert_eq!(deferred_count(&half, &s), 2);
        assert_eq!(half.provenance, "cal");
    }

    #[test]
    fn ties_never_exceed_budget() {
        let s = scores(&[0.4, 0.3, 0.3, 0.1]);
        let p = threshold_for_fraction(&s, 0.5).unwrap();
        assert_eq!(p.threshold, 0.4);
        assert_eq!(p.expected_deferral_fraction, 0.25);
        let tied = scores(&[0.2, 0.2, 0.2]);
        let p = threshold_for_fraction(&tied, 0.5).unwrap();
        assert_eq!(p.expected_deferral_fraction, 0.0);
        assert!(p.threshold > 0.2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let empty = ScoreMap::new(UncertaintyKind::Margin, "e", BTreeMap::new()).unwrap();
        assert!(threshold_for_fraction(&empty, 0.5).is_err());
        assert!(threshold_for_fraction(&scores(&[0.1]), 1.5).is_err());
        assert!(RoutingPolicy::new(UncertaintyKind::Margin, f64::NAN, 0.0, "x").is_err());
    }

    #[test]
    fn next_up_from_zero() {
        let s = scores(&[0.0, 0.0]);
        let p = threshold_for_fraction(&s, 0.0).unwrap();
        assert!(p.threshold > 0.0);
        assert!(!p.defers(0.0));
    }

    #[test]
    fn target_accuracy_examples() {
        let (small, large, sc) = four_example_instance();
        let curve = switcher_curve(&small, &large, &sc, 0.25).unwrap();
        assert_eq!(fraction_for_target_accuracy(&curve, 1.0), Some(0.25));
        assert_eq!(fraction_for_target_accuracy(&curve, 0.75), Some(0.0));
        assert_eq!(fraction_for_target_accuracy(&curve, 0.5), Some(0.0));
        assert_eq!(fraction_for_target_accuracy(&curve, 1.01), None);
    }
}
