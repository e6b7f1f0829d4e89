//! Micro-averaged multi-label metrics.
//!
//! Per sample and value: a value in both sets is a true positive, in the
//! prediction only a false positive, in the gold set only a false negative.
//! Counts are pooled over all samples and values before dividing. Any ratio
//! with a zero denominator is defined as 0, so a sample with an empty gold
//! set contributes only false positives.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type LabelSets = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        harmonic_mean(self.precision(), self.recall())
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2PR / (P + R)`, or 0 when both are 0.
pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_value: BTreeMap<String, Counts>,
    pub totals: Counts,
}

impl ConfusionCounts {
    pub fn totals_consistent(&self) -> bool {
        let mut sum = Counts::default();
        for c in self.per_value.values() {
            sum.add(*c);
        }
        sum == self.totals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold occurrences.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub per_value: BTreeMap<String, ValueMetrics>,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("text ids differ between gold and predictions: only in gold {only_gold:?}, only predicted {only_predicted:?}")]
    MismatchedIds {
        only_gold: Vec<String>,
        only_predicted: Vec<String>,
    },
}

pub fn compute_micro_metrics(gold: &LabelSets, predicted: &LabelSets) -> Result<Metrics, MetricsError> {
    if gold.len() != predicted.len() || gold.keys().ne(predicted.keys()) {
        return Err(MetricsError::MismatchedIds {
            only_gold: gold.keys().filter(|k| !predicted.contains_key(*k)).cloned().collect(),
            only_predicted: predicted.keys().filter(|k| !gold.contains_key(*k)).cloned().collect(),
        });
    }

    let mut counts = ConfusionCounts::default();
    for (text_id, gold_set) in gold {
        let predicted_set = &predicted[text_id];
        for value in gold_set.union(predicted_set) {
            let entry = counts.per_value.entry(value.clone()).or_default();
            match (gold_set.contains(value), predicted_set.contains(value)) {
                (true, true) => entry.tp += 1,
                (false, true) => entry.fp += 1,
                (true, false) => entry.fn_ += 1,
                (false, false) => unreachable!("value comes from the union"),
            }
        }
    }
    for c in counts.per_value.values() {
        counts.totals.add(*c);
    }

    let per_value = counts
        .per_value
        .iter()
        .map(|(id, c)| {
            let metrics = ValueMetrics {
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
                support: c.tp + c.fn_,
            };
            (id.clone(), metrics)
        })
        .collect();

    Ok(Metrics {
        micro_precision: counts.totals.precision(),
        micro_recall: counts.totals.recall(),
        micro_f1: counts.totals.f1(),
        per_value,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::collection::{btree_set, vec};
    use proptest::prelude::*;

    fn sets(rows: &[(&str, &[&str])]) -> LabelSets {
        rows.iter()
            .map(|(id, vals)| (id.to_string(), vals.iter().map(|v| v.to_string()).collect()))
            .collect()
    }

    #[test]
    fn hand_computed_totals() {
        // TP=2, FP=1, FN=3
        let gold = sets(&[("a", &["X", "Y"]), ("b", &["Z", "W", "V"])]);
        let pred = sets(&[("a", &["X", "Y", "Q"]), ("b", &[])]);
        let m = compute_micro_metrics(&gold, &pred).unwrap();
        assert_eq!(m.counts.totals, Counts { tp: 2, fp: 1, fn_: 3 });
        assert!((m.micro_precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.micro_recall - 0.4).abs() < 1e-15);
        assert!((m.micro_f1 - 0.5).abs() < 1e-15);
        assert!(m.counts.totals_consistent());
        assert_eq!(m.per_value["Z"].support, 1);
    }

    #[test]
    fn perfect_predictions() {
        let gold = sets(&[("a", &["X"]), ("b", &["Y", "Z"])]);
        let m = compute_micro_metrics(&gold, &gold).unwrap();
        assert_eq!((m.micro_precision, m.micro_recall, m.micro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_denominators() {
        let empty = sets(&[("a", &[])]);
        let m = compute_micro_metrics(&empty, &empty).unwrap();
        assert_eq!((m.micro_precision, m.micro_recall, m.micro_f1), (0.0, 0.0, 0.0));
        assert!(m.per_value.is_empty());

        let pred = sets(&[("a", &["X"])]);
        let m = compute_micro_metrics(&empty, &pred).unwrap();
        assert_eq!(m.counts.totals, Counts { tp: 0, fp: 1, fn_: 0 });
        assert_eq!(m.micro_f1, 0.0);
    }

    #[test]
    fn mismatched_ids() {
        let err = compute_micro_metrics(&sets(&[("a", &[]), ("b", &[])]), &sets(&[("a", &[]), ("c", &[])]))
            .unwrap_err();
        assert_eq!(
            err,
            MetricsError::MismatchedIds {
                only_gold: vec!["b".into()],
                only_predicted: vec!["c".into()]
            }
        );
    }

    #[test]
    fn serde_uses_fn_key() {
        let json = serde_json::to_string(&Counts { tp: 1, fp: 2, fn_: 3 }).unwrap();
        assert_eq!(json, r#"{"tp":1,"fp":2,"fn":3}"#);
    }

    fn instance() -> impl Strategy<Value = (LabelSets, LabelSets)> {
        let labels = || btree_set(0u8..8, 0..=8);
        vec((labels(), labels()), 1..=50).prop_map(|rows| {
            let mut gold = LabelSets::new();
            let mut pred = LabelSets::new();
            for (i, (g, p)) in rows.into_iter().enumerate() {
                let name = |v: u8| format!("V{v}");
                gold.insert(format!("t{i}"), g.into_iter().map(name).collect());
                pred.insert(format!("t{i}"), p.into_iter().map(name).collect());
            }
            (gold, pred)
        })
    }

    proptest! {
        #[test]
        fn swapping_sides_swaps_precision_and_recall((gold, pred) in instance()) {
            let a = compute_micro_metrics(&gold, &pred).unwrap();
            let b = compute_micro_metrics(&pred, &gold).unwrap();
            prop_assert_eq!(a.micro_precision, b.micro_recall);
            prop_assert_eq!(a.micro_recall, b.micro_precision);
            prop_assert!((a.micro_f1 - b.micro_f1).abs() < 1e-15);
        }

        #[test]
        fn correct_prediction_never_hurts((gold, mut pred) in instance(), pick in any::<prop::sample::Index>()) {
            let before = compute_micro_metrics(&gold, &pred).unwrap();
            let missed: Vec<(String, String)> = gold
                .iter()
                .flat_map(|(id, g)| g.difference(&pred[id]).map(move |v| (id.clone(), v.clone())))
                .collect();
            prop_assume!(!missed.is_empty());
            let (id, v) = &missed[pick.index(missed.len())];
            pred.get_mut(id).unwrap().insert(v.clone());
            let after = compute_micro_metrics(&gold, &pred).unwrap();
            prop_assert!(after.micro_precision >= before.micro_precision);
            prop_assert!(after.micro_recall >= before.micro_recall);
            prop_assert!(after.micro_f1 >= before.micro_f1);
        }

        #[test]
        fn metrics_bounded_and_totals_consistent((gold, pred) in instance()) {
            let m = compute_micro_metrics(&gold, &pred).unwrap();
            for x in [m.micro_precision, m.micro_recall, m.micro_f1] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            prop_assert!(m.counts.totals_consistent());
            prop_assert!((m.micro_f1 - harmonic_mean(m.micro_precision, m.micro_recall)).abs() < 1e-15);
        }
    }
}
