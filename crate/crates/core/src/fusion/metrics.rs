use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::FusionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of the label.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReMetrics {
    pub accuracy: f64,
    /// Unweighted mean of per-label F1 over every label occurring in the
    /// gold or predicted labels.
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub per_label: BTreeMap<String, LabelMetrics>,
    pub count: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores single-label predictions against gold labels.
pub fn score_predictions<S: AsRef<str>>(
    gold: &[S],
    predicted: &[S],
) -> Result<ReMetrics, FusionError> {
    if gold.len() != predicted.len() {
        return Err(FusionError::Shape {
            what: "predictions",
            expected: gold.len(),
            found: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(FusionError::EmptyDocs);
    }
    let labels: BTreeSet<&str> = gold.iter().chain(predicted).map(AsRef::as_ref).collect();
    let mut per_label = BTreeMap::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for &label in &labels {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for (g, p) in gold.iter().zip(predicted) {
            match (g.as_ref() == label, p.as_ref() == label) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        per_label.insert(
            label.to_string(),
            LabelMetrics {
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
                support: tp + fn_,
            },
        );
    }
    let correct = gold
        .iter()
        .zip(predicted)
        .filter(|(g, p)| g.as_ref() == p.as_ref())
        .count();
    Ok(ReMetrics {
        accuracy: ratio(correct, gold.len()),
        macro_f1: per_label.values().map(|m| m.f1).sum::<f64>() / per_label.len() as f64,
        micro_f1: ratio(2 * tp_all, 2 * tp_all + fp_all + fn_all),
        per_label,
        count: gold.len(),
    })
}
