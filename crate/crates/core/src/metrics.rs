//! Binary classification metrics with NLOS (label 1) as the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts plus the derived rates for one evaluation.
///
/// Rates whose denominator is zero are reported as 0.0 with the
/// corresponding `*_undefined` flag set, so downstream consumers can tell
/// "genuinely zero" from "no support".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl Metrics {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Score predictions against ground truth. Label 1 (NLOS) is positive.
pub fn compute_metrics(truth: &[u8], predicted: &[u8]) -> Result<Metrics> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
        if t > 1 || p > 1 {
            return Err(Error::Config(format!(
                "labels must be 0 or 1, got truth {t} / predicted {p} at index {i}"
            )));
        }
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            (0, 0) => tn += 1,
            _ => unreachable!(),
        }
    }
    Ok(from_confusion(tp, fp, fn_, tn))
}

/// Derive the rates from explicit confusion counts.
pub fn from_confusion(tp: u64, fp: u64, fn_: u64, tn: u64) -> Metrics {
    let total = (tp + fp + fn_ + tn) as f64;
    let accuracy = if total == 0.0 {
        0.0
    } else {
        (tp + tn) as f64 / total
    };
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (precision, precision_undefined) = ratio(tp, tp + fp);
    let (recall, recall_undefined) = ratio(tp, tp + fn_);
    let f1_den = precision + recall;
    let (f1, f1_undefined) = if precision_undefined || recall_undefined || f1_den == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / f1_den, false)
    };
    Metrics {
        tp,
        fp,
        fn_,
        tn,
        accuracy,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    }
}
