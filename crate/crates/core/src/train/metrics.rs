use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Confusion matrix (rows = truth, columns = prediction) with accuracy and
/// support-weighted precision, recall and F1. Undefined ratios count as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::invalid(
                "metrics",
                "confusion matrix must be square and non-empty",
            ));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::invalid("metrics", "no samples to score"));
        }
        let mut per_class = Vec::with_capacity(k);
        let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            let p = ratio(tp, predicted);
            let r = ratio(tp, support);
            let f = if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            };
            let weight = support as f64 / total as f64;
            precision += weight * p;
            recall += weight * r;
            f1 += weight * f;
            per_class.push(ClassMetrics {
                precision: p,
                recall: r,
                f1: f,
                support,
            });
        }
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        Ok(MetricsReport {
            accuracy: ratio(correct, total),
            precision,
            recall,
            f1,
            per_class,
            confusion,
        })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(
                "metrics",
                format!("{} labels vs {} predictions", truth.len(), predicted.len()),
            ));
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            for label in [t, p] {
                if label >= classes {
                    return Err(Error::Label { label, classes });
                }
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}
