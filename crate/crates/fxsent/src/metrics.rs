//! Classification evaluation: confusion matrix plus accuracy, precision,
//! recall and F1 (per class and macro-averaged), with abstention accounting.
//!
//! Rejected predictions are counted as abstentions and excluded from the
//! matrix, so accuracy measures quality on the covered subset; `coverage`
//! reports how much was covered.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ClassLabel, Prediction};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("predictions and golds differ in length ({predictions} vs {golds})")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no predictions to evaluate")]
    Empty,
    #[error("confusion matrix has no accepted predictions")]
    EmptyMatrix,
}

/// 3x3 counts indexed (gold, predicted) over the canonical class order,
/// plus the abstention count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
    pub abstentions: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, gold: ClassLabel) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    pub fn column_sum(&self, predicted: ClassLabel) -> u64 {
        (0..3).map(|g| self.counts[g][predicted.index()]).sum()
    }

    pub fn evaluated(&self) -> u64 {
        self.total() + self.abstentions
    }
}

/// Tallies predictions against gold labels. Rejections increment the
/// abstention counter only.
pub fn confusion(
    predictions: &[Prediction],
    golds: &[ClassLabel],
) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = [[0u64; 3]; 3];
    let mut abstentions = 0u64;
    for (prediction, gold) in predictions.iter().zip(golds) {
        match prediction {
            Prediction::Class(label) => counts[gold.index()][label.index()] += 1,
            Prediction::Rejected => abstentions += 1,
        }
    }
    Ok(ConfusionMatrix {
        counts,
        abstentions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Per-class metrics in canonical class order.
    pub per_class: [ClassMetrics; 3],
    /// Fraction of evaluated documents that received a class.
    pub coverage: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Derives the report from a confusion matrix. Zero-denominator precision or
/// recall becomes 0 rather than an error, since small evaluation sets hit
/// empty rows and columns routinely.
pub fn compute_metrics(matrix: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }

    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    }; 3];
    for label in ClassLabel::ALL {
        let k = label.index();
        let tp = matrix.counts[k][k];
        let precision = ratio(tp, matrix.column_sum(label));
        let recall = ratio(tp, matrix.row_sum(label));
        per_class[k] = ClassMetrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
        };
    }

    Ok(MetricsReport {
        accuracy: matrix.trace() as f64 / total as f64,
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / 3.0,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / 3.0,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / 3.0,
        per_class,
        coverage: 1.0 - ratio(matrix.abstentions, matrix.evaluated()),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Aligned text table: macro row first, then one row per class, plus the
    /// coverage line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>8} {:>9} {:>8} {:>8}\n",
            "class", "accuracy", "precision", "recall", "f1"
        ));
        out.push_str(&format!(
            "{:<10} {:>7.0}% {:>9.2} {:>8.2} {:>8.2}\n",
            "macro",
            self.accuracy * 100.0,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1
        ));
        for label in ClassLabel::ALL {
            let m = self.per_class[label.index()];
            out.push_str(&format!(
                "{:<10} {:>8} {:>9.2} {:>8.2} {:>8.2}\n",
                label.as_str(),
                "",
                m.precision,
                m.recall,
                m.f1
            ));
        }
        out.push_str(&format!("coverage   {:.4}\n", self.coverage));
        out
    }
}
