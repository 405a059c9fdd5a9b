use std::fmt;

use serde::Serialize;

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Confusion matrix (rows = gold, columns = predicted) and the derived
/// scores. Ratios with a zero denominator are reported as 0 and listed in
/// `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub confusion: [[usize; 3]; 3],
    pub per_class: [ClassMetrics; 3],
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total: usize,
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn evaluate(predictions: &[ClassLabel], gold: &[ClassLabel]) -> Result<MetricsReport> {
    if predictions.len() != gold.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut confusion = [[0usize; 3]; 3];
    for (p, g) in predictions.iter().zip(gold) {
        confusion[g.code()][p.code()] += 1;
    }
    Ok(MetricsReport::from_confusion(confusion))
}

impl MetricsReport {
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let mut per_class = [ClassMetrics::default(); 3];
        let mut undefined = Vec::new();
        for label in ClassLabel::ALL {
            let c = label.code();
            let tp = confusion[c][c];
            let predicted: usize = (0..3).map(|g| confusion[g][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let precision = ratio(tp, predicted).unwrap_or_else(|| {
                undefined.push(format!("precision({}): no predictions", label));
                0.0
            });
            let recall = ratio(tp, support).unwrap_or_else(|| {
                undefined.push(format!("recall({}): no gold examples", label));
                0.0
            });
            per_class[c] = ClassMetrics {
                precision,
                recall,
                f1: harmonic_mean(precision, recall),
                support,
            };
        }
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
        let weighted_f1 = if total == 0 {
            0.0
        } else {
            per_class
                .iter()
                .map(|m| m.f1 * m.support as f64)
                .sum::<f64>()
                / total as f64
        };
        let trace: usize = (0..3).map(|c| confusion[c][c]).sum();
        MetricsReport {
            confusion,
            per_class,
            macro_p: mean(|m| m.precision),
            macro_r: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            weighted_f1,
            accuracy: ratio(trace, total).unwrap_or(0.0),
            total,
            undefined,
        }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "confusion (rows = gold, cols = predicted)")?;
        writeln!(
            f,
            "{:<12}{:>10}{:>11}{:>10}",
            "", "CLEAN", "OFFENSIVE", "HATE"
        )?;
        for label in ClassLabel::ALL {
            let row = self.confusion[label.code()];
            writeln!(
                f,
                "{:<12}{:>10}{:>11}{:>10}",
                label.name(),
                row[0],
                row[1],
                row[2]
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:<12}{:>10}{:>10}{:>10}{:>10}",
            "class", "precision", "recall", "f1", "support"
        )?;
        for label in ClassLabel::ALL {
            let m = self.per_class[label.code()];
            writeln!(
                f,
                "{:<12}{:>10.4}{:>10.4}{:>10.4}{:>10}",
                label.name(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            )?;
        }
        writeln!(
            f,
            "{:<12}{:>10.4}{:>10.4}{:>10.4}{:>10}",
            "macro", self.macro_p, self.macro_r, self.macro_f1, self.total
        )?;
        writeln!(f, "{:<12}{:>30.4}", "weighted f1", self.weighted_f1)?;
        writeln!(f, "{:<12}{:>30.4}", "accuracy", self.accuracy)?;
        for u in &self.undefined {
            writeln!(f, "warning: {} (reported as 0)", u)?;
        }
        Ok(())
    }
}
