//! Confusion matrices and the accuracy / F1 metrics derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Rows are true classes, columns are predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        for row in &counts {
            ensure_dim("confusion matrix", "columns", n, row.len())?;
        }
        Ok(Self { n_classes: n, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_total(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    /// F1 of one class; 0 whenever precision or recall is 0/0.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let predicted = self.col_total(class) as f64;
        let actual = self.row_total(class) as f64;
        if predicted == 0.0 || actual == 0.0 {
            return 0.0;
        }
        let p = tp / predicted;
        let r = tp / actual;
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            Err(Error::Empty { what: "confusion matrix" })
        } else {
            Ok(())
        }
    }
}

/// Tallies `(label, pred)` pairs.
pub fn confusion(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    ensure_dim("confusion", "predictions", labels.len(), preds.len())?;
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&p, &t) in preds.iter().zip(labels) {
        for v in [p, t] {
            if v >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label: v,
                    classes: n_classes,
                });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.ensure_nonempty()?;
    Ok(cm.trace() as f64 / cm.total() as f64)
}

/// Unweighted mean of the per-class F1 scores.
pub fn f1_macro(cm: &ConfusionMatrix) -> Result<f64> {
    cm.ensure_nonempty()?;
    Ok((0..cm.n_classes).map(|c| cm.f1(c)).sum::<f64>() / cm.n_classes as f64)
}

/// Per-class F1 weighted by each class's share of the true labels.
pub fn f1_weighted(cm: &ConfusionMatrix) -> Result<f64> {
    cm.ensure_nonempty()?;
    let total = cm.total() as f64;
    Ok((0..cm.n_classes)
        .map(|c| cm.row_total(c) as f64 / total * cm.f1(c))
        .sum())
}

/// The JSON metrics record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(cm)?,
            f1_macro: f1_macro(cm)?,
            f1_weighted: f1_weighted(cm)?,
            confusion: cm.counts.clone(),
        })
    }

    pub fn compute(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<Self> {
        Self::from_confusion(&confusion(preds, labels, n_classes)?)
    }
}
