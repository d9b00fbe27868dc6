use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square count matrix: rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        check_square(&counts)?;
        if labels.len() != counts.len() {
            return Err(Error::arg(format!(
                "{} labels for a {}x{} confusion matrix",
                labels.len(),
                counts.len(),
                counts.len()
            )));
        }
        Ok(Self { labels, counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.labels != self.labels {
            return Err(Error::arg("cannot merge confusion matrices with different labels"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn accuracy(&self) -> Result<f64> {
        accuracy(&self.counts)
    }

    pub fn f1(&self) -> Result<f64> {
        f1_score(&self.counts)
    }

    pub fn plain_accuracy(&self) -> Result<f64> {
        plain_accuracy(&self.counts)
    }

    /// Row-major CSV with a header of predicted labels and the true label
    /// leading each row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Long-format heatmap data: one `true,predicted,count,fraction` line per
    /// cell, fraction relative to the row total.
    pub fn heatmap_csv(&self) -> String {
        let mut out = String::from("true,predicted,count,fraction\n");
        for (t, row) in self.labels.iter().zip(&self.counts) {
            let total: u64 = row.iter().sum();
            for (p, &c) in self.labels.iter().zip(row) {
                let frac = if total == 0 { 0.0 } else { c as f64 / total as f64 };
                out.push_str(&format!("{t},{p},{c},{frac}\n"));
            }
        }
        out
    }
}

fn check_square(counts: &[Vec<u64>]) -> Result<()> {
    if counts.is_empty() {
        return Err(Error::arg("confusion matrix is empty"));
    }
    let n = counts.len();
    if counts.iter().any(|r| r.len() != n) {
        return Err(Error::arg("confusion matrix is not square"));
    }
    Ok(())
}

/// (TP, TN, FP, FN) of class `c` against the rest.
pub fn one_vs_rest(counts: &[Vec<u64>], c: usize) -> (u64, u64, u64, u64) {
    let total: u64 = counts.iter().flatten().sum();
    let tp = counts[c][c];
    let fn_ = counts[c].iter().sum::<u64>() - tp;
    let fp = counts.iter().map(|r| r[c]).sum::<u64>() - tp;
    (tp, total - tp - fn_ - fp, fp, fn_)
}

/// Macro-averaged one-vs-rest accuracy, (TP + TN) / (TP + TN + FP + FN)
/// per class.
pub fn accuracy(counts: &[Vec<u64>]) -> Result<f64> {
    check_square(counts)?;
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return Err(Error::arg("confusion matrix has no entries"));
    }
    let n = counts.len();
    let sum: f64 = (0..n)
        .map(|c| {
            let (tp, tn, _, _) = one_vs_rest(counts, c);
            (tp + tn) as f64 / total as f64
        })
        .sum();
    Ok(sum / n as f64)
}

/// Macro-averaged one-vs-rest F1, 2TP / (2TP + FP + FN) per class. A class
/// that is never the truth contributes 0.
pub fn f1_score(counts: &[Vec<u64>]) -> Result<f64> {
    check_square(counts)?;
    let n = counts.len();
    let mut sum = 0.0;
    for c in 0..n {
        let (tp, _, fp, fn_) = one_vs_rest(counts, c);
        if tp + fn_ == 0 {
            log::warn!("class {c} has no support; its F1 counts as 0");
            continue;
        }
        sum += (2 * tp) as f64 / (2 * tp + fp + fn_) as f64;
    }
    Ok(sum / n as f64)
}

/// Fraction of all decisions that are correct (trace over total).
pub fn plain_accuracy(counts: &[Vec<u64>]) -> Result<f64> {
    check_square(counts)?;
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return Err(Error::arg("confusion matrix has no entries"));
    }
    let trace: u64 = (0..counts.len()).map(|c| counts[c][c]).sum();
    Ok(trace as f64 / total as f64)
}
