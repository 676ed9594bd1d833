//! Macro-averaged classification metrics and replicate aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion matrix must be square and nonempty"));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid("truth and prediction lengths differ"));
        }
        let mut counts = vec![vec![0u64; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::invalid(format!("label out of range for {classes} classes")));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn require_populated(&self) -> Result<()> {
        match self.counts.iter().position(|r| r.iter().sum::<u64>() == 0) {
            Some(y) => Err(Error::EmptyClass(y)),
            None => Ok(()),
        }
    }

    /// Per-class recall; requires every true class to be present.
    pub fn recalls(&self) -> Result<Vec<f64>> {
        self.require_populated()?;
        Ok(self
            .counts
            .iter()
            .enumerate()
            .map(|(y, row)| row[y] as f64 / row.iter().sum::<u64>() as f64)
            .collect())
    }

    /// Per-class precision; a never-predicted class has precision 0.
    pub fn precisions(&self) -> Vec<f64> {
        (0..self.classes())
            .map(|y| {
                let col: u64 = self.counts.iter().map(|r| r[y]).sum();
                if col == 0 {
                    0.0
                } else {
                    self.counts[y][y] as f64 / col as f64
                }
            })
            .collect()
    }
}

/// Mean per-class recall.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let r = cm.recalls()?;
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

/// Mean per-class F1; classes with `P + R = 0` contribute 0.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    let r = cm.recalls()?;
    let p = cm.precisions();
    let sum: f64 = p
        .iter()
        .zip(&r)
        .map(|(&p, &r)| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
        .sum();
    Ok(sum / r.len() as f64)
}

/// Average precision of `scores` for `positives`: `Σ (R_n − R_{n−1})·P_n`
/// with one threshold per distinct score (ties grouped).
pub fn average_precision(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::invalid("scores and labels lengths differ"));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == positives.len() {
        return Err(Error::invalid(
            "average precision needs both positive and negative labels",
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut seen, mut ap, mut last_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += positives[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - last_recall) * (tp as f64 / seen as f64);
        last_recall = recall;
    }
    Ok(ap)
}

/// Average precision for `positive_class` given integer labels.
pub fn pr_auc(scores: &[f64], labels: &[usize], positive_class: usize) -> Result<f64> {
    let pos: Vec<bool> = labels.iter().map(|&l| l == positive_class).collect();
    average_precision(scores, &pos)
}

/// Macro PR-AUC from probability rows: binary problems score class 1,
/// larger ones average one-vs-rest over every class.
pub fn macro_pr_auc(probs: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<f64> {
    let column = |c: usize| probs.iter().map(|r| r[c]).collect::<Vec<_>>();
    if classes == 2 {
        return pr_auc(&column(1), labels, 1);
    }
    let mut total = 0.0;
    for c in 0..classes {
        total += pr_auc(&column(c), labels, c)?;
    }
    Ok(total / classes as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    pub pr_auc: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl MetricsReport {
    /// Builds a report from argmax predictions and class probabilities.
    pub fn from_probabilities(probs: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Self> {
        let predicted: Vec<usize> = probs
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (i, &p)| if p > best.1 { (i, p) } else { best },
                    )
                    .0
            })
            .collect();
        let cm = ConfusionMatrix::from_predictions(labels, &predicted, classes)?;
        Ok(MetricsReport {
            balanced_accuracy: balanced_accuracy(&cm)?,
            macro_f1: macro_f1(&cm)?,
            pr_auc: macro_pr_auc(probs, labels, classes)?,
            precision: cm.precisions(),
            recall: cm.recalls()?,
        })
    }
}

/// Mean and sample standard deviation (absent for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stddev: Option<f64>,
    pub n: usize,
}

pub fn summarize_values(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    // identical values summarize exactly, without summation roundoff
    let mean = if values.iter().all(|&v| v == values[0]) {
        values[0]
    } else {
        values.iter().sum::<f64>() / n as f64
    };
    let stddev = (n >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Some(Summary { mean, stddev, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub balanced_accuracy: Summary,
    pub macro_f1: Summary,
    pub pr_auc: Summary,
}

pub fn aggregate(reports: &[MetricsReport]) -> Option<AggregateReport> {
    let col = |f: fn(&MetricsReport) -> f64| summarize_values(&reports.iter().map(f).collect::<Vec<_>>());
    Some(AggregateReport {
        balanced_accuracy: col(|r| r.balanced_accuracy)?,
        macro_f1: col(|r| r.macro_f1)?,
        pr_auc: col(|r| r.pr_auc)?,
    })
}
