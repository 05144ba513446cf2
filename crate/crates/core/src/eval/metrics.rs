use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::ClassLabel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// `k × k` counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self, MetricsError> {
        if counts.len() != k * k {
            return Err(MetricsError::LengthMismatch { truth: k * k, pred: counts.len() });
        }
        Ok(Self { k, counts })
    }

    pub fn from_codes(truth: &[usize], pred: &[usize], k: usize) -> Result<Self, MetricsError> {
        if truth.len() != pred.len() {
            return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
        }
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in truth.iter().zip(pred) {
            for l in [t, p] {
                if l >= k {
                    return Err(MetricsError::LabelOutOfRange { label: l, k });
                }
            }
            counts[t * k + p] += 1;
        }
        Ok(Self { k, counts })
    }

    pub fn from_labels(truth: &[ClassLabel], pred: &[ClassLabel]) -> Result<Self, MetricsError> {
        let t: Vec<usize> = truth.iter().map(|l| l.code()).collect();
        let p: Vec<usize> = pred.iter().map(|l| l.code()).collect();
        Self::from_codes(&t, &p, ClassLabel::COUNT)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    pub fn fp(&self, c: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, c)).sum::<u64>() - self.tp(c)
    }

    pub fn fn_(&self, c: usize) -> u64 {
        (0..self.k).map(|p| self.get(c, p)).sum::<u64>() - self.tp(c)
    }

    pub fn tn(&self, c: usize) -> u64 {
        self.total() - self.tp(c) - self.fp(c) - self.fn_(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Weighted,
}

/// Per-class term whose denominator was zero and was therefore taken as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UndefinedTerm {
    Precision(usize),
    Recall(usize),
    F1(usize),
}

/// Scores as fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub undefined: Vec<UndefinedTerm>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy is `trace / total`. Precision, recall and F1 are computed per
/// class (one-vs-rest) and averaged over the classes that occur in either the
/// truth or the predictions; a 0/0 term counts as 0 and is recorded.
pub fn compute_metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<Metrics, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut undefined = Vec::new();
    let (mut p_sum, mut r_sum, mut f_sum, mut w_sum) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..cm.k() {
        let (tp, fp, fn_) = (cm.tp(c), cm.fp(c), cm.fn_(c));
        if tp + fp + fn_ == 0 {
            continue;
        }
        let p = ratio(tp, tp + fp).unwrap_or_else(|| {
            undefined.push(UndefinedTerm::Precision(c));
            0.0
        });
        let r = ratio(tp, tp + fn_).unwrap_or_else(|| {
            undefined.push(UndefinedTerm::Recall(c));
            0.0
        });
        let f = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            undefined.push(UndefinedTerm::F1(c));
            0.0
        };
        let w = match averaging {
            Averaging::Macro => 1.0,
            Averaging::Weighted => (tp + fn_) as f64,
        };
        p_sum += w * p;
        r_sum += w * r;
        f_sum += w * f;
        w_sum += w;
    }
    let avg = |s: f64| if w_sum > 0.0 { s / w_sum } else { 0.0 };
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        precision: avg(p_sum),
        recall: avg(r_sum),
        f1: avg(f_sum),
        averaging,
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_fixture_is_point_eight_everywhere() {
        // class 1 is the positive class: TP=4, FN=1, FP=1, TN=4
        let cm = ConfusionMatrix::from_counts(2, vec![4, 1, 1, 4]).unwrap();
        assert_eq!((cm.tp(1), cm.fp(1), cm.fn_(1), cm.tn(1)), (4, 1, 1, 4));
        let m = compute_metrics(&cm, Averaging::Macro).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            assert!((v - 0.8).abs() < 1e-15);
        }
        let (tp, tn, fp, fn_) = (4.0, 4.0, 1.0, 1.0);
        assert_eq!(m.accuracy, (tp + tn) / (tp + tn + fp + fn_));
    }

    #[test]
    fn perfect_predictions() {
        let y: Vec<ClassLabel> = ClassLabel::ALL.iter().cycle().take(30).copied().collect();
        let cm = ConfusionMatrix::from_labels(&y, &y).unwrap();
        for t in 0..6 {
            for p in 0..6 {
                assert_eq!(cm.get(t, p) > 0, t == p);
            }
        }
        let m = compute_metrics(&cm, Averaging::Macro).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn single_miss_lands_in_its_cell() {
        let cm = ConfusionMatrix::from_codes(&[2], &[5], 6).unwrap();
        assert_eq!(cm.get(2, 5), 1);
        assert_eq!(cm.total(), 1);
        let m = compute_metrics(&cm, Averaging::Macro).unwrap();
        assert_eq!(m.accuracy, 0.0);
        assert!(m.undefined.contains(&UndefinedTerm::Precision(2)));
        assert!(m.undefined.contains(&UndefinedTerm::Recall(5)));
    }

    #[test]
    fn input_errors() {
        assert!(matches!(ConfusionMatrix::from_codes(&[0, 1], &[0], 2), Err(MetricsError::LengthMismatch { .. })));
        assert!(matches!(ConfusionMatrix::from_codes(&[0], &[7], 6), Err(MetricsError::LabelOutOfRange { label: 7, k: 6 })));
        let empty = ConfusionMatrix::from_counts(3, vec![0; 9]).unwrap();
        assert_eq!(compute_metrics(&empty, Averaging::Macro), Err(MetricsError::EmptyMatrix));
    }

    #[test]
    fn weighted_differs_from_macro_on_imbalance() {
        let truth = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
        let pred = [0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let cm = ConfusionMatrix::from_codes(&truth, &pred, 2).unwrap();
        let m = compute_metrics(&cm, Averaging::Macro).unwrap();
        let w = compute_metrics(&cm, Averaging::Weighted).unwrap();
        assert!((m.recall - 0.75).abs() < 1e-15);
        assert!((w.recall - 0.9).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn order_of_samples_is_irrelevant(pairs in prop::collection::vec((0usize..6, 0usize..6), 1..60), rot in 0usize..60) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let a = ConfusionMatrix::from_codes(&t, &p, 6).unwrap();
            let mut shuffled = pairs.clone();
            let len = shuffled.len();
            shuffled.rotate_left(rot % len);
            shuffled.reverse();
            let (t2, p2): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
            prop_assert_eq!(&a, &ConfusionMatrix::from_codes(&t2, &p2, 6).unwrap());
            let correct = t.iter().zip(&p).filter(|(a, b)| a == b).count();
            prop_assert_eq!(compute_metrics(&a, Averaging::Macro).unwrap().accuracy, correct as f64 / t.len() as f64);
        }
    }
}
