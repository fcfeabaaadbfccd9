//! Confusion-matrix based evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when the class was never predicted; precision is then 0.
    pub no_predictions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Evaluation {
    /// Derives every metric from the matrix alone.
    pub fn from_confusion(confusion: Vec<Vec<u64>>, class_names: &[String]) -> Self {
        let k = confusion.len();
        let mut per_class = Vec::with_capacity(k);
        let mut diag = 0;
        let mut total = 0;
        for c in 0..k {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = (0..k).map(|t| confusion[t][c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            diag += tp;
            total += support;
            per_class.push(ClassMetrics {
                class: class_names[c].clone(),
                precision,
                recall,
                f1,
                support,
                no_predictions: predicted == 0,
            });
        }
        let macro_f1 = if k == 0 {
            0.0
        } else {
            per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64
        };
        Evaluation {
            confusion,
            per_class,
            accuracy: ratio(diag, total),
            macro_f1,
        }
    }
}

/// Scores predictions against truths, both compact class indices below
/// `class_names.len()`.
pub fn evaluate(
    predictions: &[usize],
    truths: &[usize],
    class_names: &[String],
) -> Result<Evaluation> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let k = class_names.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= k || t >= k {
            return Err(Error::InvalidInput(format!("class index outside 0..{k}")));
        }
        confusion[t][p] += 1;
    }
    Ok(Evaluation::from_confusion(confusion, class_names))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn perfect_predictions() {
        let e = evaluate(&[0, 1, 1], &[0, 1, 1], &names()).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert!(e
            .per_class
            .iter()
            .all(|m| m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0));
    }

    #[test]
    fn hand_counted_case() {
        let e = evaluate(&[0, 1, 1, 1], &[0, 0, 1, 1], &names()).unwrap();
        assert_eq!(e.per_class[1].precision, 2.0 / 3.0);
        assert_eq!(e.per_class[0].recall, 0.5);
        assert_eq!(e.confusion, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(e.per_class[0].support, 2);
    }

    #[test]
    fn unpredicted_class_is_flagged() {
        let e = evaluate(&[1, 1], &[0, 1], &names()).unwrap();
        assert!(e.per_class[0].no_predictions);
        assert_eq!(e.per_class[0].precision, 0.0);
        assert!(!e.per_class[1].no_predictions);
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[0], &[0, 1], &names()).is_err());
        assert!(evaluate(&[], &[], &names()).is_err());
        assert!(evaluate(&[2], &[0], &names()).is_err());
    }
}
