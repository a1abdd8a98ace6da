use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{NluError, Result};

/// One-vs-rest scores for a single label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub classes: Vec<ClassMetrics>,
    pub weighted_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Support-weighted F1 over classes with non-zero support.
pub fn weighted_f1(classes: &[ClassMetrics]) -> f64 {
    let total: usize = classes.iter().map(|c| c.support).sum();
    if total == 0 {
        return 0.0;
    }
    classes.iter().map(|c| c.support as f64 * c.f1).sum::<f64>() / total as f64
}

fn check_lengths(gold: usize, pred: usize) -> Result<()> {
    if gold != pred {
        return Err(NluError::Contract(format!("{gold} gold labels but {pred} predictions")));
    }
    Ok(())
}

/// Per-class precision, recall and F1 for `labels`, plus the weighted average.
pub fn score<L: Label>(gold: &[L], pred: &[L], labels: &[L]) -> Result<Scores> {
    check_lengths(gold.len(), pred.len())?;
    let classes: Vec<ClassMetrics> = labels
        .iter()
        .map(|&l| {
            let (mut tp, mut fp, mut fneg) = (0, 0, 0);
            for (&g, &p) in gold.iter().zip(pred) {
                match (g == l, p == l) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fneg += 1,
                    (false, false) => {}
                }
            }
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fneg);
            ClassMetrics {
                label: l.name().to_string(),
                support: tp + fneg,
                precision,
                recall,
                f1: f1_score(precision, recall),
            }
        })
        .collect();
    let weighted_f1 = weighted_f1(&classes);
    Ok(Scores { classes, weighted_f1 })
}

/// `matrix[g][p]` counts, rows and columns in `labels` order.
pub fn confusion<L: Label>(gold: &[L], pred: &[L], labels: &[L]) -> Result<Vec<Vec<usize>>> {
    check_lengths(gold.len(), pred.len())?;
    let mut m = vec![vec![0; labels.len()]; labels.len()];
    let pos = |l: L| labels.iter().position(|&x| x == l);
    for (&g, &p) in gold.iter().zip(pred) {
        if let (Some(gi), Some(pi)) = (pos(g), pos(p)) {
            m[gi][pi] += 1;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::KeywordLabel::{self, Intent as A, NonIntent as B};

    #[test]
    fn perfect_predictions() {
        let gold = [A, B, B, A, B];
        let s = score(&gold, &gold, KeywordLabel::ALL).unwrap();
        assert!(s.classes.iter().all(|c| c.f1 == 1.0));
        assert_eq!(s.weighted_f1, 1.0);
        let m = confusion(&gold, &gold, KeywordLabel::ALL).unwrap();
        assert_eq!(m, vec![vec![2, 0], vec![0, 3]]);
    }

    #[test]
    fn four_sample_case() {
        let s = score(&[A, A, B, B], &[A, B, B, B], KeywordLabel::ALL).unwrap();
        let (a, b) = (&s.classes[0], &s.classes[1]);
        assert!((a.precision - 1.0).abs() < 1e-12 && (a.recall - 0.5).abs() < 1e-12);
        assert!((a.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((b.precision - 2.0 / 3.0).abs() < 1e-12 && (b.recall - 1.0).abs() < 1e-12);
        assert!((b.f1 - 0.8).abs() < 1e-12);
        assert!((s.weighted_f1 - (2.0 * (2.0 / 3.0) + 2.0 * 0.8) / 4.0).abs() < 1e-12);
        let m = confusion(&[A, A, B, B], &[A, B, B, B], KeywordLabel::ALL).unwrap();
        assert_eq!(m, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(m.iter().flatten().sum::<usize>(), 4);
    }

    #[test]
    fn single_class_predictions() {
        let s = score(&[A, A, B, B], &[A, A, A, A], KeywordLabel::ALL).unwrap();
        assert!((s.classes[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.classes[1].f1, 0.0);
        assert!((s.weighted_f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(score(&[A], &[A, B], KeywordLabel::ALL).is_err());
        assert!(confusion(&[A], &[], KeywordLabel::ALL).is_err());
    }
}
