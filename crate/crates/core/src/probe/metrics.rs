//! F1 scores over a fixed label set and confusion matrices.

use crate::error::{Error, Result};

fn check(y_true: &[usize], y_pred: &[usize]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput("label vectors"));
    }
    Ok(())
}

/// `(TP, FP, FN)` of one label.
fn counts(y_true: &[usize], y_pred: &[usize], label: usize) -> (usize, usize, usize) {
    let mut c = (0, 0, 0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == label, p == label) {
            (true, true) => c.0 += 1,
            (false, true) => c.1 += 1,
            (true, false) => c.2 += 1,
            _ => {}
        }
    }
    c
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if p + r == 0.0 {
        0.0
    } else if p == r {
        // the harmonic mean of equal terms, without the rounding of 2p²/2p
        p
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F1 from true positives, false positives and false negatives pooled over
/// `label_set`.
pub fn micro_f1(y_true: &[usize], y_pred: &[usize], label_set: &[usize]) -> Result<f64> {
    check(y_true, y_pred)?;
    let (tp, fp, fn_) = label_set
        .iter()
        .map(|&l| counts(y_true, y_pred, l))
        .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(f1(tp, fp, fn_))
}

/// Mean of per-label F1 over every label in `label_set`; labels that never
/// occur contribute 0.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], label_set: &[usize]) -> Result<f64> {
    check(y_true, y_pred)?;
    if label_set.is_empty() {
        return Err(Error::EmptyInput("label set"));
    }
    let sum: f64 = label_set
        .iter()
        .map(|&l| {
            let (tp, fp, fn_) = counts(y_true, y_pred, l);
            f1(tp, fp, fn_)
        })
        .sum();
    Ok(sum / label_set.len() as f64)
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Entry `[i][j]` counts items of true class `i` predicted as `j`.
pub fn confusion_matrix(
    y_true: &[usize],
    y_pred: &[usize],
    classes: usize,
) -> Result<Vec<Vec<usize>>> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    let mut m = vec![vec![0; classes]; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= classes || p >= classes {
            return Err(Error::InvalidParameter(format!(
                "label {} outside 0..{classes}",
                t.max(p)
            )));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Micro-F1 over all classes read off a confusion matrix.
pub fn micro_f1_from_confusion(m: &[Vec<usize>]) -> f64 {
    let tp: usize = (0..m.len()).map(|i| m[i][i]).sum();
    let total: usize = m.iter().flatten().sum();
    // pooled over every label, FP total = FN total = total − TP
    f1(tp, total - tp, total - tp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let t = [0, 0, 1, 1];
        let p = [0, 1, 1, 1];
        let l = [0, 1];
        assert_eq!(micro_f1(&t, &p, &l).unwrap(), 0.75);
        assert!((macro_f1(&t, &p, &l).unwrap() - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
        assert!((macro_f1(&t, &p, &l).unwrap() - 0.7333).abs() < 1e-4);

        let always_zero = [0, 0, 0, 0];
        assert!((macro_f1(&t, &always_zero, &l).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(micro_f1(&t, &t, &l).unwrap(), 1.0);
        assert_eq!(micro_f1(&t, &[1, 1, 0, 0], &l).unwrap(), 0.0);
    }

    #[test]
    fn absent_labels_pull_macro_down() {
        let t = [0, 1];
        assert_eq!(macro_f1(&t, &t, &[0, 1]).unwrap(), 1.0);
        assert_eq!(macro_f1(&t, &t, &[0, 1, 2, 3]).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        assert!(micro_f1(&[], &[], &[0]).is_err());
        assert!(macro_f1(&[0], &[0, 1], &[0]).is_err());
        assert!(confusion_matrix(&[0, 2], &[0, 1], 2).is_err());
    }

    #[test]
    fn confusion() {
        let m = confusion_matrix(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(m, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(
            confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap()[2],
            vec![0, 0, 1]
        );
        assert!((micro_f1_from_confusion(&m) - 2.0 / 3.0).abs() < 1e-15);
    }
}
