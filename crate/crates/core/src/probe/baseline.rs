//! Rule-based predictors the probes are compared against.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Uniform over the classes seen in training.
    Uniform,
    /// Drawn from the training class distribution.
    Stratified,
    /// Always the majority training class (lower index on ties).
    Frequent,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Uniform,
        BaselineKind::Stratified,
        BaselineKind::Frequent,
    ];
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Uniform => "uniform",
            BaselineKind::Stratified => "stratified",
            BaselineKind::Frequent => "frequent",
        })
    }
}

pub fn baseline_predict(
    kind: BaselineKind,
    train_labels: &[usize],
    test_size: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if train_labels.is_empty() {
        return Err(Error::EmptyInput("baseline training labels"));
    }
    let classes = train_labels.iter().copied().max().unwrap() + 1;
    let mut counts = vec![0usize; classes];
    for &l in train_labels {
        counts[l] += 1;
    }
    let mut rng = seed::rng(seed, &[seed::tag(&kind.to_string())]);
    Ok(match kind {
        BaselineKind::Frequent => {
            let best = counts
                .iter()
                .enumerate()
                .fold(0, |b, (c, &n)| if n > counts[b] { c } else { b });
            vec![best; test_size]
        }
        BaselineKind::Uniform => {
            let present: Vec<usize> = (0..classes).filter(|&c| counts[c] > 0).collect();
            (0..test_size)
                .map(|_| present[rng.random_range(0..present.len())])
                .collect()
        }
        BaselineKind::Stratified => (0..test_size)
            .map(|_| train_labels[rng.random_range(0..train_labels.len())])
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shares(pred: &[usize], classes: usize) -> Vec<f64> {
        let mut c = vec![0.0; classes];
        for &p in pred {
            c[p] += 1.0;
        }
        c.iter().map(|x| x / pred.len() as f64).collect()
    }

    #[test]
    fn frequent_picks_majority() {
        let train: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        assert_eq!(
            baseline_predict(BaselineKind::Frequent, &train, 5, 0).unwrap(),
            vec![0; 5]
        );
        // tie -> lower index
        assert_eq!(
            baseline_predict(BaselineKind::Frequent, &[1, 0], 2, 0).unwrap(),
            vec![0, 0]
        );
    }

    #[test]
    fn uniform_and_stratified_frequencies() {
        let train: Vec<usize> = (0..100).map(|i| usize::from(i >= 75)).collect();
        let u = baseline_predict(BaselineKind::Uniform, &train, 100_000, 1).unwrap();
        let s = shares(&u, 2);
        assert!((s[0] - 0.5).abs() < 0.01);
        let st = baseline_predict(BaselineKind::Stratified, &train, 100_000, 1).unwrap();
        let s = shares(&st, 2);
        assert!((s[0] - 0.75).abs() < 0.01 && (s[1] - 0.25).abs() < 0.01);
    }

    #[test]
    fn uniform_skips_absent_classes() {
        let pred = baseline_predict(BaselineKind::Uniform, &[0, 3, 3], 1000, 2).unwrap();
        assert!(pred.iter().all(|&p| p == 0 || p == 3));
        assert!(baseline_predict(BaselineKind::Uniform, &[], 3, 0).is_err());
    }
}
